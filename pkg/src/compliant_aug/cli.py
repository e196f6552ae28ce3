"""Command-line entry point.

Exit codes: 0 success, 1 validation or runtime failure, 2 usage error
(including missing input files). Diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    InfeasibleBudgetError,
    NoiseBudget,
    effective_stiffness,
    stiffness_bounds,
    tracking_metrics,
    write_curve_csv,
)
from .augment import generate
from .config import ConfigError, PipelineConfig, load_config, parse_override
from .dataset import DatasetError, DatasetManifest, load_dataset, sha256_file, write_dataset
from .model import ModelError, load_clip, load_model
from .rlprep import observation_layout


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: list[str]
    config: dict
    inputs: dict[str, str]
    seeds: list[int]
    outputs: list[str]
    wall_time: float = 0.0
    tool_version: str = __version__

    def write(self, path) -> None:
        """Atomic write: temp file in the same directory, then rename."""
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(self.__dict__, indent=2) + "\n")
        os.replace(tmp, path)


def _existing(path: str | None, flag: str) -> Path:
    if path is None:
        raise UsageError(f"{flag} is required")
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{flag}: no such file or directory: {path}")
    return p


def _resolve_config(args) -> PipelineConfig:
    cfg = load_config(_existing(args.config, "--config")) if args.config else PipelineConfig()
    for text in args.set or []:
        cfg = cfg.with_override(*parse_override(text))
    return cfg


# --------------------------------------------------------------------------
# gen-data


def _gen_job(job: dict) -> dict:
    model = load_model(job["model"])
    clip = load_clip(job["clip"], model)
    cfg = PipelineConfig.from_dict(job["config"])
    sampler = replace(cfg.sampler, seed=job["seed"])
    result = generate(model, clip, sampler, cfg.ik, cfg.limits)
    config_echo = replace(cfg, sampler=sampler).to_dict()
    manifest = DatasetManifest(
        model_sha256=job["model_sha256"], clip_sha256=job["clip_sha256"], seed=job["seed"],
        config=config_echo, dt=clip.dt, n_frames=len(result.frames),
        joint_names=tuple(model.joint_names), binary=job["binary"],
    )
    paths = write_dataset(job["out"], result, manifest)
    counts = {}
    for oc in result.outcomes:
        counts[oc.status] = counts.get(oc.status, 0) + 1
    return {"out": job["out"], "paths": [str(p) for p in paths.values()], "outcomes": counts}


def cmd_gen_data(args) -> int:
    model_path = _existing(args.model, "--model")
    clips = [_existing(c, "--clip") for c in args.clip]
    cfg = _resolve_config(args)
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    if args.num_seeds < 1:
        raise UsageError("--num-seeds must be >= 1")
    seed = cfg.sampler.seed if args.seed is None else args.seed
    seeds = [seed + i for i in range(args.num_seeds)]
    # validate inputs up front so failures name the file
    model = load_model(model_path)
    for c in clips:
        load_clip(c, model)
    out = Path(args.out)
    single = len(clips) == 1 and len(seeds) == 1
    model_hash = sha256_file(model_path)
    jobs = []
    for c in clips:
        for s in seeds:
            jobs.append({
                "model": str(model_path), "clip": str(c), "seed": s, "config": cfg.to_dict(),
                "binary": args.binary, "model_sha256": model_hash, "clip_sha256": sha256_file(c),
                "out": str(out if single else out / f"{c.stem}_seed{s}"),
            })
    t0 = time.perf_counter()
    if args.jobs == 1 or len(jobs) == 1:
        results = [_gen_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_gen_job, jobs))
    for r in results:
        summary = ", ".join(f"{k}={v}" for k, v in sorted(r["outcomes"].items())) or "no events"
        print(f"{r['out']}: {summary}")
    out.mkdir(parents=True, exist_ok=True)
    inputs = {str(model_path): model_hash, **{str(c): sha256_file(c) for c in clips}}
    RunManifest(
        command=["gen-data", *args.argv], config=cfg.to_dict(), inputs=inputs, seeds=seeds,
        outputs=[p for r in results for p in r["paths"]], wall_time=time.perf_counter() - t0,
    ).write(out / "run.json")
    return 0


# --------------------------------------------------------------------------
# analysis commands


def cmd_bounds(args) -> int:
    b = stiffness_bounds(NoiseBudget(args.force_noise, args.pos_noise, args.force_acc, args.pos_acc))
    print(f"k_min={b.k_min:g} k_max={b.k_max:g}")
    return 0


def _parse_bins(text: str) -> np.ndarray:
    parts = [p for p in text.split(",") if p.strip()]
    try:
        if len(parts) == 1:
            n = int(parts[0])
            if n < 1:
                raise ValueError
            return np.geomspace(40.0, 1000.0, n + 1)
        return np.array([float(p) for p in parts])
    except ValueError:
        raise UsageError(f"--bins: expected a bin count or comma-separated edges, got {text!r}") from None


def cmd_analyze_stiffness(args) -> int:
    ds = load_dataset(_existing(args.dataset, "--dataset"))
    edges = _parse_bins(args.bins)
    points = effective_stiffness(ds.frames, edges)
    if not points:
        print(f"error: {args.dataset}: no plateau frames in any bin", file=sys.stderr)
        return 1
    if args.out:
        write_curve_csv(points, args.out)
    else:
        print("bin_lo,bin_hi,commanded_k,effective_k,count")
        for p in points:
            print(f"{p.bin_lo:g},{p.bin_hi:g},{p.commanded:.6g},{p.effective:.6g},{p.count}")
    return 0


def _trajectory(path: Path, model, which: str):
    if path.is_dir():
        return [getattr(fr, which) for fr in load_dataset(path).frames]
    return list(load_clip(path, model).frames)


def cmd_metrics(args) -> int:
    model = load_model(_existing(args.model, "--model"))
    a = _trajectory(_existing(args.traj_a, "--traj-a"), model, args.field_a)
    b = _trajectory(_existing(args.traj_b, "--traj-b"), model, args.field_b)
    m = tracking_metrics(model, a, b)
    row = m.to_row()
    lines = [",".join(row), ",".join(f"{v:.6f}" for v in row.values())]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    return 0


def cmd_validate(args) -> int:
    model = load_model(_existing(args.model, "--model"))
    print(f"model {model.name}: {len(model.links)} links, {model.n_joints} joints, mass {model.total_mass:g} kg")
    if args.clip is None:
        return 0
    clip = load_clip(_existing(args.clip, "--clip"), model)
    print(f"clip: {len(clip)} frames, dt {clip.dt:g} s, duration {clip.duration:g} s")
    for k, joint, value in clip.limit_violations:
        print(f"error: frame {k}: joint {joint} = {value:.6g} outside limits", file=sys.stderr)
    return 1 if clip.limit_violations else 0


def cmd_obs_layout(args) -> int:
    model = load_model(_existing(args.model, "--model"))
    cfg = _resolve_config(args)
    schema = observation_layout(model.n_joints, len(model.feet), cfg.observation).to_schema()
    text = json.dumps(schema, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="compliant-aug", description="Compliant motion augmentation toolkit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="augment clip(s) into dataset directories")
    g.add_argument("--model", required=True)
    g.add_argument("--clip", required=True, nargs="+")
    g.add_argument("--config")
    g.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="config override (repeatable)")
    g.add_argument("--seed", type=int)
    g.add_argument("--num-seeds", type=int, default=1, help="run seeds seed..seed+N-1")
    g.add_argument("--out", required=True)
    g.add_argument("--binary", action="store_true", help="also write frames.bin")
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_gen_data)

    b = sub.add_parser("bounds", help="stiffness bounds from a sensing-noise budget")
    b.add_argument("--force-noise", type=float, required=True, help="N")
    b.add_argument("--pos-noise", type=float, required=True, help="m")
    b.add_argument("--force-acc", type=float, required=True, help="N")
    b.add_argument("--pos-acc", type=float, required=True, help="m")
    b.set_defaults(func=cmd_bounds)

    a = sub.add_parser("analyze-stiffness", help="effective stiffness curve of a dataset")
    a.add_argument("--dataset", required=True)
    a.add_argument("--bins", default="5", help="bin count (log-spaced over 40..1000 N/m) or comma-separated edges")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze_stiffness)

    m = sub.add_parser("metrics", help="joint and keypoint tracking errors between two trajectories")
    m.add_argument("--model", required=True)
    m.add_argument("--traj-a", required=True, help="clip file or dataset directory")
    m.add_argument("--traj-b", required=True, help="clip file or dataset directory")
    m.add_argument("--field-a", choices=("q_aug", "q_ref"), default="q_aug")
    m.add_argument("--field-b", choices=("q_aug", "q_ref"), default="q_aug")
    m.add_argument("--out")
    m.set_defaults(func=cmd_metrics)

    v = sub.add_parser("validate", help="check a model and optionally a clip")
    v.add_argument("--model", required=True)
    v.add_argument("--clip")
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("obs-layout", help="export the observation layout schema")
    o.add_argument("--model", required=True)
    o.add_argument("--config")
    o.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    o.add_argument("--out")
    o.set_defaults(func=cmd_obs_layout)
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = argv[1:]
    try:
        with warnings.catch_warnings():
            warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
            return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ModelError, ConfigError, DatasetError, InfeasibleBudgetError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
