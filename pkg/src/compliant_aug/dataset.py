"""Augmented dataset files.

A dataset directory holds

``manifest.json``
    schema version, input hashes, seed, config echo and the frame field order.
``frames.jsonl``
    one JSON object per frame, keys in :data:`FRAME_FIELDS` order.
``frames.bin`` (optional)
    the same records in a length-prefixed binary encoding (see :func:`encode_record`).
``events.csv``
    per-event outcome report.

Configurations are stored as rows ``[px, py, pz, qw, qx, qy, qz, joints...]``.
Frames without a forced link store ``link: null`` and ``link_pos_*: null``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import AugmentedFrame, AugmentResult
from .ik import StiffnessCommand
from .model import Configuration
from .spatial import Wrench

SCHEMA_VERSION = 1

FRAME_FIELDS = (
    "index", "time", "status", "event", "link", "force", "torque", "k_t", "k_r",
    "q_ref", "q_aug", "link_pos_ref", "link_pos_aug", "residuals",
)
EVENT_FIELDS = ("event", "kind", "link", "k_t", "k_r", "status", "scalings", "scale",
                "original_peak", "final_peak", "reasons")

STATUS_CODES = {"reference": 0, "event": 1, "rejected": 2}
BIN_MAGIC = b"CAUGBIN1"


class DatasetError(ValueError):
    pass


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


@dataclass(frozen=True)
class DatasetManifest:
    model_sha256: str
    clip_sha256: str
    seed: int
    config: dict
    dt: float
    n_frames: int
    joint_names: tuple[str, ...]
    binary: bool = False
    schema_version: int = SCHEMA_VERSION
    fields: tuple[str, ...] = FRAME_FIELDS

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "model_sha256": self.model_sha256,
            "clip_sha256": self.clip_sha256,
            "seed": self.seed,
            "dt": self.dt,
            "n_frames": self.n_frames,
            "joint_names": list(self.joint_names),
            "fields": list(self.fields),
            "binary": self.binary,
            "config": self.config,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise DatasetError(f"unsupported dataset schema_version {d.get('schema_version')!r}")
        return cls(
            model_sha256=d["model_sha256"], clip_sha256=d["clip_sha256"], seed=d["seed"],
            config=d["config"], dt=d["dt"], n_frames=d["n_frames"],
            joint_names=tuple(d["joint_names"]), binary=d["binary"], fields=tuple(d["fields"]),
        )


# --------------------------------------------------------------------------
# records


def _vec(a):
    return None if a is None else [float(x) for x in a]


def frame_to_record(fr: AugmentedFrame) -> dict:
    """Plain-JSON record with keys in :data:`FRAME_FIELDS` order."""
    return {
        "index": int(fr.index),
        "time": float(fr.time),
        "status": fr.status,
        "event": int(fr.event),
        "link": fr.link,
        "force": _vec(fr.wrench.force),
        "torque": _vec(fr.wrench.torque),
        "k_t": float(fr.cmd.k_t),
        "k_r": float(fr.cmd.k_r),
        "q_ref": fr.q_ref.to_row(),
        "q_aug": fr.q_aug.to_row(),
        "link_pos_ref": _vec(fr.link_pos_ref),
        "link_pos_aug": _vec(fr.link_pos_aug),
        "residuals": {k: float(v) for k, v in fr.residuals.items()},
    }


def record_to_frame(rec: dict) -> AugmentedFrame:
    arr = lambda v: None if v is None else np.array(v, dtype=float)  # noqa: E731
    return AugmentedFrame(
        index=rec["index"],
        time=rec["time"],
        q_ref=Configuration.from_row(rec["q_ref"]),
        q_aug=Configuration.from_row(rec["q_aug"]),
        wrench=Wrench(rec["force"], rec["torque"]),
        link=rec["link"],
        cmd=StiffnessCommand(rec["k_t"], rec["k_r"]),
        event=rec["event"],
        status=rec["status"],
        residuals=dict(rec["residuals"]),
        link_pos_ref=arr(rec["link_pos_ref"]),
        link_pos_aug=arr(rec["link_pos_aug"]),
    )


def _pack_str(s: str | None) -> bytes:
    if s is None:
        return struct.pack("<h", -1)
    b = s.encode()
    return struct.pack("<h", len(b)) + b


def _unpack_str(buf: bytes, off: int) -> tuple[str | None, int]:
    (n,) = struct.unpack_from("<h", buf, off)
    off += 2
    if n < 0:
        return None, off
    return buf[off : off + n].decode(), off + n


def _pack_vec(v) -> bytes:
    if v is None:
        return struct.pack("<B", 0)
    return struct.pack(f"<B{len(v)}d", len(v), *v)


def _unpack_vec(buf: bytes, off: int):
    (n,) = struct.unpack_from("<B", buf, off)
    off += 1
    if n == 0:
        return None, off
    return list(struct.unpack_from(f"<{n}d", buf, off)), off + 8 * n


def encode_record(rec: dict) -> bytes:
    """Binary payload of one record, prefixed by its little-endian uint32 length.

    Payload layout: index (i4), time (f8), status code (u1), event (i4),
    link (str), force, torque (vec), k_t, k_r (f8), q_ref, q_aug,
    link_pos_ref, link_pos_aug (vec), residual count (u2) then (str, f8) pairs.
    Strings are i2 length + utf-8 (length -1 for null); vectors are u1
    length + f8 values (length 0 for null); configuration rows use a u2 length.
    """
    out = io.BytesIO()
    out.write(struct.pack("<idBi", rec["index"], rec["time"], STATUS_CODES[rec["status"]], rec["event"]))
    out.write(_pack_str(rec["link"]))
    out.write(_pack_vec(rec["force"]))
    out.write(_pack_vec(rec["torque"]))
    out.write(struct.pack("<dd", rec["k_t"], rec["k_r"]))
    for key in ("q_ref", "q_aug"):
        row = rec[key]
        out.write(struct.pack(f"<H{len(row)}d", len(row), *row))
    out.write(_pack_vec(rec["link_pos_ref"]))
    out.write(_pack_vec(rec["link_pos_aug"]))
    out.write(struct.pack("<H", len(rec["residuals"])))
    for name, value in rec["residuals"].items():
        out.write(_pack_str(name))
        out.write(struct.pack("<d", value))
    payload = out.getvalue()
    return struct.pack("<I", len(payload)) + payload


def decode_record(payload: bytes) -> dict:
    status_names = {v: k for k, v in STATUS_CODES.items()}
    index, time, status, event = struct.unpack_from("<idBi", payload, 0)
    off = struct.calcsize("<idBi")
    link, off = _unpack_str(payload, off)
    force, off = _unpack_vec(payload, off)
    torque, off = _unpack_vec(payload, off)
    k_t, k_r = struct.unpack_from("<dd", payload, off)
    off += 16
    rows = []
    for _ in range(2):
        (n,) = struct.unpack_from("<H", payload, off)
        off += 2
        rows.append(list(struct.unpack_from(f"<{n}d", payload, off)))
        off += 8 * n
    link_pos_ref, off = _unpack_vec(payload, off)
    link_pos_aug, off = _unpack_vec(payload, off)
    (n_res,) = struct.unpack_from("<H", payload, off)
    off += 2
    residuals = {}
    for _ in range(n_res):
        name, off = _unpack_str(payload, off)
        (residuals[name],) = struct.unpack_from("<d", payload, off)
        off += 8
    if off != len(payload):
        raise DatasetError(f"record {index}: {len(payload) - off} trailing bytes")
    return {
        "index": index, "time": time, "status": status_names[status], "event": event, "link": link,
        "force": force, "torque": torque, "k_t": k_t, "k_r": k_r, "q_ref": rows[0], "q_aug": rows[1],
        "link_pos_ref": link_pos_ref, "link_pos_aug": link_pos_aug, "residuals": residuals,
    }


# --------------------------------------------------------------------------
# files


def outcome_rows(result: AugmentResult) -> list[dict]:
    rows = []
    for ev, oc in zip(result.schedule, result.outcomes):
        rows.append({
            "event": oc.event, "kind": ev.kind, "link": ev.link, "k_t": ev.cmd.k_t, "k_r": ev.cmd.k_r,
            "status": oc.label, "scalings": oc.scalings, "scale": oc.scale,
            "original_peak": oc.original_peak, "final_peak": oc.final_peak,
            "reasons": " | ".join(oc.reasons),
        })
    return rows


def write_dataset(out_dir, result: AugmentResult, manifest: DatasetManifest) -> dict[str, Path]:
    """Write manifest, frame stream(s) and event report; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = [frame_to_record(fr) for fr in result.frames]
    paths = {"manifest": out / "manifest.json", "frames": out / "frames.jsonl", "events": out / "events.csv"}
    with open(paths["frames"], "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    if manifest.binary:
        paths["frames_bin"] = out / "frames.bin"
        with open(paths["frames_bin"], "wb") as fh:
            fh.write(BIN_MAGIC)
            for rec in records:
                fh.write(encode_record(rec))
    with open(paths["events"], "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=EVENT_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(outcome_rows(result))
    paths["manifest"].write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    return paths


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path}: parse error: {e}") from None
    return DatasetManifest.from_dict(d)


def read_records(path) -> list[dict]:
    """Records from ``frames.jsonl`` or ``frames.bin`` (chosen by extension)."""
    path = Path(path)
    if path.suffix == ".bin":
        data = path.read_bytes()
        if not data.startswith(BIN_MAGIC):
            raise DatasetError(f"{path}: not a frame binary file")
        off, recs = len(BIN_MAGIC), []
        while off < len(data):
            (n,) = struct.unpack_from("<I", data, off)
            off += 4
            if off + n > len(data):
                raise DatasetError(f"{path}: truncated record at byte {off}")
            recs.append(decode_record(data[off : off + n]))
            off += n
        return recs
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


@dataclass
class Dataset:
    manifest: DatasetManifest
    frames: list[AugmentedFrame] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)


def load_dataset(directory, binary: bool = False) -> Dataset:
    d = Path(directory)
    manifest = read_manifest(d / "manifest.json")
    frames = [record_to_frame(r) for r in read_records(d / ("frames.bin" if binary else "frames.jsonl"))]
    if len(frames) != manifest.n_frames:
        raise DatasetError(f"{d}: manifest lists {manifest.n_frames} frames, found {len(frames)}")
    return Dataset(manifest, frames)


def read_outcomes(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

