"""Write the canonical fixture files used by the test suite and CLI examples."""

import argparse
from pathlib import Path

from compliant_aug import fixtures as fx
from compliant_aug.model import save_clip, save_model


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data"))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    humanoid = fx.humanoid()
    save_model(humanoid, out / "humanoid.json")
    save_model(fx.planar_arm(), out / "planar_arm.json")
    save_model(fx.one_link_arm(), out / "one_link_arm.json")
    save_clip(fx.standing_clip(humanoid, 10.0), humanoid, out / "standing_10s.json")
    save_clip(fx.swing_clip(humanoid, 10.0), humanoid, out / "swing_10s.json")
    for p in sorted(out.glob("*.json")):
        print(p)


if __name__ == "__main__":
    main()
