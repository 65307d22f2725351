"""Run the full report on a config and print the three tables.

    python3 scripts/reproduce_tables.py --config configs/synthetic.json --output-dir runs/synthetic
"""
import argparse
import sys
from pathlib import Path

from oibtail import pipeline
from oibtail.config import RunConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parents[1] / "configs" / "synthetic.json"))
    ap.add_argument("--output-dir", default="runs/synthetic")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    cfg = RunConfig.from_file(args.config).with_overrides(output_dir=args.output_dir, workers=args.workers)
    res = pipeline.run_report(cfg)
    out = Path(cfg.output_dir)
    for name in sorted(out.glob("table1_*_dt1.csv")) + [out / "table2.csv", out / "table3.csv"]:
        print(f"== {name.name}")
        print("\n".join(name.read_text().splitlines()[1:]))
    for err in res.failures:
        print("error:", err, file=sys.stderr)
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
