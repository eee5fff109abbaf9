#!/usr/bin/env python3
"""Generate the deterministic multi-day sensor/position trace used by the
replay CLI and the test suite.

Usage:
    python3 scripts/generate_fixture.py --out trace.jsonl --days 2 --seed 7
"""

import argparse
from pathlib import Path

from homechat.simulate import write_fixture


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("trace.jsonl"))
    ap.add_argument("--days", type=int, default=2)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    n = write_fixture(args.out, days=args.days, seed=args.seed)
    print(f"wrote {n} events to {args.out}")


if __name__ == "__main__":
    main()
