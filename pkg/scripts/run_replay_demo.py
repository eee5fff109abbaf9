#!/usr/bin/env python3
"""Generate a trace and replay it through the full pipeline with the mock
backend, writing the interaction log and report into ./out.

Usage:
    python3 scripts/run_replay_demo.py [--days 2] [--out out]
"""

import argparse
import sys
import tempfile
from pathlib import Path

from homechat.cli import run_replay
from homechat.simulate import write_fixture


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--days", type=int, default=2)
    ap.add_argument("--out", default="out")
    ap.add_argument("--top", type=int, default=None)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        trace = Path(tmp) / "trace.jsonl"
        n = write_fixture(trace, days=args.days)
        print(f"replaying {n} events ...")
        return run_replay(str(trace), out_dir=args.out, top=args.top)


if __name__ == "__main__":
    sys.exit(main())
