"""Check every shipped corpus against its expectations file.

    python scripts/run_corpus.py [--jobs N]
"""

import argparse
import sys
from pathlib import Path

from txsmc.cli import main

ROOT = Path(__file__).resolve().parent.parent / "benchmarks"
CORPORA = [ROOT, ROOT / "worked", ROOT / "litmus"]


def run(jobs: int) -> int:
    status = 0
    for d in CORPORA:
        print(f"== {d.relative_to(ROOT.parent)}")
        status = max(status, main(["corpus", str(d), "--expect", str(d / "expected.txt"), "--jobs", str(jobs)]))
    return status


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=1)
    sys.exit(run(ap.parse_args().jobs))
