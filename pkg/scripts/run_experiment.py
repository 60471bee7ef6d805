"""Run the whole experiment on a dataset and print both result tables.

    python3 scripts/run_experiment.py --out runs/fixture --bench-runs 3
"""

import argparse
import sys
from pathlib import Path

from scenegen.cli import main


def run(out: str, bench_runs: int, extra: list[str]) -> int:
    common = ["--out", out, "--set", f"bench_runs={bench_runs}", *extra]
    for cmd in ("ingest", "network", "generate", "evaluate", "bench", "report"):
        print(f"== {cmd}", flush=True)
        code = main([cmd, *common])
        if code:
            return code
    for name in ("table1.csv", "table2.csv"):
        print(f"\n{name}")
        print((Path(out) / "report" / name).read_text(), end="")
    return 0


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/experiment")
    p.add_argument("--bench-runs", type=int, default=3)
    args, rest = p.parse_known_args()
    sys.exit(run(args.out, args.bench_runs, rest))
