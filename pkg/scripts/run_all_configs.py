"""Run every bundled config through the CLI and print a one-line verdict each.

    python3 scripts/run_all_configs.py --out runs/
"""
import argparse
import time
from pathlib import Path

from semistable_renewal.cli import bundled_configs, main

EXIT = {0: "pass", 1: "FAIL", 2: "config error", 3: "numeric error"}


def run_all(out: Path, names: list[str] | None = None) -> dict[str, int]:
    codes = {}
    for name in names or sorted(bundled_configs()):
        t0 = time.perf_counter()
        codes[name] = main(["run", "--config", name, "--out", str(out / name)])
        print(f"{name:24s} {EXIT.get(codes[name], codes[name]):14s} {time.perf_counter() - t0:7.1f} s", flush=True)
    return codes


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("names", nargs="*", help="subset of bundled config names")
    args = ap.parse_args()
    codes = run_all(args.out, args.names)
    raise SystemExit(max(codes.values(), default=0))
