"""Fuzz the lifter against the emulator on random supported-subset gadgets."""

import argparse
import random
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from helpers import differential_batch  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gadgets", type=int, default=20_000)
    ap.add_argument("--states", type=int, default=3, help="random states per gadget")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    t0 = time.perf_counter()
    triples, failures = differential_batch(random.Random(args.seed), args.gadgets, args.states)
    print(f"{triples} triples, {len(failures)} mismatches, {time.perf_counter() - t0:.1f}s")
    for msg in failures[:20]:
        print("  " + msg)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
