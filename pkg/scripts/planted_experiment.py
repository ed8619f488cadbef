"""Success rate and search time on planted corpora, swept over max chain length.

    python scripts/planted_experiment.py --corpora 200 --lengths 2 4 6 --csv out.csv
"""

import argparse
import csv
import random
import statistics
import sys
import time

from ropforge import asm, emit, emu, semantics, synth
from ropforge.corpusgen import planted_corpus


def run(n: int, max_len: int, seed: int, workers: int) -> dict:
    rng = random.Random(seed)
    limits = synth.Limits(max_chain_len=max_len, workers=workers)
    found = verified = 0
    times, steps = [], []
    for _ in range(n):
        case = planted_corpus(rng)
        corpus = asm.parse_listing(case.text)
        sums = [s for s in map(semantics.lift_gadget, corpus.gadgets)
                if isinstance(s, semantics.GadgetSummary)]
        t0 = time.perf_counter()
        try:
            chain = synth.build_chain(synth.ObjectiveState(case.objective), sums, limits)
        except synth.SynthError:
            times.append(time.perf_counter() - t0)
            continue
        times.append(time.perf_counter() - t0)
        found += 1
        steps.append(len(chain.steps))
        if emu.verify_chain(chain, emit.layout_stack(chain), corpus=corpus).passed:
            verified += 1
    return {
        "max_chain_len": max_len, "corpora": n, "found": found, "verified": verified,
        "mean_ms": round(1000 * statistics.mean(times), 2),
        "p95_ms": round(1000 * sorted(times)[int(0.95 * (len(times) - 1))], 2),
        "max_ms": round(1000 * max(times), 2),
        "mean_steps": round(statistics.mean(steps), 2) if steps else 0.0,
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpora", type=int, default=200)
    ap.add_argument("--lengths", type=int, nargs="+", default=[2, 3, 4, 6])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="also write rows to this file")
    args = ap.parse_args()
    rows = [run(args.corpora, k, args.seed, args.workers) for k in args.lengths]
    out = open(args.csv, "w", newline="") if args.csv else None
    try:
        for stream in filter(None, (sys.stdout, out)):
            w = csv.DictWriter(stream, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    finally:
        if out:
            out.close()


if __name__ == "__main__":
    main()
