"""Lift a gadget listing and tabulate usability, categories and rejection reasons.

With no listing, a synthetic corpus is generated instead.
"""

import argparse
import json
import random
from collections import Counter

from ropforge import corpusgen
from ropforge.cli import corpus_stats, lift_corpus


def synthetic(n: int, seed: int) -> str:
    rng = random.Random(seed)
    lines = []
    for i in range(n):
        r = rng.random()
        if r < 0.1:
            body = corpusgen.memory_gadget_text(rng)
        elif r < 0.2:
            body = corpusgen.unbalanced_gadget_text(rng)
        else:
            body = corpusgen.random_gadget_text(rng, 8)
        lines.append(f"{0x1000 + 16 * i:#018x} : {body}")
    lines.append(f"{0x1000 + 16 * n:#018x} : syscall ; ret")
    return "\n".join(lines) + "\n"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("listing", nargs="?")
    ap.add_argument("--synthetic", type=int, default=1000, help="gadgets to generate without a listing")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--max-depth", type=int, default=10)
    args = ap.parse_args()
    text = open(args.listing).read() if args.listing else synthetic(args.synthetic, args.seed)
    lifted = lift_corpus(text, args.max_depth)
    stats = corpus_stats(lifted)
    writes = Counter(eq.dest for s in lifted.summaries for eq in s.equations)
    stats["gadgetsWriting"] = dict(sorted(writes.items()))
    stats["unsupportedByReason"] = dict(Counter(why for _, why in lifted.corpus.unsupported))
    print(json.dumps(stats, indent=2))


if __name__ == "__main__":
    main()
