"""Compare the compiled string kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--pairs 2000]

Reports the best-of-N wall time per workload and the speedup. Both
implementations are also checked for identical output on the workload.
"""

import argparse
import random
import string
import sys
import timeit

from lexswap import _pykernels

try:
    from lexswap import _ckernels
except ImportError:
    _ckernels = None


def make_pairs(n, rng, lo=3, hi=12):
    letters = string.ascii_lowercase[:12]
    return [("".join(rng.choices(letters, k=rng.randint(lo, hi))),
             "".join(rng.choices(letters, k=rng.randint(lo, hi)))) for _ in range(n)]


def make_vocab(rng, size=3000):
    letters = string.ascii_lowercase
    pieces = {"".join(rng.choices(letters, k=rng.randint(1, 5))) for _ in range(size)}
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + sorted(pieces) + ["##" + p for p in sorted(pieces)]
    return {t: i for i, t in enumerate(tokens)}


def lev_workload(impl, pairs):
    return [impl.levenshtein(a, b) for a, b in pairs]


def wp_workload(impl, words, vocab):
    return [impl.wordpiece_word(w, vocab, 1) for w in words]


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--pairs", type=int, default=2000)
    ap.add_argument("--words", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _ckernels is None:
        print("compiled extension not built; run `pip install --no-build-isolation -e .` first")
        return 1

    rng = random.Random(args.seed)
    pairs = make_pairs(args.pairs, rng)
    vocab = make_vocab(rng)
    words = ["".join(rng.choices(string.ascii_lowercase, k=rng.randint(2, 14))) for _ in range(args.words)]

    workloads = {
        f"levenshtein ({args.pairs} pairs)": lambda impl: lev_workload(impl, pairs),
        f"wordpiece ({args.words} words)": lambda impl: wp_workload(impl, words, vocab),
    }
    print(f"{'workload':<28}{'python s':>11}{'cython s':>11}{'speedup':>9}")
    for name, work in workloads.items():
        if work(_pykernels) != work(_ckernels):
            print(f"{name}: outputs differ between backends", file=sys.stderr)
            return 1
        t_py = best_time(lambda: work(_pykernels), args.repeat)
        t_c = best_time(lambda: work(_ckernels), args.repeat)
        print(f"{name:<28}{t_py:>11.4f}{t_c:>11.4f}{t_py / t_c:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
