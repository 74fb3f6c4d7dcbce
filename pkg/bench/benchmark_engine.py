"""Time the pure and compiled engines on the same trajectories.

Runs a small matrix of process variants on both backends and reports
per-trial wall time and the speedup.  Seeds match across backends, so
both sides do the same logical work; the output also cross-checks the
final counts to make sure the comparison is honest.

Usage: python3 bench/benchmark_engine.py [--horizon N] [--trials T]
"""

import argparse
import statistics
import time

from ckplab.attachment import ParentCountLaw, preferential
from ckplab.engine import kernel_available, run_trial
from ckplab.evolution import Features, init_chain
from ckplab.state import CF

VARIANTS = {
    "bfs": dict(check_rate=0.3, check_depth=3, mechanism="bfs"),
    "stringy": dict(check_rate=0.3, check_depth=3, mechanism="stringy"),
    "complete": dict(check_rate=0.1, check_depth=2, mechanism="complete"),
}


def time_backend(feats, init, horizon, trials, backend):
    times = []
    finals = []
    for trial in range(trials):
        start = time.perf_counter()
        result = run_trial(feats, init, horizon, seed=1000 + trial,
                           backend=backend)
        times.append(time.perf_counter() - start)
        finals.append(result.final_counts)
    return statistics.median(times), finals


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=int, default=3000)
    parser.add_argument("--trials", type=int, default=5)
    args = parser.parse_args()

    if not kernel_available():
        raise SystemExit("compiled kernel is not built; nothing to compare")

    law = ParentCountLaw({1: 0.5, 2: 0.25, 3: 0.25})
    init = init_chain(25, 1, CF)
    print(f"horizon {args.horizon}, {args.trials} trials per cell, "
          "times are medians")
    print(f"{'variant':<12} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, kw in VARIANTS.items():
        feats = Features(attach=preferential(), parent_count=law,
                         error_rate=0.25, **kw)
        t_py, f_py = time_backend(feats, init, args.horizon, args.trials,
                                  "python")
        t_ck, f_ck = time_backend(feats, init, args.horizon, args.trials,
                                  "compiled")
        if f_py != f_ck:
            raise SystemExit(f"{name}: backends disagree on final counts")
        print(f"{name:<12} {t_py:>9.3f}s {t_ck:>9.3f}s {t_py / t_ck:>7.1f}x")


if __name__ == "__main__":
    main()
