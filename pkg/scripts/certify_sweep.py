"""Regret certificates over a grid of quadtree depths and seeds.

Prints one line per (levels, seed) with the smallest certificate margin and
exits non-zero if any certificate fails.
"""
import argparse
import sys

import numpy as np

from hpforecast.ftal import ball, ftal_gamma
from hpforecast.hpf import HpfModel, LearnerConfig, run_stream
from hpforecast.oracle import best_cpf, check_lhpf_bound, measure_regularity
from hpforecast.partition import build_quadtree
from hpforecast.streams import piecewise_quadrant_stream


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", default=[2, 3])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--rounds", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--noise", type=float, default=0.05)
    args = ap.parse_args(argv)

    w_set = ball(np.zeros(args.dim), 1.0)
    failed = 0
    print("levels,seed,partitions,lhpf_loss,best_cpf_loss,min_margin,satisfied")
    for levels in args.levels:
        h = build_quadtree(64, 64, levels)
        for seed in range(args.seeds):
            stream, _ = piecewise_quadrant_stream(h, args.rounds, args.dim, seed, args.noise)
            reg = measure_regularity(stream, w_set)
            lc = LearnerConfig(args.dim, w_set, ftal_gamma(reg.eta, reg.G, reg.D), reg.eta, reg.G)
            log = run_stream(HpfModel(h, lc), stream)
            _, best, table = best_cpf(h, stream, w_set)
            certs = check_lhpf_bound(log, h, stream, w_set, reg.eta, reg.G, table=table)
            ok = all(c.satisfied for c in certs)
            failed += not ok
            print(f"{levels},{seed},{len(certs)},{log.total_loss!r},{best!r},"
                  f"{min(c.margin for c in certs)!r},{int(ok)}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
