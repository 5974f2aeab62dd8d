"""TRACTOR on random MDPs with a noisy S-shaped expert; writes the per-seed and averaged curves."""
import argparse
import csv
from pathlib import Path

import numpy as np

from riskutil import Grid, TractorConfig, builtin_utility, discretize_utility, learn, plan, random_mdp
from riskutil.caty import EXACT
from riskutil.returns import sample_demos
from riskutil.zoo import noisy_expert


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--S", type=int, default=20)
    ap.add_argument("--A", type=int, default=5)
    ap.add_argument("--H", type=int, default=5)
    ap.add_argument("--sparsity", type=int, default=3)
    ap.add_argument("--epsilon0", type=float, default=0.05)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--alpha", type=float, default=1.0)
    ap.add_argument("--T", type=int, default=70)
    ap.add_argument("--K", type=int, default=10_000)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--out", default="results/random_suite.csv")
    args = ap.parse_args()

    grid = Grid(args.epsilon0, args.H)
    expert_u = discretize_utility(builtin_utility("s_shaped", args.H), grid)
    curves = []
    for seed in range(args.seeds):
        mdp = random_mdp(args.S, args.A, args.H, args.sparsity, seed, epsilon0=args.epsilon0)
        _, psi, _ = plan(expert_u, mdp, grid)
        demos = sample_demos(mdp, noisy_expert(psi, mdp, args.noise), 10_000, 1000 + seed)
        cfg = TractorConfig(T=args.T, K=args.K, alpha=args.alpha, epsilon0=args.epsilon0, seed=seed)
        rec = learn([demos], [mdp], [EXACT], cfg)
        curves.append(rec.compat)
        print(f"seed {seed}: compat {rec.compat[0]:.4f} -> {rec.compat[-1]:.4f}, averaged {rec.final_compat:.4f}")
    curves = np.array(curves)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean"] + [f"seed{s}" for s in range(args.seeds)])
        for t in range(args.T):
            w.writerow([t, f"{curves[:, t].mean():.17g}"] + [f"{c:.17g}" for c in curves[:, t]])
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
