"""Learning curves on the survey MDP for several step sizes (one CSV per step size)."""
import argparse
import csv
from pathlib import Path

from riskutil import TractorConfig, builtin_utility, discretize_utility, learn, lift_policy, plan, zoo
from riskutil.caty import EXACT
from riskutil.returns import sample_demos


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", default="1,10,100,1000")
    ap.add_argument("--expert", default="sqrt", help="utility the synthetic expert optimizes")
    ap.add_argument("--T", type=int, default=70)
    ap.add_argument("--K", type=int, default=10_000)
    ap.add_argument("--n-demos", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="results/alpha_sweep")
    args = ap.parse_args()

    e = zoo("survey")
    grid = e.grid
    _, psi, _ = plan(discretize_utility(builtin_utility(args.expert, 5), grid), e.mdp, grid)
    demos = sample_demos(e.mdp, lift_policy(psi, e.mdp), args.n_demos, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for alpha in (float(a) for a in args.alphas.split(",")):
        cfg = TractorConfig(T=args.T, K=args.K, alpha=alpha, epsilon0=grid.epsilon0, seed=args.seed)
        rec = learn([demos], [e.mdp], [EXACT], cfg)
        with open(out / f"curve_alpha{alpha:g}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "grad_norm", "sum_compat"])
            for t in range(cfg.T):
                w.writerow([t, f"{rec.grad_norms[t]:.17g}", f"{rec.compat[t]:.17g}"])
        print(f"alpha={alpha:g}: compat {rec.compat[0]:.4f} -> {rec.compat[-1]:.4f}, averaged {rec.final_compat:.4f}")


if __name__ == "__main__":
    main()
