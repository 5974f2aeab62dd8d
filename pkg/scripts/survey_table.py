"""Relative compatibility (percent) of candidate utilities with synthetic survey experts."""
import argparse

from riskutil import builtin_utility, classify, discretize_utility, plan, zoo
from riskutil.caty import EXACT, percent_table
from riskutil.returns import sample_demos
from riskutil.zoo import noisy_expert

# standard-gamble style anchors (euros, utility in [0, 1]) for a cautious respondent
SG_ANCHORS = [(100, 0.2), (500, 0.6), (1000, 0.75), (2500, 0.9)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--experts", default="linear,sqrt,square")
    ap.add_argument("--noise", type=float, default=0.0)
    ap.add_argument("--n-demos", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    e = zoo("survey")
    grid = e.grid
    candidates = {name: builtin_utility(name, 5) for name in ("linear", "sqrt", "square", "s_shaped")}
    candidates["sg"] = builtin_utility("sg", 5, anchors=SG_ANCHORS)
    demo_sets, env_ids = [], []
    for k, name in enumerate(args.experts.split(",")):
        _, psi, _ = plan(discretize_utility(builtin_utility(name, 5), grid), e.mdp, grid)
        demo_sets.append(sample_demos(e.mdp, noisy_expert(psi, e.mdp, args.noise), args.n_demos, args.seed + k))
        env_ids.append(f"E[{name}]")
    # each synthetic expert is scored separately: one single-environment classification per expert
    per_expert = [classify(list(candidates.values()), [D], [e.mdp], [EXACT], 0.0, grid,
                           list(candidates), [eid]) for D, eid in zip(demo_sets, env_ids)]
    merged = per_expert[0]
    for reports in per_expert[1:]:
        for base, extra in zip(merged, reports):
            base.per_env += extra.per_env
            base.env_ids += extra.env_ids
    print(percent_table(merged))


if __name__ == "__main__":
    main()
