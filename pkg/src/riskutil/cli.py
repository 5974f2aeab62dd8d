"""Command-line interface: plan, classify, learn, elicit, zoo."""
from __future__ import annotations

import argparse
import csv
import hashlib
import importlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from .caty import EXACT, classify, percent_table, report_rows
from .discretization import Grid
from .errors import InputError, RiskUtilError
from .estimation import explore
from .identifiability import elicit_utility, planner_oracle
from .mdp import Mdp
from .planner import plan
from .returns import DemoDataset, sample_demos
from .tractor import TractorConfig, learn
from .utility import Utility, builtin_utility, discretize_utility, project_polytope
from .zoo import REGISTRY, noisy_expert, zoo

BUILTINS = ("linear", "sqrt", "square", "s_shaped")


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else format(x, ".17g")
    return str(x)


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _digest(path: str) -> str | None:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return None


def _load_env(source: str) -> Mdp:
    if source.startswith("zoo:"):
        return zoo(source[4:]).mdp
    data = _read_json(source)
    try:
        return Mdp.from_json(data)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from exc


def _load_utility(source: str, H: float) -> Utility:
    if source in BUILTINS:
        return builtin_utility(source, H)
    data = _read_json(source)
    try:
        return Utility.from_json(data)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from exc


def _load_demos(source: str, env_id: int) -> DemoDataset:
    data = _read_json(source)
    try:
        return DemoDataset.from_json(data, env_id)
    except InputError as exc:
        raise InputError(f"{source}: {exc}") from exc


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _manifest(args, command: str, inputs, outputs, started: float, config: dict):
    target = getattr(args, "manifest", None)
    if target is None and outputs:
        target = str(outputs[0]) + ".manifest.json"
    if target is None:
        return
    _write_json(Path(target), {
        "command": command,
        "argv": list(getattr(args, "argv", [])),
        "config": config,
        "seed": config.get("seed"),
        "inputs": {p: _digest(p) for p in inputs if not p.startswith("zoo:")},
        "outputs": [str(p) for p in outputs],
        "wall_clock_seconds": round(time.time() - started, 3),
    })


def _models(envs, args):
    if args.tau is None:
        return [EXACT] * len(envs)
    return [explore(env, args.tau, [args.seed, i]) for i, env in enumerate(envs)]


def cmd_plan(args) -> int:
    started = time.time()
    env = _load_env(args.env)
    u = _load_utility(args.utility, env.H)
    grid = Grid(args.epsilon0, env.H)
    J, psi, _ = plan(discretize_utility(u, grid), env, grid)
    print(_fmt(J))
    outputs = []
    if args.out:
        _write_json(Path(args.out), psi.to_json())
        outputs.append(args.out)
    _manifest(args, "plan", [args.env, args.utility], outputs, started, {"epsilon0": args.epsilon0})
    return 0


def _paired(args):
    if len(args.env) != len(args.demos):
        raise InputError("give one --demos file per --env")
    envs = [_load_env(e) for e in args.env]
    demos = [_load_demos(d, i) for i, d in enumerate(args.demos)]
    return envs, demos


def cmd_classify(args) -> int:
    started = time.time()
    envs, demos = _paired(args)
    H = envs[0].H
    utilities = [_load_utility(u, H) for u in args.utility]
    grids = [Grid(args.epsilon0, env.H) for env in envs]
    reports = classify(utilities, demos, envs, _models(envs, args), args.delta, grids,
                       utility_ids=list(args.utility), env_ids=list(args.env))
    rows = report_rows(reports)
    header = ["utility_id", "env_id", "J_E", "J_star", "C", "C_rel"]
    if args.out:
        _write_csv(Path(args.out), header, rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    for rep in reports:
        print(f"# {rep.utility_id}: total={_fmt(rep.total)} accepted={rep.accepted}", file=sys.stderr)
    if args.percent:
        print(percent_table(reports), file=sys.stderr)
    config = {"delta": args.delta, "epsilon0": args.epsilon0, "tau": args.tau, "seed": args.seed}
    _manifest(args, "classify", args.env + args.demos + args.utility, [args.out] if args.out else [], started, config)
    return 0


def _alpha(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def cmd_learn(args) -> int:
    started = time.time()
    envs, demos = _paired(args)
    H = envs[0].H
    grid = Grid(args.epsilon0, H)
    u0 = discretize_utility(_load_utility(args.init, H), grid)
    if args.project_init:
        u0 = project_polytope(u0.values, grid, args.L)
    out_dir = Path(args.out_dir)
    models = _models(envs, args)
    outputs = []
    alphas = args.alpha or [100.0]
    for alpha in alphas:
        cfg = TractorConfig(T=args.T, K=args.K, alpha=alpha, epsilon0=args.epsilon0, L=args.L,
                            seed=args.seed, U0=u0, exact_gradient=args.exact_gradient)
        rec = learn(demos, envs, models, cfg)
        tag = "" if len(alphas) == 1 else f"_alpha{alpha}"
        curve = out_dir / f"curve{tag}.csv"
        rows = [(t, float(rec.grad_norms[t]), float(rec.compat[t])) for t in range(cfg.T)]
        rows.append(("final", math.nan, rec.final_compat))
        _write_csv(curve, ["t", "grad_norm", "sum_compat"], rows)
        ufile = out_dir / f"utility{tag}.json"
        _write_json(ufile, rec.final.to_utility().to_json())
        outputs += [curve, ufile]
        print(f"alpha={_fmt(rec.alpha)} final sum_compat={_fmt(rec.final_compat)}")
    config = {"T": args.T, "K": args.K, "alpha": alphas, "epsilon0": args.epsilon0, "L": args.L,
              "init": args.init, "seed": args.seed, "tau": args.tau, "exact_gradient": args.exact_gradient}
    _manifest(args, "learn", args.env + args.demos, outputs, started, config)
    return 0


def _load_oracle(source: str):
    """External agent given as module:function, called with a gadget Mdp and returning optimal actions."""
    module, _, name = source.partition(":")
    try:
        fn = getattr(importlib.import_module(module), name)
    except (ImportError, AttributeError, ValueError) as exc:
        raise InputError(f"cannot load oracle {source!r}: {exc}") from exc
    return fn


def cmd_elicit(args) -> int:
    started = time.time()
    H = args.H
    oracle = _load_oracle(args.oracle) if args.oracle else planner_oracle(_load_utility(args.utility, H))
    if args.targets:
        targets = [float(x) for x in args.targets.split(",") if x.strip()]
    else:
        targets = list(np.arange(1, args.points + 1) * H / args.points)
    res = elicit_utility(oracle, targets, args.qtol, H)
    for g, u in res.anchors:
        print(f"{_fmt(g)},{_fmt(u)}")
    outputs = []
    if args.out:
        _write_json(Path(args.out), res.utility.to_json())
        outputs.append(args.out)
    inputs = [args.utility] if args.utility not in BUILTINS and not args.oracle else []
    _manifest(args, "elicit", inputs, outputs, started,
              {"H": H, "qtol": args.qtol, "targets": targets, "oracle": args.oracle or "planner"})
    return 0


def cmd_zoo(args) -> int:
    if args.list:
        for key, fn in REGISTRY.items():
            print(f"{key}: {(fn.__doc__ or '').split(chr(10))[0]}")
        return 0
    if args.check is not None:
        ids = args.check or list(REGISTRY)
        failed = 0
        for key in ids:
            entry = zoo(key)
            for quantity, want, got, ok in entry.check():
                failed += not ok
                print(f"{'PASS' if ok else 'FAIL'} {key}: {quantity} expected {want:.12g} got {got:.12g}")
        return 1 if failed else 0
    if args.export:
        entry = zoo(args.export)
        out = Path(args.out or f"{args.export}.json")
        _write_json(out, entry.mdp.to_json())
        outputs = [out]
        if args.demos_out:
            if args.expert_utility:
                grid = entry.grid
                u = _load_utility(args.expert_utility, entry.mdp.H)
                _, psi, _ = plan(discretize_utility(u, grid), entry.mdp, grid)
                expert = noisy_expert(psi, entry.mdp, args.noise)
            elif entry.expert is not None:
                expert = entry.expert
            else:
                raise InputError(f"{args.export} has no built-in expert; pass --expert-utility")
            demos = sample_demos(entry.mdp, expert, args.n_demos, args.seed)
            _write_json(Path(args.demos_out), demos.to_json())
            outputs.append(Path(args.demos_out))
        for p in outputs:
            print(p)
        return 0
    raise InputError("zoo needs one of --list, --check or --export")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="riskutil", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="optimal enlarged policy and value for a utility")
    p.add_argument("env", help="MDP JSON file or zoo:<id>")
    p.add_argument("utility", help="utility JSON file or a builtin name")
    p.add_argument("--epsilon0", type=float, default=0.1)
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_plan)

    def env_args(q):
        q.add_argument("--env", action="append", required=True)
        q.add_argument("--demos", action="append", required=True)
        q.add_argument("--epsilon0", type=float, default=0.1)
        q.add_argument("--seed", type=int, default=0)
        mode = q.add_mutually_exclusive_group()
        mode.add_argument("--exact", action="store_true", help="use the true transitions (default)")
        mode.add_argument("--tau", type=int, help="exploration budget per environment")
        q.add_argument("--manifest")

    c = sub.add_parser("classify", help="compatibility of candidate utilities")
    env_args(c)
    c.add_argument("--utility", action="append", required=True)
    c.add_argument("--delta", type=float, default=0.0)
    c.add_argument("--out")
    c.add_argument("--percent", action="store_true", help="also print relative compatibilities in percent")
    c.set_defaults(func=cmd_classify)

    lp = sub.add_parser("learn", help="projected gradient descent on utilities")
    env_args(lp)
    lp.add_argument("--T", type=int, default=70)
    lp.add_argument("--K", type=int, default=10_000)
    lp.add_argument("--alpha", type=_alpha, action="append",
                    help="step size, 'theory' or a preset (survey, random); repeat for a sweep")
    lp.add_argument("--L", type=float, default=10.0)
    lp.add_argument("--init", default="linear")
    lp.add_argument("--project-init", action="store_true")
    lp.add_argument("--exact-gradient", action="store_true")
    lp.add_argument("--out-dir", default=".")
    lp.set_defaults(func=cmd_learn)

    e = sub.add_parser("elicit", help="recover a simulated agent's utility through lottery gadgets")
    e.add_argument("--utility", default="sqrt", help="agent utility (builtin name or file)")
    e.add_argument("--oracle", help="external agent as module:function (overrides --utility)")
    e.add_argument("--H", type=int, default=5)
    e.add_argument("--targets", help="comma-separated returns in (0, H]")
    e.add_argument("--points", type=int, default=20, help="evenly spaced targets when --targets is absent")
    e.add_argument("--qtol", type=float, default=1e-4)
    e.add_argument("--out")
    e.add_argument("--manifest")
    e.set_defaults(func=cmd_elicit)

    z = sub.add_parser("zoo", help="built-in environments")
    g = z.add_mutually_exclusive_group(required=True)
    g.add_argument("--list", action="store_true")
    g.add_argument("--check", nargs="*")
    g.add_argument("--export")
    z.add_argument("--out")
    z.add_argument("--demos-out")
    z.add_argument("--expert-utility")
    z.add_argument("--noise", type=float, default=0.0)
    z.add_argument("--n-demos", type=int, default=1000)
    z.add_argument("--seed", type=int, default=0)
    z.set_defaults(func=cmd_zoo)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except RiskUtilError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
