"""Command-line front end.

Each subcommand parses its inputs, makes one library call, and prints the
result (CSV or JSON) on stdout.  Exit codes: 0 success, 1 infeasible risk
limit or infeasible regret target, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import FairfolioError, InfeasibleRiskError
from .experiments import (
    ExperimentConfig,
    MixtureSpec,
    PAPER_MIXTURE,
    rows_to_csv,
    run_generalization_experiment,
    run_perf_experiment,
    sample_bound_fairness,
    sample_bound_no_fairness,
    summarize,
    write_outputs,
)
from .fair_exante import exante_group_regrets, run_dynamics, sparsify
from .fair_expost import interval_decision, interval_minmax, minmax_tuple_dp
from .frontier import ReturnCurve, build_curve
from .market_io import add_cash_asset, estimate_universe, read_return_csv
from .oracles import check_separation, exhaustive_min_regret, exhaustive_minmax_det, game_value_grid
from .planners import dp_min_regret, dp_two_sided, greedy_products
from .regret import group_regrets, population_regret, read_population_csv

SEED_ENV = "FAIRFOLIO_SEED"


class Infeasible(Exception):
    def __init__(self, payload):
        super().__init__(payload.get("error", "infeasible"))
        self.payload = payload


# ---------------------------------------------------------------------------
# argument types


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _int(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    return int(v)


def _floats(text):
    return [_float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [_int(x) for x in text.split(",") if x.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--config", help="flat key=value file supplying any flag")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--manifest", help="write a run manifest (JSON) to this path before any output")
    p.add_argument("--output", "-o", help="write the primary result here instead of stdout")


def _pop_args(p, with_p=True):
    p.add_argument("--pop", required=True, help="population CSV: tau,group[,return]")
    p.add_argument("--returns", help="daily returns CSV used to price thresholds without a return column")
    p.add_argument("--curve", help="curve CSV (tau,return,...) used to price thresholds")
    p.add_argument("--cash", action="store_true", help="add a cash asset to the returns universe")
    p.add_argument("--B", type=_float, default=None, help="bound on bespoke returns")
    if with_p:
        p.add_argument("--p", type=_int, required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="fairfolio", description="Regret-minimizing and fair product design.")
    parser.add_argument("--version", action="version", version=f"fairfolio {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("frontier", help="bespoke return curve at given thresholds")
    _common(p)
    p.add_argument("--returns", required=True)
    p.add_argument("--taus", type=_floats, required=True)
    p.add_argument("--long-only", dest="long_only", action="store_true", default=True)
    p.add_argument("--allow-short", dest="long_only", action="store_false")
    p.add_argument("--cash", action="store_true")
    p.add_argument("--annualization", type=_int, default=252)
    subs[("frontier",)] = p

    for name, helptext in (("plan-dp", "exact population regret DP"), ("plan-greedy", "greedy products")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _pop_args(p)
        subs[(name,)] = p

    p = sub.add_parser("plan-two-sided", help="two-sided regret DP")
    _common(p)
    _pop_args(p)
    p.add_argument("--alpha", type=_float, default=math.inf)
    subs[("plan-two-sided",)] = p

    p = sub.add_parser("fair-exante", help="no-regret dynamics for ex-ante fairness")
    _common(p)
    _pop_args(p)
    p.add_argument("--T", type=_int, default=500)
    p.add_argument("--step-multiplier", type=_float, default=1.0)
    p.add_argument("--slack", type=_int, default=None, help="sparsify the support union to p+slack products")
    p.add_argument("--trace", help="write the per-round trace CSV here")
    subs[("fair-exante",)] = p

    p = sub.add_parser("fair-expost", help="rounded regret-tuple DP for few groups")
    _common(p)
    _pop_args(p)
    p.add_argument("--epsilon", type=_float, default=0.01)
    p.add_argument("--force", action="store_true")
    subs[("fair-expost",)] = p

    p = sub.add_parser("fair-interval", help="interval-group minmax by binary search")
    _common(p)
    _pop_args(p)
    p.add_argument("--epsilon", type=_float, default=1e-6)
    p.add_argument("--kappa", type=_float, default=None, help="answer the decision question for this target")
    subs[("fair-interval",)] = p

    p = sub.add_parser("oracle", help="brute-force references")
    osub = p.add_subparsers(dest="mode", required=True)
    for mode in ("min-regret", "minmax", "game-value"):
        q = osub.add_parser(mode)
        _common(q)
        _pop_args(q)
        if mode == "game-value":
            q.add_argument("--grid-step", type=_float, default=1e-3)
        subs[("oracle", mode)] = q
    q = osub.add_parser("check-separation")
    _common(q)
    q.add_argument("--g", type=_int, required=True)
    q.add_argument("--p", type=_int, required=True)
    q.add_argument("--grid-step", type=_float, default=1e-3)
    subs[("oracle", "check-separation")] = q

    p = sub.add_parser("bounds", help="sample-size bounds")
    _common(p)
    p.add_argument("--B", type=_float, default=1.0)
    p.add_argument("--epsilon", type=_float, required=True)
    p.add_argument("--delta", type=_float, required=True)
    p.add_argument("--g", type=_int, default=None)
    p.add_argument("--pi-min", type=_float, default=None)
    subs[("bounds",)] = p

    p = sub.add_parser("experiment", help="desk-scale experiments")
    esub = p.add_subparsers(dest="mode", required=True)
    defaults = ExperimentConfig()
    for mode in ("perf", "generalization"):
        q = esub.add_parser(mode)
        _common(q)
        q.add_argument("--seed", type=_int, default=defaults.seed)
        q.add_argument("--n-consumers", type=_int, default=defaults.n_consumers)
        q.add_argument("--p", type=_int, default=defaults.p)
        q.add_argument("--slack", type=_int, default=defaults.slack)
        q.add_argument("--T", type=_int, default=defaults.T)
        q.add_argument("--trials", type=_int, default=defaults.trials)
        q.add_argument("--test-size", type=_int, default=defaults.test_size)
        q.add_argument("--train-sizes", type=_ints, default=list(defaults.train_sizes))
        q.add_argument("--universe", default=defaults.universe)
        q.add_argument("--n-assets", type=_int, default=defaults.n_assets)
        q.add_argument("--means", type=_floats, default=list(PAPER_MIXTURE.means))
        q.add_argument("--stddevs", type=_floats, default=list(PAPER_MIXTURE.stddevs))
        q.add_argument("--weights", type=_floats, default=list(PAPER_MIXTURE.weights))
        q.add_argument("--step-multiplier", type=_float, default=defaults.step_multiplier)
        q.add_argument("--bound", choices=("tight", "loose"), default=defaults.bound)
        q.add_argument("--exhaustive", action="store_true")
        q.add_argument("--curve-points", type=_int, default=defaults.curve_points)
        q.add_argument("--jobs", type=_int, default=1)
        q.add_argument("--out", default=None, help="directory for the CSV table and JSON sidecar")
        subs[("experiment", mode)] = q
    return parser, subs


# ---------------------------------------------------------------------------
# config file handling


def read_config(path):
    cfg = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FairfolioError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            cfg[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return cfg


def _explicit(argv, action):
    for opt in action.option_strings:
        for tok in argv:
            if tok == opt or tok.startswith(opt + "="):
                return True
    return False


def _config_path(argv):
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _subcommand(argv, subs):
    words = [t for t in argv if not t.startswith("-")]
    for key in subs:
        if tuple(words[: len(key)]) == key:
            return key
    return None


def expand_config(argv, subs):
    """Append config-file entries as flags, skipping any given on the command line.

    Options parsed after the subcommand words belong to the innermost parser,
    so appending keeps command-line values in charge.
    """
    path = _config_path(argv)
    key = _subcommand(argv, subs)
    if path is None or key is None:
        return argv
    cfg = read_config(path)
    actions = {a.dest: a for a in subs[key]._actions if a.option_strings}
    extra = []
    for name, raw in cfg.items():
        action = actions.get(name)
        if action is None or name in ("config", "help"):
            raise FairfolioError(f"unknown config key {name!r}")
        if _explicit(argv, action):
            continue
        opt = action.option_strings[-1]
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            want = _bool(raw)
            if want == isinstance(action, argparse._StoreTrueAction):
                extra.append(opt)
        else:
            extra.append(f"{opt}={raw}")
    return argv + extra


# ---------------------------------------------------------------------------
# helpers


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _inputs(args):
    paths = {}
    for key in ("pop", "returns", "curve", "config"):
        path = getattr(args, key, None)
        if path:
            paths[path] = _sha256(path)
    universe = getattr(args, "universe", None)
    if universe and universe != "synthetic":
        paths[universe] = _sha256(universe)
    return paths


def _outputs(args):
    out = [args.output or "-"]
    if getattr(args, "trace", None):
        out.append(args.trace)
    if getattr(args, "out", None):
        stem = os.path.join(args.out, f"{args.mode}_seed{args.seed}")
        out += [stem + ".csv", stem + ".json"]
    return out


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def write_manifest(path, args, key):
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("manifest",)}
    manifest = {
        "subcommand": " ".join(key),
        "parameters": params,
        "inputs": _inputs(args),
        "outputs": _outputs(args),
        "version": __version__,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _universe(path, cash, annualization=252):
    uni = estimate_universe(read_return_csv(path), annualization)
    if cash and not uni.has_cash:
        uni = add_cash_asset(uni)
    return uni


def _load_pop(args):
    with open(args.pop, encoding="utf-8") as fh:
        text = fh.read()
    curve = None
    if args.curve:
        with open(args.curve, encoding="utf-8") as fh:
            curve = ReturnCurve.from_csv(fh.read())
    elif args.returns:
        uni = _universe(args.returns, args.cash)

        def curve(taus):  # exact bespoke returns at the population's thresholds
            built = build_curve(uni, np.unique(taus))
            return np.interp(taus, built.taus, built.returns)

    pop, grouping, names = read_population_csv(text, curve, args.B)
    return pop, grouping, names, curve


def _products_json(products):
    return {"products": list(products.risks), "returns": list(products.returns)}


def _products_csv(products):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["risk", "return"])
    for c, r in zip(products.risks, products.returns):
        w.writerow([repr(c), repr(r)])
    return buf.getvalue()


def _kv_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in result.items():
        w.writerow([k, json.dumps(_jsonable(v))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands; each returns (json_result, csv_text_or_None)


def cmd_frontier(args):
    uni = _universe(args.returns, args.cash, args.annualization)
    curve = build_curve(uni, sorted(args.taus), args.long_only)
    result = {
        "taus": curve.taus.tolist(),
        "returns": curve.returns.tolist(),
        "weights": curve.weights.tolist(),
        "assets": list(curve.names),
    }
    return result, curve.to_csv(), "csv"


def _plan_result(pop, grouping, products, value, **extra):
    out = _products_json(products)
    out["value"] = value
    out["population_regret"] = population_regret(pop, products)
    out["group_regrets"] = group_regrets(pop, grouping, products).tolist()
    out.update(extra)
    return out


def cmd_plan(args):
    pop, grouping, _, _ = _load_pop(args)
    fn = dp_min_regret if args.command == "plan-dp" else greedy_products
    plan = fn(pop, None, args.p)
    method = "dp" if args.command == "plan-dp" else "greedy"
    result = _plan_result(pop, grouping, plan.products, plan.value, method=method)
    return result, _products_csv(plan.products), "json"


def cmd_two_sided(args):
    pop, grouping, _, curve = _load_pop(args)
    drv = curve.derivative if isinstance(curve, ReturnCurve) else None
    plan = dp_two_sided(pop, None, args.p, args.alpha, drv, curve if isinstance(curve, ReturnCurve) else None)
    out = _products_json(plan.products)
    out.update(value=plan.value, method="two_sided", exact=plan.exact, alpha=args.alpha)
    return out, _products_csv(plan.products), "json"


def cmd_exante(args):
    pop, grouping, _, _ = _load_pop(args)
    dist, trace = run_dynamics(pop, grouping, args.p, args.T, args.B, args.step_multiplier)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            fh.write(trace.to_csv())
    out = json.loads(dist.to_json())
    out["expected_group_regrets"] = exante_group_regrets(dist, pop, grouping).tolist()
    union = dist.union()
    out["union"] = _products_json(union)
    out["union_group_regrets"] = group_regrets(pop, grouping, union).tolist()
    table = union
    if args.slack is not None:
        sparse, noop = sparsify(union, args.p + args.slack)
        out["sparse"] = _products_json(sparse)
        out["sparse_noop"] = noop
        out["sparse_group_regrets"] = group_regrets(pop, grouping, sparse).tolist()
        table = sparse
    return out, _products_csv(table), "json"


def _expost_json(res):
    out = json.loads(res.to_json())
    out["group_regrets"] = res.regrets.tolist()
    return out


def cmd_expost(args):
    pop, grouping, _, _ = _load_pop(args)
    res = minmax_tuple_dp(pop, grouping, args.p, args.epsilon, args.B, args.force)
    return _expost_json(res), _products_csv(res.products), "json"


def cmd_interval(args):
    pop, grouping, _, _ = _load_pop(args)
    if args.kappa is not None:
        dec = interval_decision(pop, grouping, args.p, args.kappa)
        if not dec.feasible:
            raise Infeasible({"error": "infeasible", "kappa": args.kappa, "p": args.p})
        out = _products_json(dec.products)
        out.update(feasible=True, kappa=args.kappa)
        return out, _products_csv(dec.products), "json"
    res = interval_minmax(pop, grouping, args.p, args.epsilon, args.B)
    return _expost_json(res), _products_csv(res.products), "json"


def cmd_oracle(args):
    if args.mode == "check-separation":
        res = check_separation(args.g, args.p, args.grid_step)
        res["det_matches"] = abs(res["det"] - res["det_expected"]) <= 1e-12
        if "rand" in res:
            res["rand_within_bound"] = res["rand"] <= res["rand_bound"] + res["slack"]
        return res, _kv_csv(res), "json"
    pop, grouping, _, _ = _load_pop(args)
    if args.mode == "min-regret":
        rep = exhaustive_min_regret(pop, None, args.p)
    elif args.mode == "minmax":
        rep = exhaustive_minmax_det(pop, grouping, args.p)
    else:
        rep = game_value_grid(pop, grouping, args.p, args.grid_step)
    res = json.loads(rep.to_json())
    return res, _kv_csv(res), "json"


def cmd_bounds(args):
    res = {"no_fairness": sample_bound_no_fairness(args.B, args.epsilon, args.delta)}
    if args.g is not None or args.pi_min is not None:
        g = args.g if args.g is not None else 1
        pi_min = args.pi_min if args.pi_min is not None else 1.0 / g
        res["fairness"] = sample_bound_fairness(args.B, args.epsilon, args.delta, g, pi_min)
    return res, _kv_csv(res), "json"


def cmd_experiment(args):
    seed = args.seed
    config = ExperimentConfig(
        seed=seed,
        n_consumers=args.n_consumers,
        p=args.p,
        slack=args.slack,
        T=args.T,
        trials=args.trials,
        test_size=args.test_size,
        train_sizes=tuple(args.train_sizes),
        universe=args.universe,
        n_assets=args.n_assets,
        mixture=MixtureSpec(tuple(args.means), tuple(args.stddevs), tuple(args.weights)),
        step_multiplier=args.step_multiplier,
        bound=args.bound,
        exhaustive=args.exhaustive,
        curve_points=args.curve_points,
        jobs=args.jobs,
    )
    if args.mode == "perf":
        rows, meta = run_perf_experiment(config)
        summary = summarize(rows)
    else:
        rows, meta = run_generalization_experiment(config)
        summary = summarize(
            rows,
            by=("n",),
            columns=("population_regret", "max_group_regret", "test_population_regret", "test_max_group_regret"),
        )
    if args.out:
        write_outputs(rows, meta, args.out, args.mode, seed)
    return {"metadata": meta, "summary": summary}, rows_to_csv(rows), "json"


COMMANDS = {
    "frontier": cmd_frontier,
    "plan-dp": cmd_plan,
    "plan-greedy": cmd_plan,
    "plan-two-sided": cmd_two_sided,
    "fair-exante": cmd_exante,
    "fair-expost": cmd_expost,
    "fair-interval": cmd_interval,
    "oracle": cmd_oracle,
    "bounds": cmd_bounds,
    "experiment": cmd_experiment,
}


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _error(payload):
    sys.stderr.write(json.dumps(payload) + "\n")


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        full = expand_config(argv, subs)
    except (FairfolioError, OSError, argparse.ArgumentTypeError) as exc:
        _error({"error": type(exc).__name__, "message": str(exc)})
        return 2
    try:
        args = parser.parse_args(full)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    key = (args.command, args.mode) if hasattr(args, "mode") else (args.command,)
    try:
        seed_on_cli = any(t == "--seed" or t.startswith("--seed=") for t in argv)
        if args.command == "experiment" and SEED_ENV in os.environ and not seed_on_cli:
            args.seed = _int(os.environ[SEED_ENV])
        if args.manifest:
            write_manifest(args.manifest, args, key)
        result, table, default_fmt = COMMANDS[args.command](args)
    except InfeasibleRiskError as exc:
        _error({"error": "infeasible_risk", "tau": exc.tau, "min_risk": exc.min_risk, "message": str(exc)})
        return 1
    except Infeasible as exc:
        _error(exc.payload)
        return 1
    except (FairfolioError, OSError, ValueError, argparse.ArgumentTypeError) as exc:
        _error({"error": type(exc).__name__, "message": str(exc)})
        sys.stderr.write(parser.format_usage())
        return 2
    fmt = args.format or default_fmt
    if fmt == "csv" and table is not None:
        _emit(table, args.output)
    else:
        _emit(json.dumps(_jsonable_tree(result), indent=2) + "\n", args.output)
    return 0


def _jsonable_tree(obj):
    if isinstance(obj, dict):
        return {k: _jsonable_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable_tree(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
