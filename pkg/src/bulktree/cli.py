"""Command-line front end.

Subcommands: gen, solve, eval, regularize, gmm, brute, bench, pipes.
Artifacts are schema-versioned JSON (or TSV for tables) written to declared
output paths; logs go to stderr as key=value lines.  Randomized commands
require an explicit seed (no wall-clock seeding) and every randomized
artifact embeds the seed and a hash of the effective configuration, so runs
can be replayed exactly.  Exit codes: 0 success, 2 validation/parse error,
3 numeric or internal failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction

from . import exact as exact_mod
from .aggregation import RoutedTree, TreeDistribution, distribution_cost, route_demands
from .framework import SolveConfig, solve_oblivious
from .gmm import GmmTrace, gmm_tree
from .instance import (
    Instance,
    ParseError,
    ValidationError,
    demand_profile,
    generate_instance,
    load_instance,
    save_instance,
)
from .pipes import AlphaVector, alpha_to_pipes
from .regularize import RegularizationInternalError, regularize
from .simplex import LPError
from .subroutines import rob_lower_bounds, _mix_seed

SCHEMA = "bulktree/v1"


def _log(**kv) -> None:
    print(" ".join(f"{k}={v}" for k, v in kv.items()), file=sys.stderr)


def _error_json(exc: Exception, code: int) -> int:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _effective_config(args, keys) -> dict:
    """Merge precedence: flags > config file > defaults."""
    defaults = {
        "gamma": 0.25,
        "beta_init": 2.0,
        "beta_steps": 6,
        "bit_budget": 64,
        "node_cap": 8,
    }
    merged = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            merged.update(json.load(fh))
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return {k: merged[k] for k in sorted(merged)}


def _alpha_from_obj(obj) -> AlphaVector:
    if not isinstance(obj, dict) or "alpha" not in obj or "D" not in obj:
        raise ParseError("alpha JSON needs fields 'alpha' and 'D'")
    src = obj.get("alpha_exact", obj["alpha"])
    alpha = {}
    for k, v in src.items():
        if isinstance(v, list):
            alpha[int(k)] = Fraction(int(v[0]), int(v[1]))
        else:
            alpha[int(k)] = Fraction(float(v))
    return AlphaVector(alpha=alpha, D=int(obj["D"]))


def _alpha_to_obj(a: AlphaVector) -> dict:
    return {
        "schema": SCHEMA,
        "D": a.D,
        "alpha": {str(i): float(v) for i, v in a.alpha.items()},
        "alpha_exact": {str(i): [v.numerator, v.denominator] for i, v in a.alpha.items()},
    }


def _tree_to_obj(tree: RoutedTree) -> dict:
    return {
        "edges": [[u, v] for u, v in tree.sorted_edges()],
        "flow": {f"{u}|{v}": f for (u, v), f in sorted(tree.flow.items())},
    }


def _distribution_to_obj(dist: TreeDistribution, extra: dict) -> dict:
    return {
        "schema": SCHEMA,
        "theta": dist.theta,
        "trees": [
            {"weight": w, "edges": [[u, v] for u, v in t.sorted_edges()]}
            for t, w in dist.support
        ],
        **extra,
    }


def _distribution_from_obj(obj, inst: Instance) -> TreeDistribution:
    if "trees" not in obj:
        raise ParseError("distribution JSON needs field 'trees'")
    support = []
    for entry in obj["trees"]:
        tree = route_demands(inst, [tuple(e) for e in entry["edges"]])
        support.append((tree, float(entry["weight"])))
    return TreeDistribution(support=tuple(support), theta=float(obj.get("theta", 0.0)))


def cmd_gen(args) -> int:
    inst = generate_instance(args.model, args.n, args.demands, args.seed)
    gen_cfg = {"model": args.model, "n": args.n, "demands": args.demands, "seed": args.seed}
    save_instance(inst, args.out, meta={**gen_cfg, "config_hash": _config_hash(gen_cfg)})
    _log(cmd="gen", model=args.model, n=args.n, out=args.out)
    return 0


def cmd_solve(args) -> int:
    cfg = _effective_config(args, ["gamma", "beta_init", "beta_steps", "bit_budget", "node_cap"])
    inst = load_instance(args.instance)
    config = SolveConfig(
        seed=args.seed,
        gamma=cfg["gamma"],
        beta_init=cfg["beta_init"],
        beta_steps=cfg["beta_steps"],
        bit_budget=cfg["bit_budget"],
        node_cap=cfg["node_cap"],
    )
    t0 = time.monotonic()
    dist, report = solve_oblivious(inst, config)
    _log(cmd="solve", instance=args.instance, theta=f"{dist.theta:.6g}",
         support=len(dist.support), seconds=f"{time.monotonic() - t0:.2f}")
    meta = {"seed": args.seed, "config_hash": _config_hash({**cfg, "seed": args.seed})}
    _write_json(args.out, _distribution_to_obj(dist, {
        **meta,
        "beta_final": report.beta_final,
        "diagnostics": {"levels": report.levels, "tilde": list(report.tilde)},
    }))
    if args.report:
        _write_json(args.report, {
            "schema": SCHEMA, **meta,
            "beta_final": report.beta_final, "theta": report.theta,
            "support_size": report.support_size, "levels": report.levels,
            "runs": report.runs, "exact": report.exact,
        })
    return 0


def cmd_eval(args) -> int:
    cfg = _effective_config(args, ["node_cap"])
    inst = load_instance(args.instance)
    with open(args.distribution) as fh:
        dist = _distribution_from_obj(json.load(fh), inst)
    profile = demand_profile(inst)
    bounds = rob_lower_bounds(inst, _mix_seed(args.seed, 0xAB))
    rows = []
    for i, tilde_i, _ in bounds:
        expected = distribution_cost(dist, i, inst.lengths)
        rows.append({
            "i": i,
            "expected_cost": expected,
            "lower_bound": tilde_i,
            "ratio": expected / tilde_i if tilde_i > 0 else None,
        })
    out = {
        "schema": SCHEMA,
        "seed": args.seed,
        "config_hash": _config_hash({**cfg, "seed": args.seed}),
        "levels": rows,
        "max_ratio_vs_bound": max(r["ratio"] for r in rows if r["ratio"] is not None),
    }
    if args.exact:
        if len(inst.nodes) > cfg["node_cap"]:
            raise exact_mod.NodeCapExceeded(
                f"exact mode refused: {len(inst.nodes)} nodes above cap {cfg['node_cap']}"
            )
        opt = exact_mod.exact_optima(inst, cfg["node_cap"])
        ratio, worst = exact_mod.exact_oblivious_ratio(inst, dist, cfg["node_cap"], optima=opt)
        for row in rows:
            row["exact_optimum"] = opt.value(row["i"])
        out["exact_oblivious_ratio"] = ratio
        out["worst_level"] = worst
    _write_json(args.out, out)
    _log(cmd="eval", instance=args.instance, out=args.out)
    return 0


def cmd_regularize(args) -> int:
    cfg = _effective_config(args, ["gamma"])
    with open(args.alpha) as fh:
        vec = _alpha_from_obj(json.load(fh))
    out_vec, report = regularize(vec, Fraction(cfg["gamma"]))
    _write_json(args.out, {
        "schema": SCHEMA,
        "gamma": cfg["gamma"],
        "input": _alpha_to_obj(vec),
        "output": _alpha_to_obj(out_vec),
        "report": {
            "total_f_lower_factor": float(report.total_f_lower_factor),
            "stages": [
                {
                    "stage": st.stage,
                    "distortion_bound": float(st.distortion_bound),
                    "pipes_removed": st.pipes_removed,
                    "rotations": len(st.rotations),
                }
                for st in report.stages
            ],
        },
    })
    _log(cmd="regularize", out=args.out)
    return 0


def cmd_gmm(args) -> int:
    cfg = _effective_config(args, ["gamma"])
    inst = load_instance(args.instance)
    with open(args.alpha) as fh:
        vec = _alpha_from_obj(json.load(fh))
    reg, _ = regularize(vec, Fraction(cfg["gamma"]))
    trace = GmmTrace()
    tree, costs = gmm_tree(inst, reg, cfg["gamma"], args.seed, trace=trace)
    _write_json(args.out, {
        "schema": SCHEMA,
        "seed": args.seed,
        "config_hash": _config_hash({"gamma": cfg["gamma"], "seed": args.seed}),
        "tree": _tree_to_obj(tree),
        "stage_costs": [
            {"stage": c.stage, "steiner_cost": c.steiner_cost, "facility_cost": c.facility_cost}
            for c in costs
        ],
        "fallback_stage": trace.fallback_stage,
    })
    _log(cmd="gmm", out=args.out)
    return 0


def cmd_brute(args) -> int:
    cfg = _effective_config(args, ["node_cap"])
    inst = load_instance(args.instance)
    opt = exact_mod.exact_optima(inst, cfg["node_cap"])
    theta_opt, _ = exact_mod.exact_lp_optimum(inst, cfg["node_cap"])
    obj = {
        "schema": SCHEMA,
        "levels": [
            {"i": i, "optimum": val, "edges": [[u, v] for u, v in tree.sorted_edges()]}
            for i, tree, val in opt.per_level
        ],
        "theta_opt": theta_opt,
    }
    _write_json(args.out, obj)
    if args.tsv:
        with open(args.tsv, "w") as fh:
            fh.write("i\toptimum\n")
            for i, _, val in opt.per_level:
                fh.write(f"{i}\t{val!r}\n")
            fh.write(f"theta_opt\t{theta_opt!r}\n")
    _log(cmd="brute", out=args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = _effective_config(args, ["gamma", "beta_init", "beta_steps", "bit_budget", "node_cap"])
    sizes = [int(s) for s in args.sizes.split(",") if s]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else []
    rows = []
    for n in sizes:
        for seed in seeds:
            inst = generate_instance(args.family, n, max(1, (n - 1) // 2), seed)
            instance_id = f"{args.family}-n{n}-s{seed}"
            t0 = time.monotonic()
            try:
                config = SolveConfig(
                    seed=seed, gamma=cfg["gamma"], beta_init=cfg["beta_init"],
                    beta_steps=cfg["beta_steps"], bit_budget=cfg["bit_budget"],
                    node_cap=cfg["node_cap"],
                )
                dist, report = solve_oblivious(inst, config)
                theta_opt = ""
                if len(inst.nodes) <= cfg["node_cap"]:
                    theta_opt = repr(exact_mod.exact_lp_optimum(inst, cfg["node_cap"])[0])
                rows.append(
                    (instance_id, repr(dist.theta), theta_opt, str(len(dist.support)),
                     str(inst.total_demand()))
                )
            except Exception as exc:  # per-row failure recorded, run continues
                rows.append((instance_id, "error", type(exc).__name__, "", ""))
            _log(cmd="bench", instance=instance_id, seconds=f"{time.monotonic() - t0:.2f}")
    with open(args.out, "w") as fh:
        fh.write("instance\ttheta\ttheta_opt\tsupport\ttotal_demand\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")
    return 0


def cmd_pipes(args) -> int:
    cfg = _effective_config(args, ["gamma"])
    with open(args.alpha) as fh:
        vec = _alpha_from_obj(json.load(fh))
    schedule = alpha_to_pipes(vec)
    gamma = Fraction(cfg["gamma"])
    print("k\tsigma\tdelta\tcapacity\tindifference\tsignificance")
    for k, pipe in enumerate(schedule.pipes):
        cap = None if pipe.rate == 0 else pipe.fixed / pipe.rate
        g = b = None
        undef_b = False
        if k + 1 < len(schedule.pipes):
            nxt = schedule.pipes[k + 1]
            g = (nxt.fixed - pipe.fixed) / (pipe.rate - nxt.rate)
            den = 2 * gamma * pipe.rate - nxt.rate
            if den > 0:
                b = (nxt.fixed - 2 * gamma * pipe.fixed) / den
            else:
                undef_b = True

        def fmt(x, undef=False):
            if undef:
                return "undef"
            return "inf" if x is None else f"{float(x):.9g}"

        print(
            f"{k}\t{float(pipe.fixed):.9g}\t{float(pipe.rate):.9g}"
            f"\t{fmt(cap)}\t{fmt(g)}\t{fmt(b, undef_b)}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bulktree", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_common(p, seed=True, config=True):
        if seed:
            p.add_argument("--seed", type=int, required=True, help="master seed (required; no wall-clock seeding)")
        if config:
            p.add_argument("--config", help="JSON config file; flags override its values")

    p = sub.add_parser("gen", help="generate an instance file")
    p.add_argument("model", choices=["random-geometric", "grid", "star", "path"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--demands", type=int, required=True)
    p.add_argument("--out", required=True)
    add_common(p, config=False)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="compute an oblivious tree distribution")
    p.add_argument("instance")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta-init", dest="beta_init", type=float)
    p.add_argument("--beta-steps", dest="beta_steps", type=int)
    p.add_argument("--bit-budget", dest="bit_budget", type=int)
    p.add_argument("--node-cap", dest="node_cap", type=int)
    add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="evaluate a distribution file against an instance")
    p.add_argument("instance")
    p.add_argument("distribution")
    p.add_argument("--out", required=True)
    p.add_argument("--exact", action="store_true", help="also compare against brute-force optima")
    p.add_argument("--node-cap", dest="node_cap", type=int)
    add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("regularize", help="regularize a weight vector JSON")
    p.add_argument("alpha")
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=float)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_regularize)

    p = sub.add_parser("gmm", help="run the staged tree construction once")
    p.add_argument("instance")
    p.add_argument("alpha")
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=float)
    add_common(p)
    p.set_defaults(func=cmd_gmm)

    p = sub.add_parser("brute", help="brute-force per-level optima and the LP optimum")
    p.add_argument("instance")
    p.add_argument("--out", required=True)
    p.add_argument("--tsv")
    p.add_argument("--node-cap", dest="node_cap", type=int)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_brute)

    p = sub.add_parser("bench", help="solve a family grid and emit a TSV summary")
    p.add_argument("family", choices=["random-geometric", "grid", "star", "path"])
    p.add_argument("--sizes", required=True, help="comma-separated node counts")
    p.add_argument("--seeds", required=True, help="comma-separated seeds (may be empty)")
    p.add_argument("--out", required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta-init", dest="beta_init", type=float)
    p.add_argument("--beta-steps", dest="beta_steps", type=int)
    p.add_argument("--bit-budget", dest="bit_budget", type=int)
    p.add_argument("--node-cap", dest="node_cap", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pipes", help="print a weight vector's pipe table as TSV")
    p.add_argument("alpha")
    p.add_argument("--gamma", type=float)
    add_common(p, seed=False)
    p.set_defaults(func=cmd_pipes)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, exact_mod.NodeCapExceeded, FileNotFoundError, ValueError) as exc:
        return _error_json(exc, 2)
    except (LPError, RegularizationInternalError, ArithmeticError, RuntimeError) as exc:
        return _error_json(exc, 3)


if __name__ == "__main__":
    sys.exit(main())
