"""Command-line front end.

Subcommands: allocate, axioms, gaussian, sweep, lambda-star, crra, ingest,
report. Exit codes: 0 success, 1 domain error (diagnostic on stderr),
2 usage error. Every command touching randomness takes --seed, defaulting to
the FRICSHARE_SEED environment variable. Machine formats (json/csv) carry
full float precision; human tables round to 4 significant digits.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import axioms as ax
from . import crra as crra_mod
from . import empirical as emp
from . import gaussian as ga
from .errors import FricshareError
from .mechanisms import allocate, frictional_costs, parse_rule_token, rule_token
from .space import load_market


def _default_seed() -> int:
    try:
        return int(os.environ.get("FRICSHARE_SEED", "0"))
    except ValueError:
        return 0


def _fmt(v: float) -> str:
    return f"{float(v):.4g}"


def _write_lines(lines, out: str | None):
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_pool(path: str) -> ga.GaussianPool:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    mu = doc["mu"]
    if "cov" in doc:
        return ga.GaussianPool(np.asarray(mu), np.asarray(doc["cov"]))
    sigma = np.asarray(doc["sigma"], dtype=float)
    rho = np.asarray(doc["rho"], dtype=float)
    return ga.GaussianPool.from_correlation(mu, sigma, rho)


# ---------------------------------------------------------------------------
# allocate
# ---------------------------------------------------------------------------


def _cmd_allocate(args) -> int:
    space, profile, part = load_market(args.space)
    rule = parse_rule_token(args.rule)
    alloc = allocate(rule, profile, part, space)
    costs = frictional_costs(profile, alloc)
    n, m = alloc.parts.shape
    header = [f"H_{i + 1}" for i in range(n)] + ["cost"]
    if args.format == "json":
        doc = {
            "rule": rule_token(rule),
            "info_blocks": [list(b) for b in alloc.info.blocks],
            "allocation": alloc.parts.tolist(),
            "global_cost": costs.global_cost.tolist(),
            "pairwise_cost": {
                f"{i + 1},{j + 1}": v.tolist() for (i, j), v in costs.pairwise.items()
            },
        }
        _write_lines([json.dumps(doc)], args.out)
        return 0
    rows = [
        [alloc.parts[i, w] for i in range(n)] + [costs.global_cost[w]]
        for w in range(m)
    ]
    if args.format == "csv":
        lines = [",".join(header)] + [
            ",".join(repr(float(v)) for v in row) for row in rows
        ]
    else:
        lines = ["  ".join(f"{h:>12}" for h in header)] + [
            "  ".join(f"{_fmt(v):>12}" for v in row) for row in rows
        ]
    _write_lines(lines, args.out)
    return 0


# ---------------------------------------------------------------------------
# axioms
# ---------------------------------------------------------------------------


def _cmd_axioms(args) -> int:
    rules = [parse_rule_token(tok) for tok in args.rules.split(",") if tok]
    axiom_list = (
        [a for a in args.axioms.split(",") if a]
        if args.axioms
        else ["Com", "UI", "IF", "AF", "RF", "ZP", "AA", "OA", "IA"]
    )
    cfg = ax.CheckConfig(
        trials=args.trials,
        seed=args.seed,
        space_size=args.space_size,
        n_agents=args.agents,
        tol=args.tol,
    )
    results = ax.comparison_matrix(rules, axiom_list, cfg)

    ce_paths: dict[tuple[str, str], str] = {}
    if args.counterexamples:
        os.makedirs(args.counterexamples, exist_ok=True)
        for (token, axiom), res in results.items():
            if res.counterexample is not None:
                safe = token.replace(":", "_").replace("/", "_")
                path = os.path.join(args.counterexamples, f"{safe}__{axiom}.json")
                with open(path, "w", encoding="utf-8") as fh:
                    json.dump(res.counterexample, fh)
                ce_paths[(token, axiom)] = path

    if args.report == "json":
        doc = [
            {
                "rule": token,
                "axiom": axiom,
                "cell": res.cell(),
                "trials_run": res.trials_run,
                "counterexample": res.counterexample,
                "counterexample_path": ce_paths.get((token, axiom)),
                "note": res.note,
            }
            for (token, axiom), res in results.items()
        ]
        _write_lines([json.dumps(doc)], args.out)
    elif args.report == "csv":
        lines = ["rule,axiom,cell,trials_run,counterexample_path"]
        for (token, axiom), res in results.items():
            lines.append(
                f"{token},{axiom},{res.cell()},{res.trials_run},"
                f"{ce_paths.get((token, axiom), '')}"
            )
        _write_lines(lines, args.out)
    else:
        _write_lines([ax.matrix_text(results, rules, axiom_list)], args.out)
    return 0


# ---------------------------------------------------------------------------
# gaussian / sweep / lambda-star
# ---------------------------------------------------------------------------


def _cmd_gaussian(args) -> int:
    pool = _load_pool(args.pool)
    form = ga.es_closed_form(pool, args.level)
    global_cost, per_agent = ga.gaussian_costs(pool, args.level)
    rep = ga.tradeoff(pool, args.level, args.theta)
    if args.format == "json":
        doc = {
            "level": args.level,
            "theta": args.theta,
            "intercept": form.intercept.tolist(),
            "slope": form.slope.tolist(),
            "penalty": form.penalty.tolist(),
            "expected_alloc": rep.expected_alloc.tolist(),
            "expected_cost": rep.expected_cost.tolist(),
            "benefit": rep.benefit.tolist(),
            "global_cost": global_cost,
        }
        _write_lines([json.dumps(doc)], args.out)
        return 0
    header = ["agent", "slope", "penalty", "E[H]", "E[cost]", "benefit"]
    lines = ["  ".join(f"{h:>12}" for h in header)]
    for i in range(pool.n_agents):
        row = [
            str(i),
            _fmt(form.slope[i]),
            _fmt(form.penalty[i]),
            _fmt(rep.expected_alloc[i]),
            _fmt(per_agent[i]),
            _fmt(rep.benefit[i]),
        ]
        lines.append("  ".join(f"{v:>12}" for v in row))
    lines.append(f"global cost: {_fmt(global_cost)}")
    _write_lines(lines, args.out)
    return 0


def _parse_grid(spec: str) -> list[float]:
    if ":" in spec:
        a, b, step = (float(v) for v in spec.split(":"))
        if step <= 0:
            raise FricshareError("grid step must be positive")
        out = []
        v = a
        while v <= b + 1e-12:
            out.append(round(v, 12))
            v += step
        return out
    return [float(v) for v in spec.split(",") if v]


def _cmd_sweep(args) -> int:
    if args.kind == "correlation":
        rows = ga.correlation_sweep(
            _parse_grid(args.grid), n=args.n, sigma=args.sigma,
            level=args.level, theta=args.theta,
        )
    else:
        n_values = [int(v) for v in _parse_grid(args.grid)]
        rows = ga.participants_sweep(
            n_values, scheme=args.scheme, rho=args.rho, decay=args.decay,
            sigma=args.sigma, level=args.level, theta=args.theta,
        )
    lines = ["param,global_cost,avg_T,avg_cost_per_agent"] + [
        f"{r.param!r},{r.global_cost!r},{r.avg_benefit!r},{r.avg_cost_per_agent!r}"
        for r in rows
    ]
    _write_lines(lines, args.out)
    return 0


def _cmd_lambda_star(args) -> int:
    pool = _load_pool(args.pool)
    agents = [args.agent] if args.agent is not None else list(range(pool.n_agents))
    lines = []
    for i in agents:
        thr = ga.participation_threshold(pool, args.theta, i)
        lines.append(f"{i},{'' if thr is None else repr(thr)}")
    _write_lines(["agent,threshold"] + lines, args.out)
    return 0


# ---------------------------------------------------------------------------
# crra / ingest / report
# ---------------------------------------------------------------------------


def _cmd_crra(args) -> int:
    rep = crra_mod.indifference_fee(
        args.dist, args.gamma, args.n, samples=args.samples, seed=args.seed
    )
    doc = {
        "fee_solo": rep.fee_solo,
        "fee_merged": rep.fee_merged,
        "merge_gap_stat": rep.merge_gap_stat,
        "merge_gap_se": rep.merge_gap_se,
        "merged_strictly_lower": rep.merged_strictly_lower,
        "n_samples": rep.n_samples,
    }
    if args.format == "json":
        _write_lines([json.dumps(doc)], args.out)
    else:
        _write_lines(
            [
                f"break-even fee (solo):   {_fmt(rep.fee_solo)}",
                f"break-even fee (merged): {_fmt(rep.fee_merged)}",
                f"merge gap: {_fmt(rep.merge_gap_stat)} "
                f"(se {_fmt(rep.merge_gap_se)}, "
                f"strictly lower: {rep.merged_strictly_lower})",
            ],
            args.out,
        )
    return 0


def _cmd_ingest(args) -> int:
    table = emp.ingest(args.csv)
    stats = emp.summarize(table)
    if args.stats_out:
        with open(args.stats_out, "w", encoding="utf-8") as fh:
            json.dump(emp.stats_to_json(stats), fh)
    lines = [
        f"entities: {', '.join(table.entities)}",
        f"periods:  {len(table.periods)}",
    ]
    if table.dropped:
        lines.append(f"dropped (missing periods): {', '.join(table.dropped)}")
    if stats.zero_variance:
        lines.append(f"zero variance: {', '.join(stats.zero_variance)}")
    for i, e in enumerate(table.entities):
        lines.append(
            f"{e}: mean {_fmt(stats.means[i])}, variance {_fmt(stats.variances[i])}"
        )
    _write_lines(lines, args.out)
    return 0


def _cmd_report(args) -> int:
    stats = emp.stats_from_json(args.stats)
    rep = emp.report(stats, args.level, args.theta)
    if args.format == "json":
        doc = {
            "entities": list(rep.entities),
            "expected_alloc": rep.expected_alloc.tolist(),
            "expected_cost": rep.expected_cost.tolist(),
            "benefit": rep.benefit.tolist(),
            "global_cost": rep.global_cost,
            "psd_projected": rep.psd_projected,
        }
        _write_lines([json.dumps(doc)], args.out)
        return 0
    if args.format == "csv":
        lines = ["entity,expected_alloc,expected_cost,benefit"]
        for i, e in enumerate(rep.entities):
            lines.append(
                f"{e},{float(rep.expected_alloc[i])!r},"
                f"{float(rep.expected_cost[i])!r},{float(rep.benefit[i])!r}"
            )
        lines.append(f"global,,{rep.global_cost!r},")
        _write_lines(lines, args.out)
        return 0
    header = ["entity", "E[H]", "E[cost]", "benefit"]
    lines = ["  ".join(f"{h:>14}" for h in header)]
    for i, e in enumerate(rep.entities):
        row = [
            e,
            _fmt(rep.expected_alloc[i]),
            _fmt(rep.expected_cost[i]),
            _fmt(rep.benefit[i]),
        ]
        lines.append("  ".join(f"{v:>14}" for v in row))
    lines.append(f"global cost: {_fmt(rep.global_cost)}")
    if rep.psd_projected:
        lines.append("note: correlation projected to nearest PSD")
    _write_lines(lines, args.out)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fricshare",
        description="allocation rules with frictional costs: evaluation, "
        "law checking, and Gaussian pool analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="evaluate a rule on a market file")
    p.add_argument("--space", required=True, help="market JSON (probs, agents[, partition])")
    p.add_argument("--rule", required=True, help="rule JSON or name:param shorthand")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("axioms", help="randomized law checks / comparison matrix")
    p.add_argument("--matrix", action="store_true", help="render the full grid")
    p.add_argument("--rules", required=True, help="comma-separated rule tokens")
    p.add_argument("--axioms", help="comma-separated law names (default: grid set)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--space-size", type=int, default=8)
    p.add_argument("--agents", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--report", choices=("table", "json", "csv"), default="table")
    p.add_argument("--counterexamples", help="directory for counterexample JSON files")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_axioms)

    p = sub.add_parser("gaussian", help="closed-form pool allocation and costs")
    p.add_argument("--pool", required=True, help="pool JSON (mu + sigma/rho or cov)")
    p.add_argument("--lambda", dest="level", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_gaussian)

    p = sub.add_parser("sweep", help="cost/benefit curves as CSV")
    p.add_argument("--kind", choices=("correlation", "participants"), required=True)
    p.add_argument("--grid", required=True, help="a:b:step or comma list")
    p.add_argument("--lambda", dest="level", type=float, default=0.99)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=2, help="pool size (correlation sweep)")
    p.add_argument("--scheme", choices=("constant", "power_decay"), default="constant")
    p.add_argument("--rho", type=float, default=0.2)
    p.add_argument("--decay", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("lambda-star", help="participation threshold level")
    p.add_argument("--pool", required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--agent", type=int)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_lambda_star)

    p = sub.add_parser("crra", help="platform-fee friction example")
    p.add_argument("--dist", default="lognormal:0:0.5", help="lognormal:mu:sigma or degenerate:c")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_crra)

    p = sub.add_parser("ingest", help="pivot a claims CSV and summarize")
    p.add_argument("--csv", required=True)
    p.add_argument("--stats-out", help="write summary-stats JSON here")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("report", help="pool economics from summary statistics")
    p.add_argument("--stats", required=True, help="stats JSON file")
    p.add_argument("--lambda", dest="level", type=float, required=True)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FricshareError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
