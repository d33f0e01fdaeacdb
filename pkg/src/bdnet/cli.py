"""Command-line interface.

Every subcommand prints a plain-text report on stdout; ``--json PATH``
additionally writes the same results as JSON. Domain errors print their
class name and exit with status 1; usage errors exit with status 2.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import NetworkStructure, ParameterSet, config_states, count_sufficient_stats
from .errors import BayesNetError, SchemaMismatch
from .incomplete import em_fit, gibbs_posterior
from .inference import query
from .io import (
    DEFAULT_MISSING,
    load_csv,
    load_network,
    read_counts_file,
    save_network,
    to_dot,
)
from .params import BDePrior, dirichlet_update
from .scoring import Constraints, StructurePrior, log_posterior_score
from .search import (
    AnnealingSchedule,
    compelled_edges,
    enumerate_equivalence_class,
    exhaustive_search,
    greedy_search,
    independence_equivalent,
    model_average_predict,
    simulated_annealing,
    structure_weights,
)


class _Report:
    def __init__(self):
        self.lines = []
        self.data = {}

    def __call__(self, line=""):
        self.lines.append(line)

    def text(self):
        return "\n".join(self.lines) + "\n"


def _names(text):
    return [x.strip() for x in text.split(",") if x.strip()] if text else []


def _assignment(text):
    out = {}
    for item in _names(text):
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"expected NAME=STATE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _arc(text):
    if "->" not in text:
        raise argparse.ArgumentTypeError(f"expected PARENT->CHILD, got {text!r}")
    p, c = text.split("->", 1)
    return p.strip(), c.strip()


def _fmt(x):
    return f"{x:.6f}"


def _prob(x):
    return f"{x:.4f}"


# --------------------------------------------------------------------------
# shared argument groups
# --------------------------------------------------------------------------


def _add_data_args(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--data", metavar="CSV", help="comma-separated cases with a header row")
    g.add_argument("--counts", metavar="TABLE", help="counts table file (@variable header + counts)")
    p.add_argument("--missing", default=DEFAULT_MISSING, help="missing-value marker in CSV (default '?')")


def _add_prior_args(p):
    p.add_argument("--ess", type=float, default=1.0, help="equivalent sample size (default 1)")
    p.add_argument("--prior-net", metavar="DOC", help="prior network document with CPTs (default uniform)")


def _add_structure_prior_args(p):
    p.add_argument("--structure-prior", choices=("uniform", "per-arc"), default="uniform")
    p.add_argument("--kappa", type=float, help="per-arc presence probability")
    p.add_argument("--ordering", help="comma-separated variable ordering for the per-arc prior")
    p.add_argument("--forbid-parents", metavar="NAMES", help="variables that may not have parents")
    p.add_argument("--require-leaf", metavar="NAMES", help="variables that may not have children")
    p.add_argument("--forbid-arc", metavar="P->C", type=_arc, action="append", default=[])
    p.add_argument("--max-parents", type=int)


def _load_data(args, variables):
    if args.counts:
        data = read_counts_file(args.counts)
        return data.aligned(NetworkStructure.empty(variables))
    return load_csv(args.data, variables, args.missing)


def _prior_network(args):
    if not args.prior_net:
        return None
    doc = load_network(args.prior_net)
    if doc.params is None:
        raise SchemaMismatch(f"prior network {args.prior_net} has no CPTs")
    return doc.params


def _bde(args, variables):
    return BDePrior(variables, args.ess, _prior_network(args))


def _structure_prior(args):
    constraints = Constraints(
        no_parents=frozenset(_names(args.forbid_parents)),
        leaves=frozenset(_names(args.require_leaf)),
        forbidden_arcs=frozenset(args.forbid_arc),
        max_parents=args.max_parents,
    )
    ordering = tuple(_names(args.ordering)) or None
    return StructurePrior(args.structure_prior, args.kappa, ordering, constraints)


def _arcs_text(structure):
    return ", ".join(f"{p}->{c}" for p, c in structure.arcs) or "(no arcs)"


def _family_lines(report, structure, per_family):
    for name, ps, val in zip(structure.names, structure.parents, per_family):
        parents = ",".join(ps) if ps else "-"
        report(f"  family {name} | {parents}: {_fmt(val)}")


def _cpt_lines(report, params: ParameterSet, se=None):
    s = params.structure
    for i, v in enumerate(s.variables):
        report(f"  {v.name} ({', '.join(v.states)})")
        for j in range(s.n_configs(i)):
            cfg = config_states(s, i, j)
            label = ", ".join(f"{p}={x}" for p, x in zip(s.parents[i], cfg)) or "*"
            row = " ".join(_prob(x) for x in params.theta[i][j])
            if se is not None:
                row += "   se " + " ".join(f"{x:.4f}" for x in se[i][j])
            report(f"    [{label}] {row}")


def _cpt_json(params):
    return {v.name: params.theta[i].tolist() for i, v in enumerate(params.structure.variables)}


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_score(args, report):
    docs = [load_network(p) for p in args.network]
    variables = docs[0].structure.variables
    data = _load_data(args, variables)
    bde = _bde(args, variables)
    prior = _structure_prior(args)
    results = []
    for path, doc in zip(args.network, docs):
        s = doc.structure
        if s.variables != variables:
            raise SchemaMismatch(f"{path} declares different variables from {args.network[0]}")
        rep = log_posterior_score(s, prior, bde.dirichlet(s), count_sufficient_stats(s, data))
        results.append(rep)
        report(f"network {path}")
        report(f"  arcs: {_arcs_text(s)}")
        report(f"  log prior: {_fmt(rep.log_prior)}")
        report(f"  log marginal likelihood: {_fmt(rep.log_marginal)}")
        report(f"  log posterior score: {_fmt(rep.total)}")
        _family_lines(report, s, rep.per_family)
    out = [{"network": p, "log_prior": r.log_prior, "log_marginal": r.log_marginal,
            "total": r.total, "per_family": list(r.per_family)} for p, r in zip(args.network, results)]
    if len(results) > 1:
        w = structure_weights([r.total for r in results])
        report("posterior over the listed networks:")
        for p, wi in zip(args.network, w):
            report(f"  {p}: {_prob(wi)}")
        for o, wi in zip(out, w):
            o["posterior"] = float(wi)
    report.data = {"command": "score", "ess": args.ess, "cases": data.n_cases, "networks": out}


def cmd_learn_params(args, report):
    doc = load_network(args.network)
    s = doc.structure
    data = _load_data(args, s.variables)
    post = dirichlet_update(_bde(args, s.variables).dirichlet(s), count_sufficient_stats(s, data))
    params = post.mean()
    report(f"posterior-mean parameters for {args.network} ({data.n_cases} cases, ess {args.ess:g})")
    _cpt_lines(report, params)
    if args.output:
        save_network(args.output, s, params)
        report(f"wrote {args.output}")
    report.data = {"command": "learn-params", "cpts": _cpt_json(params),
                   "posterior_alpha": {v.name: post.alpha[i].tolist() for i, v in enumerate(s.variables)}}


def _schema_variables(args):
    if args.schema:
        return load_network(args.schema).structure.variables
    if args.prior_net:
        return load_network(args.prior_net).structure.variables
    if args.counts:
        return read_counts_file(args.counts).variables
    raise SchemaMismatch("--data needs --schema or --prior-net to declare the variables")


def cmd_learn_structure(args, report):
    variables = _schema_variables(args)
    data = _load_data(args, variables)
    bde = _bde(args, variables)
    prior = _structure_prior(args)
    init = load_network(args.init).structure if args.init else None
    if args.method == "exhaustive":
        ranked = exhaustive_search(data, bde, prior)
        best = ranked[0][1]
        report(f"exhaustive search over {len(ranked)} admissible structures")
        top = []
        for k, (total, s) in enumerate(ranked[: args.top], start=1):
            report(f"  #{k} {_fmt(total)}  {_arcs_text(s)}")
            top.append({"rank": k, "total": total, "arcs": [list(a) for a in s.arcs]})
        outcome_data = {"method": "exhaustive", "top": top}
    elif args.method == "anneal":
        schedule = AnnealingSchedule(args.t0, args.trials, args.max_accepted, args.decay, args.max_reductions)
        outcome = simulated_annealing(data, bde, prior, schedule, args.seed, init)
        best = outcome.best
        report(f"simulated annealing: {len(outcome.trace)} accepted changes, best after {outcome.best_step}")
        outcome_data = {"method": "anneal", "accepted": len(outcome.trace), "rng": outcome.rng_algorithm}
    else:
        outcome = greedy_search(data, bde, prior, init, args.restarts, args.perturb, args.seed)
        best = outcome.best
        report(f"greedy search with {args.restarts} restarts; best from restart {outcome.restart}")
        outcome_data = {"method": "greedy", "restart": outcome.restart,
                        "restart_scores": list(outcome.restart_scores), "rng": outcome.rng_algorithm}
    rep = log_posterior_score(best, prior, bde.dirichlet(best), count_sufficient_stats(best, data))
    report(f"best structure: {_arcs_text(best)}")
    report(f"  log prior: {_fmt(rep.log_prior)}")
    report(f"  log marginal likelihood: {_fmt(rep.log_marginal)}")
    report(f"  log posterior score: {_fmt(rep.total)}")
    _family_lines(report, best, rep.per_family)
    if best.n_variables <= 8:
        ce = compelled_edges(best)
        report(f"equivalence class size: {ce.class_size}")
        edges = ", ".join(f"{p}->{c}" for p, c in sorted(ce.compelled)) or "(none)"
        report(f"compelled edges (causal candidates, assuming {', '.join(ce.assumptions)}): {edges}")
    if args.output:
        save_network(args.output, best)
        report(f"wrote {args.output}")
    report.data = {"command": "learn-structure", "seed": args.seed, "cases": data.n_cases,
                   "arcs": [list(a) for a in best.arcs], "total": rep.total,
                   "per_family": list(rep.per_family), **outcome_data}


def cmd_em(args, report):
    doc = load_network(args.network)
    s = doc.structure
    data = _load_data(args, s.variables)
    priors = _bde(args, s.variables).dirichlet(s)
    best = None
    runs = max(1, args.restarts)
    for r in range(runs):
        init = args.init if args.restarts <= 1 else "random"
        res = em_fit(s, priors, data, args.mode, init, args.tol, args.max_iter, seed=[args.seed, r])
        if best is None or res.objective > best.objective:
            best = res
    report(f"EM ({best.mode.upper()}) on {args.network}: {data.n_cases} cases, "
           f"{int(data.missing_mask.sum())} missing entries")
    report(f"  runs: {runs}; iterations: {best.iterations}; converged: {best.converged}")
    report(f"  objective: {_fmt(best.objective)}")
    _cpt_lines(report, best.params)
    if args.output:
        save_network(args.output, s, best.params)
        report(f"wrote {args.output}")
    report.data = {"command": "em", "mode": best.mode, "seed": args.seed, "objective": best.objective,
                   "iterations": best.iterations, "converged": best.converged,
                   "trace": list(best.trace), "cpts": _cpt_json(best.params)}


def cmd_gibbs(args, report):
    doc = load_network(args.network)
    s = doc.structure
    data = _load_data(args, s.variables)
    priors = _bde(args, s.variables).dirichlet(s)
    g = gibbs_posterior(s, priors, data, args.iterations, args.burn_in, args.seed)
    report(f"Gibbs posterior means for {args.network}: {g.iterations} sweeps, burn-in {g.burn_in}, "
           f"seed {g.seed}, init {g.init_policy}")
    _cpt_lines(report, g.as_params(s), g.std_errors)
    report.data = {"command": "gibbs", "seed": args.seed, "iterations": g.iterations,
                   "burn_in": g.burn_in, "means": [m.tolist() for m in g.means],
                   "std_errors": [e.tolist() for e in g.std_errors]}


def cmd_infer(args, report):
    doc = load_network(args.network)
    if doc.params is None:
        raise SchemaMismatch(f"{args.network} has no CPTs")
    s = doc.structure
    res = query(s, doc.params, args.target, args.evidence)
    ev = ", ".join(f"{k}={v}" for k, v in args.evidence.items()) or "(none)"
    report(f"p({', '.join(res.targets)} | {ev})")
    table = {}
    for idx in np.ndindex(res.table.shape):
        label = ", ".join(f"{t}={st[k]}" for t, st, k in zip(res.targets, res.states, idx))
        report(f"  {label}: {_prob(res.table[idx])}")
        table[label] = float(res.table[idx])
    report(f"p(evidence) = {res.evidence_probability:.6g}")
    report.data = {"command": "infer", "targets": list(res.targets), "table": table,
                   "evidence_probability": res.evidence_probability}


def cmd_average(args, report):
    docs = [load_network(p) for p in args.network]
    variables = docs[0].structure.variables
    data = _load_data(args, variables)
    bde = _bde(args, variables)
    structures = [d.structure for d in docs]
    scores, posts = [], []
    for s in structures:
        counts = count_sufficient_stats(s, data)
        prior = bde.dirichlet(s)
        scores.append(log_posterior_score(s, StructurePrior(), prior, counts).total)
        posts.append(dirichlet_update(prior, counts))
    w = structure_weights(scores)
    report("structure weights p(S|D):")
    for p, wi in zip(args.network, w):
        report(f"  {p}: {_prob(wi)}")
    report.data = {"command": "average", "weights": dict(zip(args.network, map(float, w)))}
    if args.case:
        p = model_average_predict(structures, scores, posts, args.case)
        case = ", ".join(f"{k}={v}" for k, v in args.case.items())
        report(f"p(next case = {case} | D) = {p:.6g}")
        report.data["predictive"] = p


def cmd_equiv(args, report):
    docs = [load_network(p) for p in args.network]
    s = docs[0].structure
    if len(docs) == 2:
        eq = independence_equivalent(s, docs[1].structure)
        report(f"independence equivalent: {'yes' if eq else 'no'}")
        report.data["equivalent"] = eq
    members = enumerate_equivalence_class(s)
    ce = compelled_edges(s)
    report(f"equivalence class of {args.network[0]}: {len(members)} member(s)")
    for m in members:
        report(f"  {_arcs_text(m)}")
    edges = ", ".join(f"{p}->{c}" for p, c in sorted(ce.compelled)) or "(none)"
    report(f"compelled edges: {edges}")
    report(f"causal reading of compelled edges assumes: {', '.join(ce.assumptions)}")
    report.data.update({"command": "equiv", "class_size": len(members),
                        "compelled": sorted([list(e) for e in ce.compelled])})


def cmd_export_dot(args, report):
    s = load_network(args.network).structure
    text = to_dot(s, Path(args.network).stem)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        report(f"wrote {args.output}")
    else:
        report.lines.append(text.rstrip("\n"))
    report.data = {"command": "export-dot", "dot": text}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdnet", description="Learn discrete Bayesian networks from data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--json", metavar="PATH", help="also write results as JSON")
        return p

    p = add("score", cmd_score, "score network structures (BD with BDe priors)")
    p.add_argument("--network", action="append", required=True, help="network document (repeatable)")
    _add_data_args(p)
    _add_prior_args(p)
    _add_structure_prior_args(p)

    p = add("learn-params", cmd_learn_params, "posterior-mean CPTs from complete data")
    p.add_argument("--network", required=True)
    _add_data_args(p)
    _add_prior_args(p)
    p.add_argument("--output", help="write the network with learned CPTs")

    p = add("learn-structure", cmd_learn_structure, "search for a high-scoring structure")
    _add_data_args(p)
    _add_prior_args(p)
    _add_structure_prior_args(p)
    p.add_argument("--schema", metavar="DOC", help="network document declaring the variables (for --data)")
    p.add_argument("--method", choices=("greedy", "anneal", "exhaustive"), default="greedy")
    p.add_argument("--init", metavar="DOC", help="initial structure (default: empty graph)")
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--perturb", type=int, default=3, help="random changes per restart")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--top", type=int, default=5, help="structures listed by exhaustive search")
    p.add_argument("--t0", type=float, default=10.0, help="annealing: initial temperature")
    p.add_argument("--trials", type=int, default=200, help="annealing: trials per temperature")
    p.add_argument("--max-accepted", type=int, default=50, help="annealing: acceptances per temperature")
    p.add_argument("--decay", type=float, default=0.9, help="annealing: temperature decay factor")
    p.add_argument("--max-reductions", type=int, default=100, help="annealing: temperature reductions")
    p.add_argument("--output", help="write the best structure as a network document")

    p = add("em", cmd_em, "EM for ML or MAP parameters with missing data")
    p.add_argument("--network", required=True)
    _add_data_args(p)
    _add_prior_args(p)
    p.add_argument("--mode", choices=("ml", "map"), default="map")
    p.add_argument("--init", choices=("prior-mean", "uniform", "random"), default="prior-mean")
    p.add_argument("--restarts", type=int, default=1, help="runs from random starts; best is kept")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output")

    p = add("gibbs", cmd_gibbs, "Gibbs-sampled posterior means with missing data")
    p.add_argument("--network", required=True)
    _add_data_args(p)
    _add_prior_args(p)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--burn-in", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)

    p = add("infer", cmd_infer, "exact conditional probabilities")
    p.add_argument("--network", required=True, help="network document with CPTs")
    p.add_argument("--target", action="append", required=True)
    p.add_argument("--evidence", type=_assignment, default={}, help="NAME=STATE,NAME=STATE")

    p = add("average", cmd_average, "model-averaged prediction over listed structures")
    p.add_argument("--network", action="append", required=True)
    _add_data_args(p)
    _add_prior_args(p)
    p.add_argument("--case", type=_assignment, help="full assignment NAME=STATE,... to predict")

    p = add("equiv", cmd_equiv, "equivalence class and compelled edges")
    p.add_argument("--network", action="append", required=True, help="one or two network documents")

    p = add("export-dot", cmd_export_dot, "write the structure as a DOT digraph")
    p.add_argument("--network", required=True)
    p.add_argument("--output")
    return parser


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "network", None) and isinstance(args.network, list) and args.command == "equiv":
        if len(args.network) > 2:
            parser.print_usage(stderr)
            print("bdnet equiv: error: --network accepts at most two documents", file=stderr)
            return 2
    report = _Report()
    try:
        args.func(args, report)
    except BayesNetError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    stdout.write(report.text())
    if args.json:
        Path(args.json).write_text(json.dumps(report.data, indent=2, default=_json_default) + "\n",
                                    encoding="utf-8")
    return 0


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and math.isnan(x):
        return None
    raise TypeError(f"not JSON serializable: {type(x)!r}")


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
