"""Score-based structure search and equivalence-class utilities.

Search runs in DAG space. The score is the separable log posterior
``log p(S) + log p(D|S)``, so a single-arc change only touches one family
(two for a reversal) and family scores are memoized per
``(variable, parent set)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import (
    DataSet,
    DirichletSpec,
    NetworkStructure,
    count_sufficient_stats,
    family_count_array,
)
from .errors import (
    EmptyModelSet,
    IncompleteData,
    InvariantViolation,
    TooLarge,
    VariableSetMismatch,
)
from .params import dirichlet_update, family_marginal_loglik, network_predictive
from .scoring import Constraints, ScoreReport, StructurePrior

#: Identifier of the random generator used by every stochastic search.
RNG_ALGORITHM = "numpy.random.Generator(PCG64), seeded with SeedSequence([seed, restart])"

#: Improvements at or below this are treated as ties, not progress.
TIE_TOLERANCE = 1e-9

MAX_ENUMERATION_VARIABLES = 8


# --------------------------------------------------------------------------
# structural changes
# --------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class ChangeOp:
    """A single-arc change: ``add``/``delete``/``reverse`` of parent -> child."""

    kind: str
    parent: str
    child: str

    def __post_init__(self):
        if self.kind not in ("add", "delete", "reverse"):
            raise InvariantViolation(f"unknown change kind {self.kind!r}")
        if self.parent == self.child:
            raise InvariantViolation("a change needs two distinct endpoints")

    def new_parents(self, structure: NetworkStructure) -> dict[int, tuple[int, ...]]:
        """Parent sets (sorted indices) of the families this change rewrites."""
        p, c = structure.index(self.parent), structure.index(self.child)
        pa = structure.parent_indices
        if self.kind == "add":
            return {c: tuple(sorted(pa[c] + (p,)))}
        if self.kind == "delete":
            return {c: tuple(x for x in pa[c] if x != p)}
        return {
            c: tuple(x for x in pa[c] if x != p),
            p: tuple(sorted(pa[p] + (c,))),
        }

    def apply(self, structure: NetworkStructure) -> NetworkStructure:
        parents = list(structure.parent_indices)
        for i, ps in self.new_parents(structure).items():
            parents[i] = ps
        names = structure.names
        return NetworkStructure(
            structure.variables, tuple(tuple(names[p] for p in ps) for ps in parents)
        )

    def __str__(self):
        arrow = {"add": "+", "delete": "-", "reverse": "~"}[self.kind]
        return f"{arrow}{self.parent}->{self.child}"


def _as_prior(constraints) -> StructurePrior:
    if constraints is None:
        return StructurePrior()
    if isinstance(constraints, Constraints):
        return StructurePrior(constraints=constraints)
    return constraints


def _reaches(pa_sets, src, dst, skip=None) -> bool:
    """True if a directed path src -> ... -> dst exists (ignoring arc ``skip``)."""
    # walk backwards from dst through parents
    stack, seen = [dst], {dst}
    while stack:
        node = stack.pop()
        for p in pa_sets[node]:
            if skip is not None and (p, node) == skip:
                continue
            if p == src:
                return True
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return False


def eligible_changes(structure: NetworkStructure, constraints=None) -> list[ChangeOp]:
    """Every single-arc change that keeps the graph acyclic and admissible.

    ``constraints`` is a :class:`StructurePrior`, a :class:`Constraints` or
    None. Output is sorted by (kind, parent, child).
    """
    prior = _as_prior(constraints)
    names = structure.names
    pa = [set(p) for p in structure.parent_indices]
    out = []
    n = structure.n_variables
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            if a in pa[b]:
                cand = [
                    ChangeOp("delete", names[a], names[b]),
                    ChangeOp("reverse", names[a], names[b]),
                ]
                for ch in cand:
                    if ch.kind == "reverse" and _reaches(pa, a, b, skip=(a, b)):
                        continue
                    if _family_changes_ok(prior, structure, ch):
                        out.append(ch)
            elif b not in pa[a]:
                if _reaches(pa, b, a):
                    continue
                ch = ChangeOp("add", names[a], names[b])
                if _family_changes_ok(prior, structure, ch):
                    out.append(ch)
    out.sort()
    return out


def _family_changes_ok(prior, structure, change) -> bool:
    return all(
        prior.allows_family(structure, i, ps) for i, ps in change.new_parents(structure).items()
    )


# --------------------------------------------------------------------------
# separable score cache
# --------------------------------------------------------------------------


class ScoreCache:
    """Per-family scores of the current structure plus a memo of family scores.

    The family score is ``log p(D_i | Pa_i) + log p(Pa_i)`` where the prior
    part comes from the structure prior (zero when uniform).
    """

    def __init__(self, data: DataSet, prior_builder, structure_prior: StructurePrior, structure=None):
        self.codes = data.codes
        self.cards = tuple(v.cardinality for v in data.variables)
        self.prior_builder = prior_builder
        self.structure_prior = structure_prior
        self._memo: dict[tuple[int, tuple[int, ...]], float] = {}
        self.current: list[float] = []
        self._template = None
        if structure is not None:
            self.reset(structure)

    def family_score(self, i: int, parents) -> float:
        key = (i, tuple(sorted(parents)))
        val = self._memo.get(key)
        if val is None:
            counts = family_count_array(self.codes, i, key[1], self.cards)
            alpha = self.prior_builder.family_alpha(i, key[1])
            val = family_marginal_loglik(alpha, counts)
            val += self.structure_prior.family_log_prior(self._template, i, key[1])
            self._memo[key] = val
        return val

    def reset(self, structure: NetworkStructure):
        self._template = structure
        self.current = [
            self.family_score(i, structure.parent_indices[i]) for i in range(structure.n_variables)
        ]

    @property
    def total(self) -> float:
        return math.fsum(self.current)

    def delta(self, structure: NetworkStructure, change: ChangeOp) -> float:
        return sum(
            self.family_score(i, ps) - self.current[i]
            for i, ps in change.new_parents(structure).items()
        )

    def apply(self, structure: NetworkStructure, change: ChangeOp) -> NetworkStructure:
        for i, ps in change.new_parents(structure).items():
            self.current[i] = self.family_score(i, ps)
        return change.apply(structure)

    def report(self, structure: NetworkStructure) -> ScoreReport:
        prior = self.structure_prior
        lp = [prior.family_log_prior(structure, i, structure.parent_indices[i])
              for i in range(structure.n_variables)]
        per = tuple(c - p for c, p in zip(self.current, lp))
        lpt = math.fsum(lp)
        ml = math.fsum(per)
        return ScoreReport(lpt, ml, lpt + ml, per, structure.names)


# --------------------------------------------------------------------------
# search
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    change: ChangeOp
    delta: float
    phase: str = "greedy"


@dataclass(frozen=True)
class AnnealingSchedule:
    """Temperature schedule.

    ``initial_temperature`` is the starting T; ``trials`` changes are tried
    per temperature, stopping early after ``max_accepted`` acceptances; T is
    multiplied by ``decay`` at most ``max_reductions`` times.
    """

    initial_temperature: float = 10.0
    trials: int = 200
    max_accepted: int = 50
    decay: float = 0.9
    max_reductions: int = 100

    def __post_init__(self):
        if not self.initial_temperature > 0:
            raise InvariantViolation("initial temperature must be > 0")
        if self.trials < 1 or self.max_accepted < 1:
            raise InvariantViolation("trials and max_accepted must be positive")
        if not 0.0 < self.decay < 1.0:
            raise InvariantViolation("decay must lie in (0, 1)")
        if self.max_reductions < 0:
            raise InvariantViolation("max_reductions must be non-negative")


@dataclass(frozen=True)
class SearchOutcome:
    best: NetworkStructure
    report: ScoreReport
    initial: NetworkStructure
    trace: tuple[TraceStep, ...]
    best_step: int
    restart: int
    seed: int | None
    rng_algorithm: str = RNG_ALGORITHM
    restart_scores: tuple[float, ...] = field(default=())

    def replay(self) -> NetworkStructure:
        """Apply the first ``best_step`` traced changes to ``initial``."""
        s = self.initial
        for step in self.trace[: self.best_step]:
            s = step.change.apply(s)
        return s


def _prepare(data: DataSet, prior_builder, structure_prior, init):
    structure_prior = _as_prior(structure_prior)
    if not data.is_complete:
        raise IncompleteData("structure search needs complete data")
    variables = tuple(getattr(prior_builder, "variables", data.variables))
    if init is None:
        init = NetworkStructure.empty(variables)
    data = data.aligned(init)
    structure_prior.check(init)
    return data, structure_prior, init


def _hill_climb(cache, structure, prior, iteration0=0, max_iter=None):
    steps = []
    it = iteration0
    while max_iter is None or it - iteration0 < max_iter:
        best, best_delta = None, TIE_TOLERANCE
        for ch in eligible_changes(structure, prior):
            d = cache.delta(structure, ch)
            if d > best_delta:
                best, best_delta = ch, d
        if best is None:
            break
        structure = cache.apply(structure, best)
        it += 1
        steps.append(TraceStep(it, best, best_delta, "greedy"))
    return structure, steps


def greedy_search(
    data: DataSet,
    prior_builder,
    structure_prior=None,
    init: NetworkStructure | None = None,
    restarts: int = 0,
    perturbation: int = 3,
    seed: int = 0,
    max_iter: int | None = None,
) -> SearchOutcome:
    """Greedy hill climbing with random restarts.

    Restart 0 climbs from ``init`` (empty graph by default). Restart ``r``
    applies ``perturbation`` random eligible changes to restart 0's local
    maximum and climbs again, using its own generator seeded with
    ``[seed, r]``. The best total wins; ties go to the lowest restart.
    Among equal improvements the first change in
    :func:`eligible_changes` order is taken.
    """
    data, prior, init = _prepare(data, prior_builder, structure_prior, init)
    cache = ScoreCache(data, prior_builder, prior, init)
    local0, trace0 = _hill_climb(cache, init, prior, 0, max_iter)
    results = [(cache.total, 0, local0, tuple(trace0), cache.report(local0))]

    for r in range(1, restarts + 1):
        rng = np.random.default_rng([seed, r])
        cache = ScoreCache(data, prior_builder, prior, local0)
        s = local0
        it = len(trace0)
        steps = list(trace0)
        for _ in range(perturbation):
            changes = eligible_changes(s, prior)
            if not changes:
                break
            ch = changes[int(rng.integers(len(changes)))]
            d = cache.delta(s, ch)
            s = cache.apply(s, ch)
            it += 1
            steps.append(TraceStep(it, ch, d, "perturb"))
        s, more = _hill_climb(cache, s, prior, it, max_iter)
        steps += more
        results.append((cache.total, r, s, tuple(steps), cache.report(s)))

    total, r, best, trace, report = max(results, key=lambda x: (x[0], -x[1]))
    return SearchOutcome(
        best=best,
        report=report,
        initial=init,
        trace=trace,
        best_step=len(trace),
        restart=r,
        seed=seed,
        restart_scores=tuple(x[0] for x in results),
    )


def acceptance_probability(delta: float, temperature: float) -> float:
    """min(1, exp(delta / T)): improvements and ties are always accepted."""
    if delta >= 0:
        return 1.0
    return math.exp(delta / temperature)


def simulated_annealing(
    data: DataSet,
    prior_builder,
    structure_prior=None,
    schedule: AnnealingSchedule | None = None,
    seed: int = 0,
    init: NetworkStructure | None = None,
) -> SearchOutcome:
    """Simulated annealing over single-arc changes.

    At temperature T a random eligible change with score change d is made
    with probability min(1, exp(d / T)). After ``trials`` attempts or
    ``max_accepted`` acceptances the temperature is multiplied by
    ``decay``; the search stops when a whole round accepts nothing or the
    temperature has been lowered more than ``max_reductions`` times.

    Start from the empty graph with a high temperature (the default), or
    pass ``init`` together with a lower temperature.
    """
    schedule = schedule or AnnealingSchedule()
    data, prior, init = _prepare(data, prior_builder, structure_prior, init)
    rng = np.random.default_rng([seed, 0])
    cache = ScoreCache(data, prior_builder, prior, init)
    s = init
    best, best_total, best_step = init, cache.total, 0
    best_report = cache.report(init)
    trace = []
    temperature = schedule.initial_temperature
    reductions = 0
    it = 0
    while True:
        trials = accepted = 0
        while trials < schedule.trials and accepted < schedule.max_accepted:
            trials += 1
            changes = eligible_changes(s, prior)
            if not changes:
                break
            ch = changes[int(rng.integers(len(changes)))]
            d = cache.delta(s, ch)
            p = acceptance_probability(d, temperature)
            if p >= 1.0 or rng.random() < p:
                s = cache.apply(s, ch)
                it += 1
                accepted += 1
                trace.append(TraceStep(it, ch, d, "anneal"))
                if cache.total > best_total + TIE_TOLERANCE:
                    best, best_total, best_step = s, cache.total, len(trace)
                    best_report = cache.report(s)
        if accepted == 0:
            break
        temperature *= schedule.decay
        reductions += 1
        if reductions > schedule.max_reductions:
            break
    return SearchOutcome(
        best=best,
        report=best_report,
        initial=init,
        trace=tuple(trace),
        best_step=best_step,
        restart=0,
        seed=seed,
    )


def enumerate_dags(variables, structure_prior=None, limit: int = 6):
    """Yield every admissible DAG over ``variables`` (parents in index order)."""
    variables = tuple(variables)
    n = len(variables)
    if n > limit:
        raise TooLarge(f"exhaustive DAG enumeration is limited to {limit} variables")
    prior = _as_prior(structure_prior)
    names = tuple(v.name for v in variables)
    template = NetworkStructure.empty(variables)
    options = []
    for i in range(n):
        others = [k for k in range(n) if k != i]
        sets = []
        for size in range(len(others) + 1):
            for ps in itertools.combinations(others, size):
                if prior.allows_family(template, i, ps):
                    sets.append(ps)
        options.append(sets)
    for combo in itertools.product(*options):
        if _acyclic(combo):
            yield NetworkStructure(variables, tuple(tuple(names[p] for p in ps) for ps in combo))


def _acyclic(parent_sets) -> bool:
    n = len(parent_sets)
    indeg = [len(p) for p in parent_sets]
    children = [[] for _ in range(n)]
    for c, ps in enumerate(parent_sets):
        for p in ps:
            children[p].append(c)
    ready = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return seen == n


def exhaustive_search(data: DataSet, prior_builder, structure_prior=None, limit: int = 6):
    """Score every admissible DAG; returns ``[(total, structure), ...]`` best first.

    Ties are ordered by enumeration order, which is deterministic.
    """
    structure_prior = _as_prior(structure_prior)
    variables = tuple(getattr(prior_builder, "variables", data.variables))
    template = NetworkStructure.empty(variables)
    data = data.aligned(template)
    if not data.is_complete:
        raise IncompleteData("structure search needs complete data")
    structure_prior.validate_for(template)
    cache = ScoreCache(data, prior_builder, structure_prior, template)
    scored = []
    for k, s in enumerate(enumerate_dags(variables, structure_prior, limit)):
        total = math.fsum(cache.family_score(i, s.parent_indices[i]) for i in range(s.n_variables))
        scored.append((total, k, s))
    scored.sort(key=lambda x: (-x[0], x[1]))
    return [(t, s) for t, _, s in scored]


# --------------------------------------------------------------------------
# equivalence classes
# --------------------------------------------------------------------------


def skeleton(structure: NetworkStructure) -> frozenset:
    return frozenset(frozenset(a) for a in structure.arcs)


def v_structures(structure: NetworkStructure) -> frozenset:
    """Triples (X, Y, Z) with X -> Y <- Z and X, Z non-adjacent; X < Z by name."""
    adj = skeleton(structure)
    out = set()
    for i, ps in enumerate(structure.parents):
        for a, b in itertools.combinations(sorted(ps), 2):
            if frozenset((a, b)) not in adj:
                out.add((a, structure.names[i], b))
    return frozenset(out)


def independence_equivalent(s1: NetworkStructure, s2: NetworkStructure) -> bool:
    """Same skeleton and same v-structures."""
    if sorted(s1.names) != sorted(s2.names):
        raise VariableSetMismatch("structures are over different variables")
    return skeleton(s1) == skeleton(s2) and v_structures(s1) == v_structures(s2)


def enumerate_equivalence_class(structure: NetworkStructure) -> list[NetworkStructure]:
    """All DAGs independence-equivalent to ``structure`` (including itself).

    Orients the skeleton edge by edge, pruning partial orientations that
    create a cycle or a v-structure the original lacks.
    """
    n = structure.n_variables
    if n > MAX_ENUMERATION_VARIABLES:
        raise TooLarge(
            f"equivalence-class enumeration is limited to {MAX_ENUMERATION_VARIABLES} variables"
        )
    names = structure.names
    pos = {v: i for i, v in enumerate(names)}
    edges = sorted(tuple(sorted((pos[a], pos[b]))) for a, b in structure.arcs)
    adjacent = {frozenset(e) for e in edges}
    target_v = {
        (pos[a], pos[y], pos[b]) for a, y, b in v_structures(structure)
    }
    target_v = {(min(a, b), y, max(a, b)) for a, y, b in target_v}
    parents = [set() for _ in range(n)]
    found = []

    def creates_bad_v(child, new_parent):
        for other in parents[child]:
            if frozenset((other, new_parent)) not in adjacent:
                key = (min(other, new_parent), child, max(other, new_parent))
                if key not in target_v:
                    return True
        return False

    def recurse(k):
        if k == len(edges):
            got = set()
            for c in range(n):
                for a, b in itertools.combinations(sorted(parents[c]), 2):
                    if frozenset((a, b)) not in adjacent:
                        got.add((a, c, b))
            if got == target_v:
                found.append(tuple(tuple(sorted(p)) for p in parents))
            return
        a, b = edges[k]
        for p, c in ((a, b), (b, a)):
            if creates_bad_v(c, p):
                continue
            if _reaches(parents, c, p):
                continue
            parents[c].add(p)
            recurse(k + 1)
            parents[c].discard(p)

    recurse(0)
    return [
        NetworkStructure(structure.variables, tuple(tuple(names[p] for p in ps) for ps in combo))
        for combo in found
    ]


CAUSAL_ASSUMPTIONS = (
    "causal Markov condition",
    "faithfulness",
    "no hidden variables",
    "no selection bias",
)


@dataclass(frozen=True)
class CompelledEdges:
    """Edges with the same orientation in every member of an equivalence class.

    Under ``assumptions`` these are candidate causal relationships; the
    remaining (reversible) edges are not identified by observational data.
    """

    compelled: frozenset
    reversible: frozenset
    class_size: int
    assumptions: tuple[str, ...] = CAUSAL_ASSUMPTIONS


def compelled_edges(structure: NetworkStructure) -> CompelledEdges:
    members = enumerate_equivalence_class(structure)
    arc_sets = [set(m.arcs) for m in members]
    common = set.intersection(*arc_sets) if arc_sets else set()
    reversible = frozenset(frozenset(a) for a in structure.arcs if a not in common)
    return CompelledEdges(frozenset(common), reversible, len(members))


# --------------------------------------------------------------------------
# model averaging
# --------------------------------------------------------------------------


def structure_weights(log_scores) -> np.ndarray:
    """Normalize log scores into posterior weights over the given set."""
    x = np.asarray(log_scores, dtype=float)
    if x.size == 0:
        raise EmptyModelSet("no structures to average over")
    if not np.all(np.isfinite(x)):
        raise InvariantViolation("log scores must be finite")
    return np.exp(x - logsumexp(x))


def model_average_predict(structures, log_scores, posteriors, assignment) -> float:
    """sum_S p(S|D) p(x | D, S) over an explicit set of structures.

    ``posteriors[m]`` is the posterior :class:`DirichletSpec` of
    ``structures[m]`` (prior hyperparameters plus counts).
    """
    structures = list(structures)
    if not structures:
        raise EmptyModelSet("no structures to average over")
    if not len(structures) == len(log_scores) == len(posteriors):
        raise InvariantViolation("structures, scores and posteriors differ in length")
    w = structure_weights(log_scores)
    return float(
        sum(wm * network_predictive(s, post, assignment) for wm, s, post in zip(w, structures, posteriors))
    )


def posterior_for(structure: NetworkStructure, prior_builder, data: DataSet) -> DirichletSpec:
    """Posterior hyperparameters of ``structure`` given complete ``data``."""
    return dirichlet_update(prior_builder.dirichlet(structure), count_sufficient_stats(structure, data))

