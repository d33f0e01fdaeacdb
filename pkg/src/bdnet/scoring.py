"""Structure scores: BD marginal likelihood, structure priors, BIC, local criterion."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .core import (
    DataSet,
    DirichletSpec,
    FamilyCounts,
    NetworkStructure,
    ParameterSet,
    count_sufficient_stats,
)
from .errors import (
    ConstraintViolation,
    EmptyDataset,
    IncompleteData,
    InvariantViolation,
    ShapeMismatch,
)
from .inference import query
from .params import family_marginal_loglik


class MarginalLikelihood(NamedTuple):
    total: float
    per_family: tuple[float, ...]


@dataclass(frozen=True)
class Constraints:
    """Hard restrictions on which structures are admissible.

    ``no_parents`` and ``leaves`` hold variable names that may not have
    parents or children respectively. ``allowed_arcs``, when given, is a
    whitelist of ``(parent, child)`` pairs; ``required_arcs`` must always be
    present.
    """

    no_parents: frozenset = frozenset()
    leaves: frozenset = frozenset()
    forbidden_arcs: frozenset = frozenset()
    required_arcs: frozenset = frozenset()
    allowed_arcs: frozenset | None = None
    max_parents: int | None = None

    def __post_init__(self):
        for name in ("no_parents", "leaves", "forbidden_arcs", "required_arcs"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.allowed_arcs is not None:
            object.__setattr__(self, "allowed_arcs", frozenset(self.allowed_arcs))
        if self.max_parents is not None and self.max_parents < 0:
            raise InvariantViolation("max_parents must be non-negative")

    def names(self):
        out = set(self.no_parents) | set(self.leaves)
        for arcs in (self.forbidden_arcs, self.required_arcs, self.allowed_arcs or ()):
            for p, c in arcs:
                out |= {p, c}
        return out

    def allows_arc(self, parent: str, child: str) -> bool:
        if child in self.no_parents or parent in self.leaves:
            return False
        if (parent, child) in self.forbidden_arcs:
            return False
        if self.allowed_arcs is not None and (parent, child) not in self.allowed_arcs:
            return False
        return True


@dataclass(frozen=True)
class StructurePrior:
    """Prior over structures: uniform or independent per-arc (Buntine style).

    ``kind="per-arc"`` needs a variable ``ordering``; arcs that point
    backwards in the ordering are forbidden and every forward pair has
    presence probability ``kappa``.
    """

    kind: str = "uniform"
    kappa: float | None = None
    ordering: tuple[str, ...] | None = None
    constraints: Constraints = field(default_factory=Constraints)

    def __post_init__(self):
        if self.kind not in ("uniform", "per-arc"):
            raise InvariantViolation(f"unknown structure prior kind {self.kind!r}")
        if self.kind == "per-arc":
            if self.kappa is None or not 0.0 < self.kappa < 1.0:
                raise InvariantViolation("per-arc prior needs kappa in (0, 1)")
            if not self.ordering:
                raise InvariantViolation("per-arc prior needs a variable ordering")
            object.__setattr__(self, "ordering", tuple(self.ordering))

    def validate_for(self, structure: NetworkStructure):
        names = set(structure.names)
        unknown = self.constraints.names() - names
        if self.ordering is not None:
            if sorted(self.ordering) != sorted(names):
                raise InvariantViolation("ordering must list every variable exactly once")
        if unknown:
            raise InvariantViolation(f"constraints mention unknown variables {sorted(unknown)}")

    def allows_arc(self, parent: str, child: str) -> bool:
        if not self.constraints.allows_arc(parent, child):
            return False
        if self.kind == "per-arc":
            return self.ordering.index(parent) < self.ordering.index(child)
        return True

    def allows_family(self, structure, i, parent_indices) -> bool:
        names = structure.names
        child = names[i]
        if self.constraints.max_parents is not None and len(parent_indices) > self.constraints.max_parents:
            return False
        pset = {names[p] for p in parent_indices}
        if not all(self.allows_arc(p, child) for p in pset):
            return False
        return all(p in pset for p, c in self.constraints.required_arcs if c == child)

    def check(self, structure: NetworkStructure):
        """Raise ``ConstraintViolation`` if ``structure`` is not admissible."""
        self.validate_for(structure)
        for i in range(structure.n_variables):
            if not self.allows_family(structure, i, structure.parent_indices[i]):
                raise ConstraintViolation(
                    f"parents {list(structure.parents[i])} of {structure.names[i]!r} "
                    "violate the structure constraints"
                )

    def family_log_prior(self, structure, i, parent_indices) -> float:
        """Contribution of variable ``i``'s parent set to log p(S)."""
        if self.kind == "uniform":
            return 0.0
        names = structure.names
        child = names[i]
        pos = self.ordering.index(child)
        pset = {names[p] for p in parent_indices}
        present = sum(1 for v in self.ordering[:pos] if v in pset)
        absent = pos - present
        return present * math.log(self.kappa) + absent * math.log1p(-self.kappa)

    def log_prior(self, structure: NetworkStructure) -> float:
        return sum(
            self.family_log_prior(structure, i, structure.parent_indices[i])
            for i in range(structure.n_variables)
        )


@dataclass(frozen=True)
class ScoreReport:
    """log p(S) + log p(D|S), with the marginal split by family."""

    log_prior: float
    log_marginal: float
    total: float
    per_family: tuple[float, ...]
    names: tuple[str, ...] = ()


def bd_log_marginal(structure: NetworkStructure, priors: DirichletSpec, counts: FamilyCounts) -> MarginalLikelihood:
    """log p(D | S) for complete data (Cooper-Herskovits form), per family and total."""
    if priors.structure != structure or counts.structure != structure:
        raise ShapeMismatch("priors and counts must belong to the scored structure")
    per = tuple(
        family_marginal_loglik(a, n) for a, n in zip(priors.alpha, counts.counts)
    )
    return MarginalLikelihood(math.fsum(per), per)


def _require_complete(structure, dataset):
    data = dataset.aligned(structure)
    if not data.is_complete:
        raise IncompleteData("this criterion needs complete data")
    return data


def sequential_predictive_log(structure: NetworkStructure, priors: DirichletSpec, dataset: DataSet) -> float:
    """Sum over cases of log p(x_l | x_1..x_{l-1}, S), updating counts as it goes."""
    data = _require_complete(structure, dataset)
    alpha = [np.array(a) for a in priors.alpha]
    cards = structure.cardinalities
    total = 0.0
    for row in data.codes.tolist():
        for i in range(structure.n_variables):
            j = 0
            for p in structure.parent_indices[i]:
                j = j * cards[p] + row[p]
            a = alpha[i][j]
            total += math.log(a[row[i]] / a.sum())
            a[row[i]] += 1.0
    return total


def log_posterior_score(
    structure: NetworkStructure,
    structure_prior: StructurePrior,
    priors: DirichletSpec,
    counts: FamilyCounts,
) -> ScoreReport:
    """Relative log posterior log p(S) + log p(D|S); p(D) is omitted."""
    structure_prior.check(structure)
    ml = bd_log_marginal(structure, priors, counts)
    lp = structure_prior.log_prior(structure)
    return ScoreReport(lp, ml.total, lp + ml.total, ml.per_family, structure.names)


def ml_parameters(structure: NetworkStructure, counts: FamilyCounts) -> ParameterSet:
    """N_ijk / N_ij, with unvisited configurations set to uniform rows."""
    return ParameterSet.normalized(structure, counts.counts)


def parameter_dimension(structure: NetworkStructure) -> int:
    """d = sum_i q_i (r_i - 1)."""
    return sum(
        structure.n_configs(i) * (structure.cardinalities[i] - 1)
        for i in range(structure.n_variables)
    )


class BicReport(NamedTuple):
    loglik: float
    dimension: int
    penalty: float
    score: float


def bic_score(structure: NetworkStructure, params: ParameterSet, dataset: DataSet) -> BicReport:
    """log p(D | theta, S) - d/2 log N."""
    data = _require_complete(structure, dataset)
    n = data.n_cases
    if n == 0:
        raise EmptyDataset("BIC is undefined for an empty data set")
    counts = count_sufficient_stats(structure, data)
    loglik = 0.0
    for theta, cnt in zip(params.theta, counts.counts):
        mask = cnt > 0
        with np.errstate(divide="ignore"):
            loglik += float(np.sum(cnt[mask] * np.log(theta[mask])))
    d = parameter_dimension(structure)
    penalty = 0.5 * d * math.log(n)
    return BicReport(loglik, d, penalty, loglik - penalty)


def local_criterion(structure: NetworkStructure, priors: DirichletSpec, dataset: DataSet, target: str) -> float:
    """Sum over cases of log p(target_l | other variables_l, first l-1 cases).

    Each prediction uses the posterior-mean parameters after the earlier
    cases, queried by exact inference.
    """
    data = _require_complete(structure, dataset)
    t = structure.index(target)
    cards = structure.cardinalities
    alpha = [np.array(a) for a in priors.alpha]
    total = 0.0
    for row in data.codes.tolist():
        params = ParameterSet(structure, [a / a.sum(axis=1, keepdims=True) for a in alpha])
        evidence = {
            v.name: v.states[c] for k, (v, c) in enumerate(zip(structure.variables, row)) if k != t
        }
        res = query(structure, params, [target], evidence)
        total += math.log(res.table[row[t]])
        for i in range(structure.n_variables):
            j = 0
            for p in structure.parent_indices[i]:
                j = j * cards[p] + row[p]
            alpha[i][j, row[i]] += 1.0
    return total
