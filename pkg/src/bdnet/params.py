"""Conjugate Dirichlet learning for multinomial families.

Hyperparameters must be strictly positive. A "minimum information" prior
such as Beta(0, 0) is only reachable as a limit; pass a small positive
number (for example 1e-6) if that is what you want.

Everything that is a likelihood is returned as a natural log.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .core import (
    DirichletSpec,
    FamilyCounts,
    NetworkStructure,
    ParameterSet,
    _as_codes,
    _config_from_codes,
)
from .errors import (
    InvalidIndex,
    NonPositiveAlpha,
    SchemaMismatch,
    ShapeMismatch,
    ZeroPriorProbability,
)
from .inference import query

#: Hyperparameters below this are rejected rather than clamped.
ALPHA_FLOOR = 1e-12


def dirichlet_update(prior: DirichletSpec, counts: FamilyCounts) -> DirichletSpec:
    """Posterior hyperparameters alpha_ijk + N_ijk."""
    if prior.structure != counts.structure:
        raise ShapeMismatch("prior and counts belong to different structures")
    return DirichletSpec(prior.structure, [a + n for a, n in zip(prior.alpha, counts.counts)])


def dirichlet_predictive(spec: DirichletSpec, i: int, j: int) -> np.ndarray:
    """Predictive distribution of X_i given parent configuration j."""
    if not 0 <= i < len(spec.alpha):
        raise InvalidIndex(f"no family {i}")
    a = spec.alpha[i]
    if not 0 <= j < a.shape[0]:
        raise InvalidIndex(f"family {i} has no configuration {j}")
    return a[j] / a[j].sum()


def family_marginal_loglik(alpha, counts) -> float:
    """log p(D) for one multinomial with a Dirichlet prior.

    ``alpha`` and ``counts`` are rows (one configuration) or ``(q, r)``
    arrays; in the latter case the configurations are summed.
    """
    alpha = np.asarray(alpha, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if alpha.shape != counts.shape:
        raise ShapeMismatch(f"alpha shape {alpha.shape} != counts shape {counts.shape}")
    if not np.all(alpha > 0):
        raise NonPositiveAlpha("Dirichlet hyperparameters must be > 0")
    a_tot = alpha.sum(axis=-1)
    n_tot = counts.sum(axis=-1)
    val = gammaln(a_tot) - gammaln(a_tot + n_tot)
    val = val + (gammaln(alpha + counts) - gammaln(alpha)).sum(axis=-1)
    return float(np.sum(val))


def network_predictive(structure: NetworkStructure, posterior: DirichletSpec, assignment) -> float:
    """p(x_{N+1} | D, S): product over families of posterior-mean entries."""
    codes = _as_codes(structure, assignment, allow_missing=False)
    p = 1.0
    for i in range(structure.n_variables):
        j = _config_from_codes(structure, i, codes)
        row = posterior.alpha[i][j]
        p *= row[codes[i]] / row.sum()
    return float(p)


@dataclass(frozen=True)
class BdePriorInputs:
    """Equivalent sample size plus a prior network encoding p(x | S_c)."""

    ess: float
    prior_network: ParameterSet | None = None

    def __post_init__(self):
        if not self.ess > 0:
            raise NonPositiveAlpha("equivalent sample size must be > 0")


class BDePrior:
    """Builds BDe hyperparameters for any family of a fixed variable set.

    alpha_ijk = ess * p(x_i^k, pa_i^j) under the prior network. With no
    prior network the joint is uniform. Family marginals are cached, so one
    instance can serve a whole structure search.
    """

    def __init__(self, variables, ess, prior_network: ParameterSet | None = None):
        self.inputs = BdePriorInputs(float(ess), prior_network)
        self.variables = tuple(variables)
        if prior_network is not None:
            net_vars = prior_network.structure.variables
            if sorted(v.name for v in net_vars) != sorted(v.name for v in self.variables):
                raise SchemaMismatch("prior network and target structure have different variables")
            by_name = {v.name: v for v in net_vars}
            for v in self.variables:
                if by_name[v.name].states != v.states:
                    raise SchemaMismatch(f"states of {v.name!r} differ from the prior network")
        self._cards = tuple(v.cardinality for v in self.variables)
        self._family = lru_cache(maxsize=None)(self._compute)

    @property
    def ess(self) -> float:
        return self.inputs.ess

    def family_alpha(self, i: int, parents) -> np.ndarray:
        """Hyperparameters of variable ``i`` with the given parent indices, shape (q, r)."""
        return self._family(int(i), tuple(int(p) for p in parents))

    def _compute(self, i, parents):
        cards = self._cards
        q = int(np.prod([cards[p] for p in parents], dtype=np.int64))
        r = cards[i]
        net = self.inputs.prior_network
        if net is None:
            alpha = np.full((q, r), self.ess / (q * r))
        else:
            names = [self.variables[p].name for p in parents] + [self.variables[i].name]
            joint = query(net.structure, net, names).table
            alpha = self.ess * joint.reshape(q, r)
        if np.any(alpha < ALPHA_FLOOR):
            raise ZeroPriorProbability(
                f"prior network gives probability ~0 to a joint event of family "
                f"{self.variables[i].name!r}; BDe hyperparameter would be 0"
            )
        alpha.setflags(write=False)
        return alpha

    def dirichlet(self, structure: NetworkStructure) -> DirichletSpec:
        if structure.variables != self.variables:
            raise SchemaMismatch("structure variables differ from the prior's")
        return DirichletSpec(
            structure,
            [self.family_alpha(i, structure.parent_indices[i]) for i in range(structure.n_variables)],
        )


class UniformDirichletPrior:
    """The same hyperparameter for every cell of every family (K2 uses 1)."""

    def __init__(self, variables, value=1.0):
        if not value > 0:
            raise NonPositiveAlpha("hyperparameter must be > 0")
        self.variables = tuple(variables)
        self.value = float(value)

    def family_alpha(self, i, parents):
        cards = [v.cardinality for v in self.variables]
        q = int(np.prod([cards[p] for p in parents], dtype=np.int64))
        return np.full((q, cards[i]), self.value)

    def dirichlet(self, structure):
        return DirichletSpec(
            structure,
            [self.family_alpha(i, structure.parent_indices[i]) for i in range(structure.n_variables)],
        )


def bde_priors(inputs: BdePriorInputs, target: NetworkStructure) -> DirichletSpec:
    """BDe hyperparameters for ``target`` from an ESS and a prior network.

    The prior network may have any structure over the same variables; the
    family marginals p(x_i, pa_i) use the *target* parents.
    """
    return BDePrior(target.variables, inputs.ess, inputs.prior_network).dirichlet(target)
