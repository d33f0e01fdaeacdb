"""Learning parameters from cases with missing entries.

Missing entries are assumed to be missing independently of their values.
Three tools are provided:

* :func:`em_fit` finds a local ML or MAP configuration by EM;
* :func:`gibbs_posterior` estimates posterior means by Gibbs sampling;
* :func:`single_case_posterior` gives the exact Dirichlet-mixture posterior
  of one family row after a single incomplete case. The number of mixture
  components grows exponentially with the number of cases, so this is kept
  to one case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    MISSING_CODE,
    DataSet,
    DirichletSpec,
    NetworkStructure,
    ParameterSet,
    _as_codes,
    count_sufficient_stats,
    family_config_codes,
    joint_table,
)
from .errors import (
    InvariantViolation,
    ZeroCompletionProbability,
    ZeroEvidenceProbability,
    ZeroFamilyMass,
)
from .inference import _family_posteriors_codes, query

#: Largest joint state space for which the E-step works on the full joint table.
JOINT_ESTEP_LIMIT = 2**16

INIT_POLICIES = ("prior-mean", "uniform", "random")


@dataclass(frozen=True)
class EmResult:
    params: ParameterSet
    mode: str
    trace: tuple[float, ...]
    iterations: int
    converged: bool
    init: str = "prior-mean"

    @property
    def objective(self) -> float:
        return self.trace[-1]


class _JointEStep:
    """Expected counts from the full joint table, one row per distinct case."""

    def __init__(self, structure, codes):
        self.structure = structure
        cards = structure.cardinalities
        patterns, self.weights = np.unique(codes, axis=0, return_counts=True)
        states = np.indices(cards).reshape(len(cards), -1).T  # (S, n)
        mask = np.ones((patterns.shape[0], states.shape[0]), dtype=bool)
        for v in range(len(cards)):
            obs = patterns[:, v]
            mask &= (obs[:, None] == MISSING_CODE) | (obs[:, None] == states[None, :, v])
        self.mask = mask.astype(float)
        self.family_cells = []
        for i in range(structure.n_variables):
            j = family_config_codes(states, structure.parent_indices[i], cards)
            self.family_cells.append(j * cards[i] + states[:, i])

    def __call__(self, params):
        s = self.structure
        joint = joint_table(params).ravel()
        weighted = self.mask * joint
        p_obs = weighted.sum(axis=1)
        if np.any(p_obs <= 0):
            raise ZeroEvidenceProbability("a case has probability zero under the current parameters")
        w = (self.weights / p_obs) @ weighted
        expected = []
        for i in range(s.n_variables):
            q, r = s.family_shape(i)
            expected.append(np.bincount(self.family_cells[i], weights=w, minlength=q * r).reshape(q, r))
        return expected, float(np.dot(self.weights, np.log(p_obs)))


class _CaseEStep:
    """Expected counts by exact inference, one query set per distinct case."""

    def __init__(self, structure, codes):
        self.structure = structure
        self.patterns, self.weights = np.unique(codes, axis=0, return_counts=True)

    def __call__(self, params):
        s = self.structure
        expected = [np.zeros(s.family_shape(i)) for i in range(s.n_variables)]
        loglik = 0.0
        for row, w in zip(self.patterns.tolist(), self.weights.tolist()):
            tables, p_obs = _family_posteriors_codes(s, params, row)
            for acc, t in zip(expected, tables):
                acc += w * t
            loglik += w * math.log(p_obs)
        return expected, loglik


def expected_counts(structure: NetworkStructure, params: ParameterSet, dataset: DataSet):
    """E[N_ijk] under ``params`` and the observed-data log likelihood."""
    data = dataset.aligned(structure)
    return _estep_for(structure, data.codes)(params)


def _estep_for(structure, codes):
    size = int(np.prod(structure.cardinalities, dtype=np.int64))
    if size <= JOINT_ESTEP_LIMIT:
        return _JointEStep(structure, codes)
    return _CaseEStep(structure, codes)


def _initial_params(structure, priors, init, rng):
    if init == "prior-mean":
        if priors is None:
            return ParameterSet.uniform(structure)
        return priors.mean()
    if init == "uniform":
        return ParameterSet.uniform(structure)
    if init == "random":
        theta = [rng.dirichlet(np.ones(r), size=q) for q, r in
                 (structure.family_shape(i) for i in range(structure.n_variables))]
        return ParameterSet.normalized(structure, theta)
    raise InvariantViolation(f"unknown init policy {init!r}; expected one of {INIT_POLICIES}")


def _log_prior_kernel(priors, params):
    # sum alpha_ijk log theta_ijk: the Dirichlet density in canonical coordinates
    total = 0.0
    for a, t in zip(priors.alpha, params.theta):
        with np.errstate(divide="ignore"):
            total += float(np.sum(a * np.log(t)))
    return total


def em_fit(
    structure: NetworkStructure,
    priors: DirichletSpec | None,
    dataset: DataSet,
    mode: str = "map",
    init: str | ParameterSet = "prior-mean",
    tol: float = 1e-6,
    max_iter: int = 1000,
    seed: int | None = None,
) -> EmResult:
    """EM to a local ML or MAP configuration.

    The MAP M-step is ``(alpha + E[N]) / sum_k (alpha + E[N])``, the MAP in
    canonical (log-odds) coordinates; its objective is the observed-data
    log likelihood plus ``sum alpha log theta``. The ML objective is the
    observed-data log likelihood alone. Iteration stops once the objective
    improves by less than ``tol`` relative to its magnitude.

    In ML mode a parent configuration with no expected mass keeps its
    current row; the likelihood does not depend on it.
    """
    mode = mode.lower()
    if mode not in ("ml", "map"):
        raise InvariantViolation(f"mode must be 'ml' or 'map', not {mode!r}")
    if mode == "map" and priors is None:
        raise InvariantViolation("MAP mode needs Dirichlet priors")
    data = dataset.aligned(structure)
    if mode == "ml" and data.n_cases == 0:
        raise ZeroFamilyMass("no cases: the ML configuration is undefined")
    rng = np.random.default_rng(seed)
    if isinstance(init, ParameterSet):
        params, init_name = init, "given"
    else:
        params, init_name = _initial_params(structure, priors, init, rng), init

    estep = _estep_for(structure, data.codes)

    def objective(params, loglik):
        return loglik if mode == "ml" else loglik + _log_prior_kernel(priors, params)

    expected, loglik = estep(params)
    obj = objective(params, loglik)
    trace = [obj]
    converged = False
    iterations = 0
    while iterations < max_iter:
        theta = []
        for i, e in enumerate(expected):
            w = e + priors.alpha[i] if mode == "map" else e
            tot = w.sum(axis=1, keepdims=True)
            row = np.where(tot > 0, w / np.where(tot > 0, tot, 1.0), params.theta[i])
            theta.append(row / row.sum(axis=1, keepdims=True))
        params = ParameterSet(structure, theta)
        expected, loglik = estep(params)
        new = objective(params, loglik)
        trace.append(new)
        iterations += 1
        if new - obj <= tol * max(abs(new), 1e-300):
            converged = True
            break
        obj = new
    return EmResult(params, mode, tuple(trace), iterations, converged, init_name)


def em_restarts(structure, priors, dataset, n_restarts=10, mode="map", tol=1e-6, max_iter=1000, seed=0):
    """Best of ``n_restarts`` EM runs from random starts (seeds ``[seed, r]``)."""
    best = None
    for r in range(n_restarts):
        res = em_fit(structure, priors, dataset, mode=mode, init="random",
                     tol=tol, max_iter=max_iter, seed=[seed, r])
        if best is None or res.objective > best.objective:
            best = res
    return best


@dataclass(frozen=True, eq=False)
class GibbsSummary:
    """Posterior means of the parameters with Monte-Carlo standard errors."""

    means: tuple[np.ndarray, ...]
    std_errors: tuple[np.ndarray, ...]
    iterations: int
    burn_in: int
    seed: int | None
    init_policy: str = "prior-predictive marginal"
    sampled: bool = True

    def as_params(self, structure) -> ParameterSet:
        return ParameterSet.normalized(structure, self.means)


def gibbs_posterior(
    structure: NetworkStructure,
    priors: DirichletSpec,
    dataset: DataSet,
    iterations: int = 2000,
    burn_in: int = 200,
    seed: int | None = 0,
    n_batches: int = 50,
) -> GibbsSummary:
    """Posterior means of theta from a Gibbs sampler over the missing entries.

    Missing entries start as draws from each variable's marginal under the
    prior-mean network. Each sweep visits variables in declaration order
    and, within a variable, its missing cases in order, resampling each
    entry from its full conditional (a ratio of complete-data marginal
    likelihoods). After ``burn_in`` sweeps, the exact posterior mean given
    the current completion is averaged (Rao-Blackwellization). Standard
    errors use batch means over ``n_batches`` batches.
    """
    data = dataset.aligned(structure)
    n = structure.n_variables
    cards = structure.cardinalities
    if data.is_complete:
        post = [a + c for a, c in zip(priors.alpha, count_sufficient_stats(structure, data).counts)]
        means = tuple(p / p.sum(axis=1, keepdims=True) for p in post)
        return GibbsSummary(
            means, tuple(np.zeros_like(m) for m in means), iterations, burn_in, seed,
            init_policy="none (complete data)", sampled=False,
        )
    if iterations <= burn_in:
        raise InvariantViolation("iterations must exceed burn_in")

    rng = np.random.default_rng(seed)
    prior_params = priors.mean()
    rows = data.codes.tolist()
    marginals = [query(structure, prior_params, [v.name]).table for v in structure.variables]
    for row in rows:
        for i in range(n):
            if row[i] == MISSING_CODE:
                row[i] = int(rng.choice(cards[i], p=marginals[i]))

    # posterior hyperparameters alpha + N for the current completion
    post = [np.array(a, dtype=float) for a in priors.alpha]
    pa = structure.parent_indices

    def config(f, row):
        j = 0
        for p in pa[f]:
            j = j * cards[p] + row[p]
        return j

    for row in rows:
        for f in range(n):
            post[f][config(f, row), row[f]] += 1.0
    post_rows = [p.sum(axis=1) for p in post]

    missing = [(i, l) for i in range(n) for l in range(len(rows)) if data.codes[l, i] == MISSING_CODE]
    touched = [(i,) + structure.children(i) for i in range(n)]

    kept = iterations - burn_in
    samples = [np.empty((kept,) + p.shape) for p in post]
    for sweep in range(iterations):
        uniforms = rng.random(len(missing))
        for u, (i, l) in zip(uniforms, missing):
            row = rows[l]
            fams = touched[i]
            for f in fams:
                j = config(f, row)
                post[f][j, row[f]] -= 1.0
                post_rows[f][j] -= 1.0
            weights = []
            for s in range(cards[i]):
                row[i] = s
                w = 1.0
                for f in fams:
                    j = config(f, row)
                    w *= post[f][j, row[f]] / post_rows[f][j]
                weights.append(w)
            total = sum(weights)
            if not total > 0:
                raise ZeroCompletionProbability(
                    f"no state of {structure.names[i]!r} in case {l + 1} has positive probability"
                )
            acc, choice = 0.0, cards[i] - 1
            for s, w in enumerate(weights):
                acc += w
                if u * total < acc:
                    choice = s
                    break
            row[i] = choice
            for f in fams:
                j = config(f, row)
                post[f][j, row[f]] += 1.0
                post_rows[f][j] += 1.0
        if sweep >= burn_in:
            for f in range(n):
                samples[f][sweep - burn_in] = post[f] / post_rows[f][:, None]

    n_batches = max(2, min(n_batches, kept))
    means, errors = [], []
    for s in samples:
        means.append(s.mean(axis=0))
        usable = (kept // n_batches) * n_batches
        batches = s[:usable].reshape((n_batches, -1) + s.shape[1:]).mean(axis=1)
        errors.append(batches.std(axis=0, ddof=1) / math.sqrt(n_batches))
    return GibbsSummary(tuple(means), tuple(errors), iterations, burn_in, seed)


@dataclass(frozen=True, eq=False)
class DirichletMixture:
    """Mixture of Dirichlet rows: ``components = ((weight, alpha_row), ...)``."""

    components: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        total = sum(w for w, _ in self.components)
        if any(w < 0 for w, _ in self.components) or abs(total - 1.0) > 1e-10:
            raise InvariantViolation("mixture weights must be non-negative and sum to 1")

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])

    def mean(self) -> np.ndarray:
        return sum(w * a / a.sum() for w, a in self.components)


def single_case_posterior(
    structure: NetworkStructure, priors: DirichletSpec, case, i, j: int
) -> DirichletMixture:
    """Posterior of theta_ij after one possibly incomplete case.

    Weight 1 - p(pa_i^j | y) stays on the prior; weight p(x_i^k, pa_i^j | y)
    goes to the prior with one extra count in cell k. Probabilities use the
    prior-mean parameters. Zero-weight components are dropped.
    """
    i = structure.index(i) if isinstance(i, str) else int(i)
    codes = _as_codes(structure, case)
    tables, _ = _family_posteriors_codes(structure, priors.mean(), codes)
    joint_row = tables[i][j]
    alpha = np.array(priors.alpha[i][j], dtype=float)
    p_config = float(joint_row.sum())
    comps = []
    rest = 1.0 - p_config
    if rest > 1e-15:
        comps.append((rest, alpha.copy()))
    for k, w in enumerate(joint_row):
        if w > 0:
            a = alpha.copy()
            a[k] += 1.0
            comps.append((float(w), a))
    total = sum(w for w, _ in comps)
    return DirichletMixture(tuple((w / total, a) for w, a in comps))
