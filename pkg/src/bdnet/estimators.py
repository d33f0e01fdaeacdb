"""scikit-learn style wrappers over the functional API.

The estimators accept a :class:`~bdnet.core.DataSet`, a pandas DataFrame
(columns are variables, ``None``/NaN are missing) or a 2-D array of state
labels together with explicit ``variables``.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import (
    MISSING_CODE,
    DataSet,
    NetworkStructure,
    ParameterSet,
    VariableSpec,
    count_sufficient_stats,
    joint_probability,
)
from .errors import SchemaMismatch
from .incomplete import em_fit
from .inference import query
from .params import BDePrior, dirichlet_update
from .scoring import Constraints, StructurePrior, log_posterior_score
from .search import (
    AnnealingSchedule,
    compelled_edges,
    exhaustive_search,
    greedy_search,
    simulated_annealing,
)


def _is_missing(x) -> bool:
    return x is None or (isinstance(x, float) and math.isnan(x))


def check_dataset(X, variables=None) -> DataSet:
    """Coerce ``X`` to a :class:`DataSet`.

    With ``variables`` given, the result uses exactly those variables (and
    their order); otherwise states are inferred from the observed labels,
    sorted, which is only sensible for exploratory use.
    """
    if isinstance(X, DataSet):
        if variables is None:
            return X
        return X.aligned(NetworkStructure.empty(variables))
    if hasattr(X, "columns"):
        names = [str(c) for c in X.columns]
        rows = [list(r) for r in X.itertuples(index=False, name=None)]
    else:
        arr = np.asarray(X, dtype=object)
        if arr.ndim != 2:
            raise SchemaMismatch(f"expected a 2-D array of cases, got {arr.ndim} dimension(s)")
        rows = arr.tolist()
        names = None
    rows = [[None if _is_missing(x) else str(x) for x in r] for r in rows]
    if variables is None:
        if names is None:
            raise SchemaMismatch("array input needs explicit variables")
        variables = [
            VariableSpec(n, sorted({r[c] for r in rows if r[c] is not None}))
            for c, n in enumerate(names)
        ]
        return DataSet.from_rows(variables, rows)
    variables = tuple(variables)
    if names is not None:
        if sorted(names) != sorted(v.name for v in variables):
            raise SchemaMismatch(f"columns {names} do not match variables {[v.name for v in variables]}")
        cols = [names.index(v.name) for v in variables]
        rows = [[r[c] for c in cols] for r in rows]
    return DataSet.from_rows(variables, rows)


def _as_structure(structure, variables) -> NetworkStructure:
    if structure is None:
        return NetworkStructure.empty(variables)
    if isinstance(structure, NetworkStructure):
        return structure
    return NetworkStructure.from_arcs(variables, structure)


class DiscreteBayesNet(BaseEstimator):
    """Parameters of a fixed structure, learned with a BDe prior.

    Complete data give the exact Dirichlet posterior; incomplete data are
    handled with EM (``em_mode`` ``"map"`` or ``"ml"``).

    Parameters
    ----------
    structure : NetworkStructure, list of (parent, child) arcs, or None
        ``None`` means no arcs.
    variables : sequence of VariableSpec, optional
        Required for array input; inferred from DataFrame labels otherwise.
    target : str, optional
        Variable predicted by :meth:`predict` and :meth:`predict_proba`.
    """

    def __init__(
        self,
        structure=None,
        variables=None,
        ess=1.0,
        prior_network=None,
        target=None,
        em_mode="map",
        tol=1e-8,
        max_iter=1000,
        random_state=0,
    ):
        self.structure = structure
        self.variables = variables
        self.ess = ess
        self.prior_network = prior_network
        self.target = target
        self.em_mode = em_mode
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        variables = self.variables
        if variables is None and isinstance(self.structure, NetworkStructure):
            variables = self.structure.variables
        data = check_dataset(X, variables)
        structure = _as_structure(self.structure, data.variables)
        data = data.aligned(structure)
        priors = BDePrior(structure.variables, self.ess, self.prior_network).dirichlet(structure)
        if data.is_complete:
            self.posterior_ = dirichlet_update(priors, count_sufficient_stats(structure, data))
            self.params_ = self.posterior_.mean()
            self.em_result_ = None
        else:
            self.posterior_ = None
            self.em_result_ = em_fit(structure, priors, data, self.em_mode, tol=self.tol,
                                     max_iter=self.max_iter, seed=self.random_state)
            self.params_ = self.em_result_.params
        self.structure_ = structure
        self.n_features_in_ = structure.n_variables
        self.feature_names_in_ = np.array(structure.names, dtype=object)
        return self

    def _target(self):
        if self.target is None:
            raise SchemaMismatch("set target= to predict")
        return self.structure_.index(self.target)

    def predict_proba(self, X) -> np.ndarray:
        """p(target | the other observed entries of each row), shape (n, r)."""
        check_is_fitted(self, "params_")
        t = self._target()
        data = check_dataset(X, self.structure_.variables)
        s = self.structure_
        out = np.empty((data.n_cases, s.variables[t].cardinality))
        for n, row in enumerate(data.codes):
            evidence = {s.names[i]: s.variables[i].states[c]
                        for i, c in enumerate(row) if c != MISSING_CODE and i != t}
            out[n] = query(s, self.params_, [self.target], evidence).table
        return out

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        states = np.array(self.structure_.variables[self._target()].states, dtype=object)
        return states[np.argmax(proba, axis=1)]

    def score_samples(self, X) -> np.ndarray:
        """Log probability of the observed part of each row."""
        check_is_fitted(self, "params_")
        s = self.structure_
        data = check_dataset(X, s.variables)
        return np.array([_log_evidence(s, self.params_, row) for row in data.codes])

    def score(self, X, y=None) -> float:
        """Mean log probability per row."""
        return float(np.mean(self.score_samples(X)))


def _log_evidence(structure: NetworkStructure, params: ParameterSet, codes) -> float:
    observed = {structure.names[i]: structure.variables[i].states[c]
                for i, c in enumerate(codes) if c != MISSING_CODE}
    if not observed:
        return 0.0
    hidden = [n for n in structure.names if n not in observed]
    if hidden:
        return math.log(query(structure, params, hidden[:1], observed).evidence_probability)
    return math.log(joint_probability(structure, params, observed))


class StructureLearner(BaseEstimator):
    """Structure search scored by the BD marginal likelihood with BDe priors.

    After :meth:`fit`, ``structure_`` holds the best structure and
    ``score_`` its log posterior score; ``compelled_`` lists the arcs shared
    by its whole equivalence class (for at most eight variables).
    """

    def __init__(
        self,
        method="greedy",
        variables=None,
        ess=1.0,
        prior_network=None,
        no_parents=(),
        leaves=(),
        forbidden_arcs=(),
        max_parents=None,
        kappa=None,
        ordering=None,
        restarts=0,
        perturbation=3,
        schedule=None,
        random_state=0,
    ):
        self.method = method
        self.variables = variables
        self.ess = ess
        self.prior_network = prior_network
        self.no_parents = no_parents
        self.leaves = leaves
        self.forbidden_arcs = forbidden_arcs
        self.max_parents = max_parents
        self.kappa = kappa
        self.ordering = ordering
        self.restarts = restarts
        self.perturbation = perturbation
        self.schedule = schedule
        self.random_state = random_state

    def _structure_prior(self) -> StructurePrior:
        constraints = Constraints(
            no_parents=frozenset(self.no_parents),
            leaves=frozenset(self.leaves),
            forbidden_arcs=frozenset(tuple(a) for a in self.forbidden_arcs),
            max_parents=self.max_parents,
        )
        if self.kappa is None:
            return StructurePrior(constraints=constraints)
        return StructurePrior("per-arc", self.kappa, tuple(self.ordering or ()) or None, constraints)

    def fit(self, X, y=None):
        data = check_dataset(X, self.variables)
        bde = BDePrior(data.variables, self.ess, self.prior_network)
        prior = self._structure_prior()
        seed = 0 if self.random_state is None else int(self.random_state)
        if self.method == "exhaustive":
            self.ranking_ = exhaustive_search(data, bde, prior)
            self.outcome_ = None
            best = self.ranking_[0][1]
        elif self.method == "anneal":
            self.outcome_ = simulated_annealing(data, bde, prior, self.schedule or AnnealingSchedule(), seed)
            best = self.outcome_.best
        elif self.method == "greedy":
            self.outcome_ = greedy_search(data, bde, prior, restarts=self.restarts,
                                          perturbation=self.perturbation, seed=seed)
            best = self.outcome_.best
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.structure_ = best
        self.score_ = log_posterior_score(best, prior, bde.dirichlet(best),
                                          count_sufficient_stats(best, data)).total
        self.compelled_ = compelled_edges(best).compelled if best.n_variables <= 8 else None
        self.n_features_in_ = best.n_variables
        return self
