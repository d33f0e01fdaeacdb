"""Shared helpers: random networks, forward sampling and brute-force oracles."""

import itertools
import math

import numpy as np
import pytest

from bdnet import DataSet, NetworkStructure, ParameterSet, VariableSpec
from bdnet.core import MISSING_CODE
from bdnet.datasets import fraud_data, fraud_prior_network, fraud_structures


def make_variables(cards, prefix="V"):
    return [VariableSpec(f"{prefix}{i}", [f"s{k}" for k in range(r)]) for i, r in enumerate(cards)]


def random_dag(rng, variables, max_parents=None, p_arc=0.5):
    """Random DAG: arcs only go forward in a random permutation."""
    n = len(variables)
    order = rng.permutation(n)
    parents = [[] for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p_arc:
                child, parent = order[b], order[a]
                if max_parents is None or len(parents[child]) < max_parents:
                    parents[child].append(parent)
    names = [v.name for v in variables]
    return NetworkStructure(variables, [tuple(names[p] for p in sorted(ps)) for ps in parents])


def random_params(rng, structure, concentration=1.0):
    theta = [rng.dirichlet(np.full(r, concentration), size=q) for q, r in
             (structure.family_shape(i) for i in range(structure.n_variables))]
    return ParameterSet(structure, theta)


def random_network(rng, n_vars, max_states=3, max_parents=None):
    cards = rng.integers(2, max_states + 1, size=n_vars)
    variables = make_variables(cards)
    structure = random_dag(rng, variables, max_parents)
    return structure, random_params(rng, structure)


def forward_sample(rng, structure, params, n):
    codes = np.zeros((n, structure.n_variables), dtype=np.int64)
    for i in structure.order:
        ps = structure.parent_indices[i]
        q, r = structure.family_shape(i)
        j = np.ravel_multi_index(tuple(codes[:, ps].T), [structure.cardinalities[p] for p in ps]) if ps else \
            np.zeros(n, dtype=np.int64)
        cum = np.cumsum(params.theta[i][j], axis=1)
        u = rng.random(n)[:, None]
        codes[:, i] = np.minimum((u > cum).sum(axis=1), r - 1)
    return DataSet(structure.variables, codes)


def hide(rng, dataset, fraction):
    codes = dataset.codes.copy()
    codes[rng.random(codes.shape) < fraction] = MISSING_CODE
    return DataSet(dataset.variables, codes)


def brute_joint(structure, params):
    """Full joint as a dict from code tuples to probability, by direct products."""
    out = {}
    for codes in itertools.product(*(range(r) for r in structure.cardinalities)):
        p = 1.0
        for i in range(structure.n_variables):
            j = 0
            for pa in structure.parent_indices[i]:
                j = j * structure.cardinalities[pa] + codes[pa]
            p *= params.theta[i][j, codes[i]]
        out[codes] = p
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def fraud():
    s1, s2 = fraud_structures()
    return {"prior": fraud_prior_network(), "s1": s1, "s2": s2, "data": fraud_data()}


def _log_bd(alpha, counts):
    """BD log marginal from first principles (math.lgamma), summed over families."""
    total = 0.0
    for a, n in zip(alpha, counts):
        for a_row, n_row in zip(a, n):
            total += math.lgamma(a_row.sum()) - math.lgamma(a_row.sum() + n_row.sum())
            total += sum(math.lgamma(x + y) - math.lgamma(x) for x, y in zip(a_row, n_row))
    return total


def _compositions(m, k):
    """All ways to split m exchangeable cases over k completions."""
    if k == 1:
        yield (m,)
        return
    for first in range(m + 1):
        for rest in _compositions(m - first, k - 1):
            yield (first,) + rest


def completion_oracle(structure, priors, dataset):
    """Exact posterior means of theta given incomplete data.

    Cases sharing an observation pattern are exchangeable, so completions are
    enumerated as allocations of each group's cases over the group's possible
    completions, weighted by the multinomial coefficient times p(D_completed).
    """
    cards = structure.cardinalities
    patterns, sizes = np.unique(dataset.aligned(structure).codes, axis=0, return_counts=True)
    groups = []
    for pat, m in zip(patterns.tolist(), sizes.tolist()):
        hidden = [v for v, c in enumerate(pat) if c == MISSING_CODE]
        fills = []
        for combo in itertools.product(*(range(cards[v]) for v in hidden)):
            row = list(pat)
            for v, c in zip(hidden, combo):
                row[v] = c
            fills.append(tuple(row))
        groups.append((fills, m))

    def family_cell(i, row):
        j = 0
        for p in structure.parent_indices[i]:
            j = j * cards[p] + row[p]
        return j, row[i]

    log_w, means = [], []
    for alloc in itertools.product(*(_compositions(m, len(f)) for f, m in groups)):
        counts = [np.zeros(structure.family_shape(i)) for i in range(structure.n_variables)]
        log_coef = 0.0
        for (fills, m), parts in zip(groups, alloc):
            log_coef += math.lgamma(m + 1) - sum(math.lgamma(x + 1) for x in parts)
            for row, x in zip(fills, parts):
                if x:
                    for i in range(structure.n_variables):
                        counts[i][family_cell(i, row)] += x
        log_w.append(log_coef + _log_bd(priors.alpha, counts))
        means.append([(a + n) / (a + n).sum(axis=1, keepdims=True) for a, n in zip(priors.alpha, counts)])
    w = np.exp(np.array(log_w) - max(log_w))
    w /= w.sum()
    return [sum(wk * m[i] for wk, m in zip(w, means)) for i in range(structure.n_variables)]


def observed_loglik_grid(structure, dataset, thetas):
    """Observed-data log likelihood for a batch of flattened free parameters.

    Binary variables only: ``thetas`` has shape (G, sum_i q_i) and holds
    p(X_i = s0 | pa_i = j) for every family row in order.
    """
    n = structure.n_variables
    states = np.array(list(itertools.product([0, 1], repeat=n)))
    g = thetas.shape[0]
    joint = np.ones((g, states.shape[0]))
    offset = 0
    for i in range(n):
        ps = structure.parent_indices[i]
        j = np.ravel_multi_index(tuple(states[:, ps].T), [2] * len(ps)) if ps else np.zeros(len(states), int)
        p0 = thetas[:, offset + j]
        joint *= np.where(states[:, i] == 0, p0, 1.0 - p0)
        offset += structure.n_configs(i)
    patterns, sizes = np.unique(dataset.aligned(structure).codes, axis=0, return_counts=True)
    masks = np.all((patterns[:, None, :] == MISSING_CODE) | (patterns[:, None, :] == states[None]), axis=2)
    with np.errstate(divide="ignore"):
        return np.log(joint @ masks.T.astype(float)) @ sizes


def grid_search_ml(structure, dataset, coarse=None, rounds=12, keep=4):
    """Zooming grid search for the ML observed-data log likelihood (binary variables).

    A coarse grid over the unit cube seeds ``keep`` centres; each round then
    scans a local stencil of half the previous step around them. The grid is
    thinned for higher dimensions to keep the point count manageable.
    """
    d = sum(structure.n_configs(i) for i in range(structure.n_variables))
    if coarse is None:
        coarse = 11 if d <= 5 else 5
    axis = np.linspace(0.0, 1.0, coarse)
    grid = np.array(list(itertools.product(axis, repeat=d)))
    vals = observed_loglik_grid(structure, dataset, grid)
    order = np.argsort(vals)[::-1][:keep]
    centers, best = grid[order], float(vals[order[0]])
    step = 1.0 / (coarse - 1)
    local = np.linspace(-1.0, 1.0, 5 if d <= 5 else 3)
    offsets = np.array(list(itertools.product(local, repeat=d)))
    for _ in range(rounds):
        cand = np.clip((centers[:, None, :] + step * offsets[None]).reshape(-1, d), 0.0, 1.0)
        cand = np.unique(cand, axis=0)
        vals = observed_loglik_grid(structure, dataset, cand)
        order = np.argsort(vals)[::-1][:keep]
        centers = cand[order]
        best = max(best, float(vals[order[0]]))
        step /= 2.0
    return best


# acceptance criteria report lines, printed again at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
