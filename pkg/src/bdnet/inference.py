"""Exact inference by variable elimination.

Factors are ``(variables, table)`` pairs where ``variables`` is a tuple of
variable indices naming the axes of ``table``. Products and marginals are
done in one ``np.einsum`` call per eliminated variable.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .core import (
    MISSING_CODE,
    NetworkStructure,
    ParameterSet,
    _as_codes,
    joint_table,
)
from .errors import OverlapTargetEvidence, SchemaMismatch, ZeroEvidenceProbability


@dataclass(frozen=True, eq=False)
class QueryResult:
    """Conditional distribution over ``targets`` given the evidence.

    ``table`` has one axis per target, in the order of ``targets``.
    """

    targets: tuple[str, ...]
    states: tuple[tuple[str, ...], ...]
    table: np.ndarray
    evidence_probability: float

    def probabilities(self, target=None) -> dict:
        """Marginal of one target as ``{state: probability}``."""
        name = self.targets[0] if target is None else target
        states = self.states[self.targets.index(name)]
        return dict(zip(states, self.marginal(name).tolist()))

    def marginal(self, target=None) -> np.ndarray:
        name = self.targets[0] if target is None else target
        k = self.targets.index(name)
        axes = tuple(a for a in range(len(self.targets)) if a != k)
        return self.table.sum(axis=axes)


def _normalize_targets(structure, targets):
    if isinstance(targets, str):
        targets = (targets,)
    targets = tuple(targets)
    idx = [structure.index(t) for t in targets]
    if len(set(idx)) != len(idx):
        raise SchemaMismatch("targets repeat a variable")
    return targets, idx


def _evidence_codes(structure, evidence) -> dict[int, int]:
    if not evidence:
        return {}
    if not isinstance(evidence, Mapping):
        raise TypeError("evidence must be a mapping from variable name to state")
    codes = _as_codes(structure, evidence)
    return {i: c for i, c in enumerate(codes) if c != MISSING_CODE}


def _ancestral_set(structure, nodes) -> set[int]:
    keep = set(nodes)
    stack = list(nodes)
    while stack:
        i = stack.pop()
        for p in structure.parent_indices[i]:
            if p not in keep:
                keep.add(p)
                stack.append(p)
    return keep


def _elimination_order(structure, factors, to_eliminate) -> list[int]:
    """Greedy min-degree order; ties broken by variable name."""
    names = structure.names
    scopes = [set(v) for v, _ in factors]
    remaining = set(to_eliminate)
    order = []
    while remaining:
        def degree(x):
            nb = set()
            for s in scopes:
                if x in s:
                    nb |= s
            nb.discard(x)
            return len(nb)

        x = min(remaining, key=lambda v: (degree(v), names[v]))
        merged = set()
        keep = []
        for s in scopes:
            if x in s:
                merged |= s
            else:
                keep.append(s)
        merged.discard(x)
        scopes = keep + [merged]
        remaining.discard(x)
        order.append(x)
    return order


def _cpt_factors(structure, params, nodes, evidence):
    cards = structure.cardinalities
    factors = []
    for i in sorted(nodes):
        axes = tuple(structure.parent_indices[i]) + (i,)
        table = params.theta[i].reshape([cards[a] for a in axes])
        index = tuple(evidence.get(a, slice(None)) for a in axes)
        table = table[index]
        axes = tuple(a for a in axes if a not in evidence)
        factors.append((axes, np.asarray(table, dtype=float)))
    return factors


def _einsum(factors, out_axes):
    operands = []
    for axes, table in factors:
        operands += [table, list(axes)]
    if not operands:
        return np.array(1.0)
    return np.einsum(*operands, list(out_axes), optimize=False)


def query(structure: NetworkStructure, params: ParameterSet, targets, evidence=None) -> QueryResult:
    """Exact p(targets | evidence) by variable elimination.

    Only the ancestors of the targets and evidence are used; every other
    variable is barren and sums to one.

    Raises ``ZeroEvidenceProbability`` if the evidence is impossible.
    """
    targets, t_idx = _normalize_targets(structure, targets)
    ev = _evidence_codes(structure, evidence)
    overlap = set(t_idx) & set(ev)
    if overlap:
        raise OverlapTargetEvidence(
            "variables are both target and evidence: "
            + ", ".join(structure.names[i] for i in sorted(overlap))
        )
    relevant = _ancestral_set(structure, set(t_idx) | set(ev))
    factors = _cpt_factors(structure, params, relevant, ev)
    hidden = relevant - set(t_idx) - set(ev)
    for x in _elimination_order(structure, factors, hidden):
        involved = [f for f in factors if x in f[0]]
        factors = [f for f in factors if x not in f[0]]
        out = sorted(set().union(*(set(a) for a, _ in involved)) - {x})
        factors.append((tuple(out), _einsum(involved, out)))
    table = _einsum(factors, t_idx)
    z = float(table.sum())
    if not z > 0.0:
        raise ZeroEvidenceProbability("the evidence has probability zero under the network")
    return _result(structure, targets, t_idx, table / z, z)


def _result(structure, targets, t_idx, table, z):
    states = tuple(structure.variables[i].states for i in t_idx)
    return QueryResult(targets, states, table, z)


def enumerate_query(structure: NetworkStructure, params: ParameterSet, targets, evidence=None) -> QueryResult:
    """Same contract as :func:`query`, computed from the full joint table.

    Exponential in the number of variables; intended as a reference.
    """
    targets, t_idx = _normalize_targets(structure, targets)
    ev = _evidence_codes(structure, evidence)
    if set(t_idx) & set(ev):
        raise OverlapTargetEvidence("variables are both target and evidence")
    joint = joint_table(params)
    index = tuple(ev.get(a, slice(None)) for a in range(structure.n_variables))
    sliced = joint[index]
    free = [a for a in range(structure.n_variables) if a not in ev]
    marg = sliced.sum(axis=tuple(k for k, a in enumerate(free) if a not in t_idx))
    kept = [a for a in free if a in t_idx]
    marg = np.transpose(marg, [kept.index(t) for t in t_idx])
    z = float(marg.sum())
    if not z > 0.0:
        raise ZeroEvidenceProbability("the evidence has probability zero under the network")
    return _result(structure, targets, t_idx, marg / z, z)


def _family_posteriors_codes(structure, params, codes):
    """Family tables for one case given as state codes, plus p(observed)."""
    cards = structure.cardinalities
    observed = {i: c for i, c in enumerate(codes) if c != MISSING_CODE}
    evidence = {structure.names[i]: structure.variables[i].states[c] for i, c in observed.items()}
    tables = []
    p_obs = None
    for i in range(structure.n_variables):
        members = tuple(structure.parent_indices[i]) + (i,)
        full = np.zeros([cards[m] for m in members])
        hidden = [m for m in members if m not in observed]
        index = tuple(observed.get(m, slice(None)) for m in members)
        if hidden:
            res = query(structure, params, [structure.names[m] for m in hidden], evidence)
            full[index] = res.table
            p_obs = res.evidence_probability
        else:
            full[index] = 1.0
        tables.append(full.reshape(structure.family_shape(i)))
    if p_obs is None:
        # fully observed case: p(y) is the joint probability itself
        p_obs = 1.0
        for i in range(structure.n_variables):
            j = 0
            for p in structure.parent_indices[i]:
                j = j * cards[p] + codes[p]
            p_obs *= params.theta[i][j, codes[i]]
        if not p_obs > 0.0:
            raise ZeroEvidenceProbability("the case has probability zero under the network")
    return tables, float(p_obs)


def family_posteriors(structure: NetworkStructure, params: ParameterSet, case) -> list[np.ndarray]:
    """p(x_i^k, pa_i^j | observed part of ``case``) for every family.

    ``case`` is a mapping or a sequence of labels with ``MISSING`` (``None``)
    for unobserved entries. Each returned array has shape ``(q_i, r_i)`` and
    sums to one; fully observed families are indicator tables.
    """
    codes = _as_codes(structure, case)
    tables, _ = _family_posteriors_codes(structure, params, codes)
    return tables
