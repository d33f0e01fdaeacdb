"""Variables, structures, parameters, data and sufficient statistics.

Indexing conventions used throughout the package:

* states are 0-based and follow the declaration order of a variable;
* the configuration index ``j`` of a parent set is mixed radix with the
  *last* listed parent varying fastest (C order), so ``j = 0`` for a
  variable without parents;
* per-family arrays (parameters, hyperparameters, counts) have shape
  ``(q_i, r_i)``.
"""

from __future__ import annotations

import heapq
import itertools
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CycleDetected,
    DuplicateVariable,
    IncompleteData,
    InvalidIndex,
    InvariantViolation,
    MissingParentValue,
    MissingValue,
    SchemaMismatch,
    ShapeMismatch,
    UnknownParent,
    UnknownState,
)

#: Marker for an unobserved entry in a case.
MISSING = None

#: Integer code used for missing entries in ``DataSet.codes``.
MISSING_CODE = -1


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class VariableSpec:
    """A discrete variable with an ordered list of state labels."""

    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if len(self.states) < 2:
            raise InvariantViolation(f"variable {self.name!r} needs at least 2 states")
        if len(set(self.states)) != len(self.states):
            raise InvariantViolation(f"variable {self.name!r} has duplicate states")

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def index(self, state) -> int:
        try:
            return self.states.index(str(state))
        except ValueError:
            raise UnknownState(f"{state!r} is not a state of {self.name!r}") from None


@dataclass(frozen=True)
class NetworkStructure:
    """A DAG over named discrete variables.

    ``parents[i]`` lists the parent names of ``variables[i]``; the order of
    that list fixes the parent-configuration index.
    """

    variables: tuple[VariableSpec, ...]
    parents: tuple[tuple[str, ...], ...]
    order: tuple[int, ...] = field(init=False, repr=False, compare=False)
    parent_indices: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "parents", tuple(tuple(p) for p in self.parents))
        if len(self.parents) != len(self.variables):
            raise InvariantViolation("one parent list is required per variable")
        object.__setattr__(self, "order", tuple(validate_dag(self)))
        pos = {v.name: i for i, v in enumerate(self.variables)}
        object.__setattr__(
            self, "parent_indices", tuple(tuple(pos[p] for p in ps) for ps in self.parents)
        )

    @classmethod
    def from_arcs(cls, variables, arcs=()):
        """Build from ``(parent, child)`` name pairs; arc order sets parent order."""
        variables = tuple(variables)
        names = [v.name for v in variables]
        parents = {n: [] for n in names}
        for p, c in arcs:
            if c not in parents:
                raise UnknownParent(f"arc target {c!r} is not a declared variable")
            parents[c].append(p)
        return cls(variables, tuple(tuple(parents[n]) for n in names))

    @classmethod
    def empty(cls, variables):
        variables = tuple(variables)
        return cls(variables, tuple(() for _ in variables))

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(v.cardinality for v in self.variables)

    def index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise SchemaMismatch(f"unknown variable {name!r}")

    def n_configs(self, i: int) -> int:
        """q_i, the number of parent configurations of variable ``i``."""
        cards = self.cardinalities
        return int(np.prod([cards[p] for p in self.parent_indices[i]], dtype=np.int64))

    def family_shape(self, i: int) -> tuple[int, int]:
        return self.n_configs(i), self.variables[i].cardinality

    @property
    def arcs(self) -> tuple[tuple[str, str], ...]:
        return tuple((p, v.name) for v, ps in zip(self.variables, self.parents) for p in ps)

    @property
    def n_arcs(self) -> int:
        return sum(len(p) for p in self.parents)

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(c for c, ps in enumerate(self.parent_indices) if i in ps)

    def with_parents(self, i: int, parent_indices) -> NetworkStructure:
        """Copy with the parents of variable ``i`` replaced (given as indices)."""
        parents = list(self.parents)
        parents[i] = tuple(self.variables[p].name for p in parent_indices)
        return NetworkStructure(self.variables, tuple(parents))

    def parent_sets(self) -> tuple[frozenset, ...]:
        return tuple(frozenset(p) for p in self.parent_indices)

    def same_graph(self, other: NetworkStructure) -> bool:
        """Equal arcs, ignoring the order in which parents are listed."""
        return self.names == other.names and self.parent_sets() == other.parent_sets()

    def __str__(self):
        parts = []
        for v, ps in zip(self.variables, self.parents):
            parts.append(f"[{v.name}|{','.join(ps)}]" if ps else f"[{v.name}]")
        return "".join(parts)


def validate_dag(structure: NetworkStructure) -> list[int]:
    """Return a topological order of variable indices.

    Among variables that are ready at the same time, the one declared first
    is emitted first, so the order is deterministic.
    """
    names = [v.name for v in structure.variables]
    pos = {}
    for i, n in enumerate(names):
        if n in pos:
            raise DuplicateVariable(f"variable {n!r} declared twice")
        pos[n] = i
    pa = []
    for i, ps in enumerate(structure.parents):
        idx = []
        for p in ps:
            if p not in pos:
                raise UnknownParent(f"parent {p!r} of {names[i]!r} is not a declared variable")
            if p == names[i]:
                raise CycleDetected([p, p])
            idx.append(pos[p])
        if len(set(idx)) != len(idx):
            raise InvariantViolation(f"variable {names[i]!r} lists a parent twice")
        pa.append(idx)

    n = len(names)
    indegree = [len(p) for p in pa]
    children = [[] for _ in range(n)]
    for c, ps in enumerate(pa):
        for p in ps:
            children[p].append(c)
    ready = [i for i in range(n) if indegree[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for c in children[i]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) < n:
        raise CycleDetected([names[i] for i in _find_cycle(pa, set(range(n)) - set(order))])
    return order


def _find_cycle(pa, remaining):
    # every remaining node has a remaining parent, so walking parents must loop
    start = min(remaining)
    seen = {}
    path = []
    node = start
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = next(p for p in pa[node] if p in remaining)
    cycle = path[seen[node]:]
    cycle.reverse()
    return cycle + [cycle[0]]


def _as_codes(structure: NetworkStructure, row, allow_missing=True) -> list[int]:
    """Translate a mapping or sequence of state labels into state codes."""
    n = structure.n_variables
    if isinstance(row, Mapping):
        unknown = set(row) - set(structure.names)
        if unknown:
            raise SchemaMismatch(f"unknown variables {sorted(unknown)}")
        values = [row.get(v.name, MISSING) for v in structure.variables]
    else:
        values = list(row)
        if len(values) != n:
            raise SchemaMismatch(f"row has {len(values)} entries, expected {n}")
    codes = []
    for v, x in zip(structure.variables, values):
        if x is MISSING:
            if not allow_missing:
                raise MissingValue(f"variable {v.name!r} has no value")
            codes.append(MISSING_CODE)
        else:
            codes.append(v.index(x))
    return codes


def parent_config_index(structure: NetworkStructure, variable, row) -> int:
    """Configuration index j of the parents of ``variable`` in ``row``.

    ``variable`` may be a name or an index; ``row`` is a mapping from names
    to labels or a sequence of labels in structure order.
    """
    i = structure.index(variable) if isinstance(variable, str) else int(variable)
    codes = _as_codes(structure, row)
    return _config_from_codes(structure, i, codes)


def _config_from_codes(structure, i, codes) -> int:
    cards = structure.cardinalities
    j = 0
    for p in structure.parent_indices[i]:
        if codes[p] == MISSING_CODE:
            raise MissingParentValue(
                f"parent {structure.variables[p].name!r} of "
                f"{structure.variables[i].name!r} is missing"
            )
        j = j * cards[p] + codes[p]
    return j


def config_states(structure: NetworkStructure, variable, j: int) -> tuple[str, ...]:
    """Inverse of :func:`parent_config_index`: parent state labels of config ``j``."""
    i = structure.index(variable) if isinstance(variable, str) else int(variable)
    pidx = structure.parent_indices[i]
    if not 0 <= j < structure.n_configs(i):
        raise InvalidIndex(f"configuration {j} out of range for {structure.names[i]!r}")
    if not pidx:
        return ()
    dims = [structure.cardinalities[p] for p in pidx]
    codes = np.unravel_index(j, dims)
    return tuple(structure.variables[p].states[c] for p, c in zip(pidx, codes))


def _check_family_arrays(structure, arrays, what):
    arrays = tuple(arrays)
    if len(arrays) != structure.n_variables:
        raise ShapeMismatch(f"{what}: expected {structure.n_variables} families, got {len(arrays)}")
    for i, a in enumerate(arrays):
        if a.shape != structure.family_shape(i):
            raise ShapeMismatch(
                f"{what}: family {structure.variables[i].name!r} has shape {a.shape}, "
                f"expected {structure.family_shape(i)}"
            )
    return arrays


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """Conditional probability tables ``theta[i][j, k]``."""

    structure: NetworkStructure
    theta: tuple[np.ndarray, ...]

    def __post_init__(self):
        theta = tuple(_frozen(t) for t in self.theta)
        _check_family_arrays(self.structure, theta, "ParameterSet")
        for i, t in enumerate(theta):
            if np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > 1e-12):
                raise InvariantViolation(
                    f"CPT of {self.structure.variables[i].name!r} has a row that is "
                    "negative or does not sum to 1"
                )
        object.__setattr__(self, "theta", theta)

    @classmethod
    def uniform(cls, structure):
        return cls(
            structure,
            [np.full(structure.family_shape(i), 1.0 / structure.cardinalities[i])
             for i in range(structure.n_variables)],
        )

    @classmethod
    def normalized(cls, structure, weights, empty="uniform"):
        """Row-normalize non-negative weights; all-zero rows become uniform."""
        theta = []
        for w in weights:
            w = np.asarray(w, dtype=float)
            tot = w.sum(axis=1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                t = np.where(tot > 0, w / np.where(tot > 0, tot, 1.0), 1.0 / w.shape[1])
            # renormalize to wash out rounding in the division
            t = t / t.sum(axis=1, keepdims=True)
            theta.append(t)
        return cls(structure, theta)

    def __eq__(self, other):
        return (
            isinstance(other, ParameterSet)
            and self.structure == other.structure
            and all(np.array_equal(a, b) for a, b in zip(self.theta, other.theta))
        )


@dataclass(frozen=True, eq=False)
class FamilyCounts:
    """Sufficient statistics ``counts[i][j, k]`` (N_ijk)."""

    structure: NetworkStructure
    counts: tuple[np.ndarray, ...]

    def __post_init__(self):
        counts = tuple(_frozen(c) for c in self.counts)
        _check_family_arrays(self.structure, counts, "FamilyCounts")
        if any(np.any(c < 0) for c in counts):
            raise InvariantViolation("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def zeros(cls, structure):
        return cls(structure, [np.zeros(structure.family_shape(i))
                               for i in range(structure.n_variables)])

    def row_totals(self, i: int) -> np.ndarray:
        """N_ij for family ``i``."""
        return self.counts[i].sum(axis=1)

    @property
    def n_cases(self) -> float:
        return float(self.counts[0].sum()) if self.counts else 0.0

    def __add__(self, other):
        if not isinstance(other, FamilyCounts) or other.structure != self.structure:
            raise ShapeMismatch("counts belong to different structures")
        return FamilyCounts(self.structure, [a + b for a, b in zip(self.counts, other.counts)])


@dataclass(frozen=True, eq=False)
class DirichletSpec:
    """Dirichlet hyperparameters ``alpha[i][j, k]``, all strictly positive."""

    structure: NetworkStructure
    alpha: tuple[np.ndarray, ...]

    def __post_init__(self):
        from .errors import NonPositiveAlpha

        alpha = tuple(_frozen(a) for a in self.alpha)
        _check_family_arrays(self.structure, alpha, "DirichletSpec")
        for i, a in enumerate(alpha):
            if not np.all(a > 0):
                raise NonPositiveAlpha(
                    f"hyperparameters of {self.structure.variables[i].name!r} must be > 0"
                )
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def constant(cls, structure, value=1.0):
        return cls(structure, [np.full(structure.family_shape(i), float(value))
                               for i in range(structure.n_variables)])

    def row_totals(self, i: int) -> np.ndarray:
        """alpha_ij for family ``i``."""
        return self.alpha[i].sum(axis=1)

    def mean(self) -> ParameterSet:
        """Posterior-mean (or prior-mean) parameters alpha_ijk / alpha_ij."""
        return ParameterSet(
            self.structure, [a / a.sum(axis=1, keepdims=True) for a in self.alpha]
        )

    def __eq__(self, other):
        return (
            isinstance(other, DirichletSpec)
            and self.structure == other.structure
            and all(np.array_equal(a, b) for a, b in zip(self.alpha, other.alpha))
        )


@dataclass(frozen=True, eq=False)
class DataSet:
    """Cases over a fixed list of variables.

    ``codes`` is an integer array of shape ``(n_cases, n_variables)`` holding
    state indices, with ``MISSING_CODE`` for unobserved entries.
    """

    variables: tuple[VariableSpec, ...]
    codes: np.ndarray

    def __post_init__(self):
        variables = tuple(self.variables)
        codes = np.array(self.codes, dtype=np.int64).reshape(-1, len(variables))
        cards = np.array([v.cardinality for v in variables], dtype=np.int64)
        if codes.size and (np.any(codes < MISSING_CODE) or np.any(codes >= cards)):
            raise UnknownState("state code out of range")
        codes.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_rows(cls, variables, rows, missing=MISSING):
        """Build from rows of state labels; ``missing`` marks unobserved entries."""
        variables = tuple(variables)
        codes = np.empty((len(rows), len(variables)), dtype=np.int64)
        for r, row in enumerate(rows):
            if len(row) != len(variables):
                raise SchemaMismatch(
                    f"case {r + 1} has {len(row)} entries, expected {len(variables)}"
                )
            for c, (v, x) in enumerate(zip(variables, row)):
                if x is MISSING or (missing is not MISSING and x == missing):
                    codes[r, c] = MISSING_CODE
                else:
                    try:
                        codes[r, c] = v.index(x)
                    except UnknownState as exc:
                        raise UnknownState(f"case {r + 1}, column {v.name!r}: {exc}") from None
        return cls(variables, codes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def n_cases(self) -> int:
        return self.codes.shape[0]

    def __len__(self):
        return self.n_cases

    @property
    def missing_mask(self) -> np.ndarray:
        return self.codes == MISSING_CODE

    @property
    def is_complete(self) -> bool:
        return not bool(self.missing_mask.any())

    def rows(self) -> list[tuple]:
        """Cases as tuples of labels, ``MISSING`` for unobserved entries."""
        return [
            tuple(MISSING if c == MISSING_CODE else v.states[c] for v, c in zip(self.variables, row))
            for row in self.codes.tolist()
        ]

    def subset(self, index) -> DataSet:
        return DataSet(self.variables, self.codes[index])

    def aligned(self, structure: NetworkStructure) -> DataSet:
        """Columns reordered to ``structure`` order, checking the schema."""
        if self.variables == structure.variables:
            return self
        if sorted(self.names) != sorted(structure.names):
            raise SchemaMismatch(
                f"data columns {list(self.names)} do not match network variables "
                f"{list(structure.names)}"
            )
        pos = {n: c for c, n in enumerate(self.names)}
        cols = [pos[n] for n in structure.names]
        for v in structure.variables:
            if self.variables[pos[v.name]].states != v.states:
                raise SchemaMismatch(f"states of {v.name!r} differ between data and network")
        return DataSet(structure.variables, self.codes[:, cols])

    def __eq__(self, other):
        return (
            isinstance(other, DataSet)
            and self.variables == other.variables
            and np.array_equal(self.codes, other.codes)
        )


def family_config_codes(codes: np.ndarray, parent_indices, cards) -> np.ndarray:
    """Vectorized configuration index for every row of a complete code matrix."""
    if not parent_indices:
        return np.zeros(codes.shape[0], dtype=np.int64)
    dims = tuple(cards[p] for p in parent_indices)
    return np.ravel_multi_index(tuple(codes[:, p] for p in parent_indices), dims)


def family_count_array(codes, i, parent_indices, cards) -> np.ndarray:
    """N_ijk for one family from a complete code matrix, shape ``(q_i, r_i)``."""
    r = cards[i]
    q = int(np.prod([cards[p] for p in parent_indices], dtype=np.int64))
    j = family_config_codes(codes, parent_indices, cards)
    flat = np.bincount(j * r + codes[:, i], minlength=q * r)
    return flat.reshape(q, r).astype(float)


def count_sufficient_stats(structure: NetworkStructure, dataset: DataSet) -> FamilyCounts:
    """Count N_ijk over a complete data set."""
    data = dataset.aligned(structure)
    if not data.is_complete:
        raise IncompleteData(
            "data set has missing entries; use bdnet.incomplete (em_fit, gibbs_posterior)"
        )
    cards = structure.cardinalities
    return FamilyCounts(
        structure,
        [family_count_array(data.codes, i, structure.parent_indices[i], cards)
         for i in range(structure.n_variables)],
    )


def joint_probability(structure: NetworkStructure, params: ParameterSet, assignment) -> float:
    """p(x) as the product of the local conditional probabilities."""
    codes = _as_codes(structure, assignment, allow_missing=False)
    p = 1.0
    for i in range(structure.n_variables):
        p *= params.theta[i][_config_from_codes(structure, i, codes), codes[i]]
    return float(p)


def joint_table(params: ParameterSet) -> np.ndarray:
    """Full joint distribution as an array with one axis per variable."""
    s = params.structure
    cards = s.cardinalities
    table = np.ones(cards)
    n = s.n_variables
    for i in range(n):
        axes = list(s.parent_indices[i]) + [i]
        cpt = params.theta[i].reshape([cards[a] for a in axes])
        # broadcast the CPT to the full joint shape
        order = np.argsort(axes)
        cpt = np.transpose(cpt, order)
        shape = [cards[k] if k in axes else 1 for k in range(n)]
        table = table * cpt.reshape(shape)
    return table


def all_assignments(structure: NetworkStructure):
    """Iterate over every full assignment as a tuple of state labels."""
    return itertools.product(*(v.states for v in structure.variables))
