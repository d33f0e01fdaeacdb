"""Reading and writing networks, data sets and count tables.

Network document (JSON, fields always written in this order)::

    {
      "schema_version": 1,
      "variables": [{"name": "Fraud", "states": ["yes", "no"]}, ...],
      "arcs": [["Fraud", "Gas"], ...],
      "cpts": {"Gas": [[0.2, 0.8], [0.01, 0.99]], ...}
    }

Arcs are grouped by child; within a child their order is the parent
order, which fixes the CPT row order (last parent varies fastest).
``cpts`` is optional.

Counts table (text)::

    # comments start with '#'
    @variable SEX male female
    @variable CP yes no
    4 349 13 ...

One ``@variable`` line per variable, then whitespace-separated counts in
row-major order with the last variable varying fastest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    DataSet,
    NetworkStructure,
    ParameterSet,
    VariableSpec,
)
from .errors import (
    BayesNetError,
    InvariantViolation,
    LengthMismatch,
    NegativeCount,
    ParseError,
    SchemaMismatch,
    UnknownState,
)

SCHEMA_VERSION = 1
DEFAULT_MISSING = "?"


@dataclass(frozen=True, eq=False)
class NetworkDocument:
    structure: NetworkStructure
    params: ParameterSet | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        s = self.structure
        doc = {
            "schema_version": self.schema_version,
            "variables": [{"name": v.name, "states": list(v.states)} for v in s.variables],
            "arcs": [[p, c] for p, c in s.arcs],
        }
        if self.params is not None:
            doc["cpts"] = {v.name: t.tolist() for v, t in zip(s.variables, self.params.theta)}
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc) -> NetworkDocument:
        if not isinstance(doc, dict):
            raise ParseError("network document must be a JSON object")
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise InvariantViolation(f"unsupported schema_version {version!r}")
        try:
            variables = [VariableSpec(v["name"], v["states"]) for v in doc["variables"]]
            arcs = [tuple(a) for a in doc.get("arcs", [])]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed network document: {exc!r}") from None
        if any(len(a) != 2 for a in arcs):
            raise InvariantViolation("every arc must be a [parent, child] pair")
        structure = NetworkStructure.from_arcs(variables, arcs)
        params = None
        if "cpts" in doc and doc["cpts"] is not None:
            cpts = doc["cpts"]
            missing = [n for n in structure.names if n not in cpts]
            if missing:
                raise InvariantViolation(f"cpts missing for {missing}")
            try:
                theta = [np.array(cpts[n], dtype=float) for n in structure.names]
            except (TypeError, ValueError) as exc:
                raise ParseError(f"malformed CPT: {exc}") from None
            params = ParameterSet(structure, theta)
        return cls(structure, params, version)

    @classmethod
    def from_json(cls, text: str) -> NetworkDocument:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno, exc.colno) from None
        return cls.from_dict(doc)


def load_network(path) -> NetworkDocument:
    return NetworkDocument.from_json(Path(path).read_text(encoding="utf-8"))


def save_network(path, structure_or_doc, params: ParameterSet | None = None):
    doc = structure_or_doc
    if isinstance(doc, NetworkStructure):
        doc = NetworkDocument(doc, params)
    Path(path).write_text(doc.to_json(), encoding="utf-8")


def load_csv(path, variables, missing: str = DEFAULT_MISSING) -> DataSet:
    """Read a comma-separated file with a header row of variable names.

    Columns may come in any order; the result follows ``variables``.
    """
    variables = tuple(variables)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file: expected a header row", 1) from None
        header = [h.strip() for h in header]
        if sorted(header) != sorted(v.name for v in variables):
            raise SchemaMismatch(
                f"header {header} does not match declared variables {[v.name for v in variables]}"
            )
        cols = [header.index(v.name) for v in variables]
        rows = []
        for line in reader:
            if not line or all(not x.strip() for x in line):
                continue
            if len(line) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(line)}", reader.line_num
                )
            cells = [line[c].strip() for c in cols]
            row = []
            for v, x in zip(variables, cells):
                if x == missing:
                    row.append(None)
                elif x not in v.states:
                    raise UnknownState(
                        f"line {reader.line_num}, column {v.name!r}: {x!r} is not a declared state"
                    )
                else:
                    row.append(x)
            rows.append(row)
    return DataSet.from_rows(variables, rows)


def save_csv(path, dataset: DataSet, missing: str = DEFAULT_MISSING):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.names)
        for row in dataset.rows():
            w.writerow([missing if x is None else x for x in row])


@dataclass(frozen=True)
class CountsTableSpec:
    """Variables of a flat contingency table, last one varying fastest."""

    variables: tuple[VariableSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))

    @property
    def size(self) -> int:
        return int(np.prod([v.cardinality for v in self.variables], dtype=np.int64))


def load_counts_table(spec: CountsTableSpec, numbers) -> DataSet:
    """Expand a flat count table into one case per counted observation."""
    counts = np.asarray(list(numbers))
    if counts.ndim != 1 or counts.size != spec.size:
        raise LengthMismatch(f"table has {counts.size} entries, expected {spec.size}")
    if counts.size and not np.all(counts == np.round(counts)):
        raise ParseError("counts must be integers")
    counts = counts.astype(np.int64)
    if np.any(counts < 0):
        raise NegativeCount("counts must be non-negative")
    dims = [v.cardinality for v in spec.variables]
    configs = np.array(np.unravel_index(np.arange(spec.size), dims)).T
    codes = np.repeat(configs, counts, axis=0).reshape(-1, len(dims))
    return DataSet(spec.variables, codes)


def counts_from_dataset(dataset: DataSet) -> np.ndarray:
    """Inverse of :func:`load_counts_table` for complete data."""
    dims = [v.cardinality for v in dataset.variables]
    flat = np.ravel_multi_index(tuple(dataset.codes.T), dims) if dataset.n_cases else np.array([], int)
    return np.bincount(flat, minlength=int(np.prod(dims)))


def parse_counts_text(text: str) -> tuple[CountsTableSpec, list[int]]:
    variables = []
    numbers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            parts = line.split()
            if parts[0] != "@variable" or len(parts) < 4:
                raise ParseError("expected '@variable NAME STATE STATE ...'", lineno, 1)
            if numbers:
                raise ParseError("@variable lines must precede the counts", lineno, 1)
            try:
                variables.append(VariableSpec(parts[1], parts[2:]))
            except BayesNetError as exc:
                raise ParseError(str(exc), lineno, 1) from None
            continue
        for tok in line.split():
            try:
                numbers.append(int(tok))
            except ValueError:
                raise ParseError(f"not an integer: {tok!r}", lineno, raw.find(tok) + 1) from None
    if not variables:
        raise ParseError("no @variable declarations")
    return CountsTableSpec(tuple(variables)), numbers


def read_counts_file(path) -> DataSet:
    spec, numbers = parse_counts_text(Path(path).read_text(encoding="utf-8"))
    return load_counts_table(spec, numbers)


def write_counts_file(path, spec: CountsTableSpec, numbers, per_line: int = 16):
    lines = [f"@variable {v.name} {' '.join(v.states)}" for v in spec.variables]
    numbers = list(numbers)
    for k in range(0, len(numbers), per_line):
        lines.append(" ".join(str(x) for x in numbers[k:k + per_line]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(structure: NetworkStructure, graph_name: str = "network") -> str:
    """DOT digraph text: one node per variable, one edge per arc."""
    lines = [f"digraph {_dot_id(graph_name)} {{"]
    for name in structure.names:
        lines.append(f"  {_dot_id(name)};")
    for p, c in structure.arcs:
        lines.append(f"  {_dot_id(p)} -> {_dot_id(c)};")
    lines.append("}")
    return "\n".join(lines) + "\n"
