import json

import numpy as np
import pytest
from conftest import forward_sample, hide, random_network

from bdnet import (
    CountsTableSpec,
    NetworkDocument,
    VariableSpec,
    count_sufficient_stats,
    load_counts_table,
    load_csv,
    load_network,
    save_csv,
    save_network,
    to_dot,
)
from bdnet.core import joint_table
from bdnet.datasets import data_path, sewell_shah
from bdnet.errors import (
    CycleDetected,
    InvariantViolation,
    LengthMismatch,
    NegativeCount,
    ParseError,
    SchemaMismatch,
    UnknownState,
)
from bdnet.io import counts_from_dataset, parse_counts_text, read_counts_file, write_counts_file


class TestNetworkDocument:
    def test_round_trip(self, tmp_path, rng):
        for k in range(10):
            s, p = random_network(rng, 4)
            path = tmp_path / f"net{k}.json"
            save_network(path, s, p)
            doc = load_network(path)
            assert doc.structure == s
            assert doc.params == p
            assert all(np.array_equal(a, b) for a, b in zip(doc.params.theta, p.theta))
            save_network(tmp_path / "again.json", doc)
            assert (tmp_path / "again.json").read_bytes() == path.read_bytes()

    def test_field_order(self, fraud):
        text = NetworkDocument(fraud["prior"].structure, fraud["prior"]).to_json()
        keys = list(json.loads(text).keys())
        assert keys == ["schema_version", "variables", "arcs", "cpts"]

    def test_cyclic_document(self):
        doc = {
            "schema_version": 1,
            "variables": [{"name": "A", "states": ["0", "1"]}, {"name": "B", "states": ["0", "1"]}],
            "arcs": [["A", "B"], ["B", "A"]],
        }
        with pytest.raises(CycleDetected) as exc:
            NetworkDocument.from_dict(doc)
        assert isinstance(exc.value, InvariantViolation)

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as exc:
            NetworkDocument.from_json('{\n  "schema_version": 1,\n  "variables": [,]\n}')
        assert exc.value.line == 3

    def test_fraud_document_joint_sums_to_one(self, fraud):
        doc = load_network(data_path("fraud_prior.json"))
        assert joint_table(doc.params).sum() == pytest.approx(1.0, abs=1e-12)


class TestCsv:
    def test_fraud_table(self, fraud):
        data = load_csv(data_path("fraud.csv"), fraud["s1"].variables)
        assert data.n_cases == 10
        assert count_sufficient_stats(fraud["s1"], data).counts[0][0, 0] == 1

    def test_missing_marker(self, tmp_path, fraud):
        path = tmp_path / "d.csv"
        path.write_text("Fraud,Gas,Jewelry,Age,Sex\nno,?,no,<30,male\nno,no,no,<30,male\n")
        data = load_csv(path, fraud["s1"].variables)
        assert data.missing_mask[0].tolist() == [False, True, False, False, False]
        assert not data.is_complete

    def test_header_mismatch(self, tmp_path, fraud):
        path = tmp_path / "d.csv"
        path.write_text("Fraud,Gas,Jewelry,Age\nno,no,no,<30\n")
        with pytest.raises(SchemaMismatch):
            load_csv(path, fraud["s1"].variables)

    def test_unknown_state_reports_row_and_column(self, tmp_path, fraud):
        path = tmp_path / "d.csv"
        path.write_text("Fraud,Gas,Jewelry,Age,Sex\nno,no,no,<30,male\nno,maybe,no,<30,male\n")
        with pytest.raises(UnknownState, match=r"line 3.*Gas"):
            load_csv(path, fraud["s1"].variables)

    def test_ragged_row(self, tmp_path, fraud):
        path = tmp_path / "d.csv"
        path.write_text("Fraud,Gas,Jewelry,Age,Sex\nno,no,no\n")
        with pytest.raises(ParseError):
            load_csv(path, fraud["s1"].variables)

    def test_column_order_free_and_round_trip(self, tmp_path, rng):
        s, p = random_network(rng, 4)
        data = hide(rng, forward_sample(rng, s, p, 30), 0.2)
        path = tmp_path / "d.csv"
        save_csv(path, data)
        assert load_csv(path, s.variables) == data
        reversed_vars = list(reversed(s.variables))
        assert load_csv(path, reversed_vars).rows()[0] == tuple(reversed(data.rows()[0]))


class TestCountsTable:
    def test_sewell_shah_semantics(self):
        data = sewell_shah()
        assert data.names == ("SEX", "SES", "IQ", "PE", "CP")
        assert data.n_cases == 10318
        first = ("male", "low", "low", "low", "yes")
        assert sum(r == first for r in data.rows()) == 4
        assert counts_from_dataset(data)[0] == 4
        assert counts_from_dataset(data).size == 128

    def test_all_zero(self):
        spec = CountsTableSpec((VariableSpec("A", ["x", "y"]), VariableSpec("B", ["u", "v", "w"])))
        data = load_counts_table(spec, [0] * 6)
        assert data.n_cases == 0
        assert counts_from_dataset(data).tolist() == [0] * 6

    def test_last_variable_fastest(self):
        spec = CountsTableSpec((VariableSpec("A", ["x", "y"]), VariableSpec("B", ["u", "v", "w"])))
        data = load_counts_table(spec, [0, 0, 0, 0, 2, 0])
        assert data.rows() == [("y", "v"), ("y", "v")]

    def test_errors(self):
        spec = CountsTableSpec((VariableSpec("A", ["x", "y"]),))
        with pytest.raises(LengthMismatch):
            load_counts_table(spec, [1, 2, 3])
        with pytest.raises(NegativeCount):
            load_counts_table(spec, [1, -2])

    def test_text_round_trip(self, tmp_path):
        data = sewell_shah()
        spec = CountsTableSpec(data.variables)
        path = tmp_path / "t.tab"
        write_counts_file(path, spec, counts_from_dataset(data))
        again = read_counts_file(path)
        assert again == data

    def test_bad_text(self):
        with pytest.raises(ParseError):
            parse_counts_text("@variable A x y\n1 two\n")
        with pytest.raises(ParseError):
            parse_counts_text("1 2\n")


def test_dot_export(fraud):
    text = to_dot(fraud["s2"], "s2")
    assert text.startswith('digraph "s2" {')
    assert text.count(" -> ") == fraud["s2"].n_arcs
    for name in fraud["s2"].names:
        assert f'"{name}";' in text
    assert '"Age" -> "Gas";' in text
