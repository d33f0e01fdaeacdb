import itertools

import numpy as np
import pytest
from conftest import brute_joint, make_variables, random_network, random_params

from bdnet import (
    NetworkStructure,
    ParameterSet,
    VariableSpec,
    enumerate_query,
    family_posteriors,
    joint_probability,
    query,
)
from bdnet.errors import OverlapTargetEvidence, UnknownState, ZeroEvidenceProbability


def chain_xy():
    v = [VariableSpec("X", ["0", "1"]), VariableSpec("Y", ["0", "1"])]
    s = NetworkStructure.from_arcs(v, [("X", "Y")])
    p = ParameterSet(s, [np.array([[0.5, 0.5]]), np.array([[0.9, 0.1], [0.1, 0.9]])])
    return s, p


def brute_query(structure, params, targets, evidence):
    """Conditional table by summing the brute-force joint."""
    joint = brute_joint(structure, params)
    t_idx = [structure.index(t) for t in targets]
    ev = {structure.index(k): structure.variables[structure.index(k)].index(v) for k, v in evidence.items()}
    table = np.zeros([structure.cardinalities[i] for i in t_idx])
    for codes, p in joint.items():
        if all(codes[i] == c for i, c in ev.items()):
            table[tuple(codes[i] for i in t_idx)] += p
    return table / table.sum()


class TestQuery:
    def test_bayes_rule_symmetry(self):
        s, p = chain_xy()
        res = query(s, p, ["X"], {"Y": "1"})
        assert res.probabilities("X")["1"] == pytest.approx(0.9, abs=1e-15)
        assert res.evidence_probability == pytest.approx(0.5)

    def test_root_without_evidence_is_prior_row(self, fraud):
        res = query(fraud["s1"], fraud["prior"], ["Age"])
        assert res.marginal("Age") == pytest.approx([0.25, 0.40, 0.35], abs=1e-15)

    def test_fraud_posterior_against_two_state_enumeration(self, fraud):
        prior = fraud["prior"]
        s = prior.structure
        ev = {"Gas": "yes", "Jewelry": "yes", "Age": "<30", "Sex": "male"}
        num = joint_probability(s, prior, {**ev, "Fraud": "yes"})
        den = num + joint_probability(s, prior, {**ev, "Fraud": "no"})
        assert query(s, prior, ["Fraud"], ev).probabilities()["yes"] == pytest.approx(num / den, rel=1e-12)

    def test_matches_enumeration_on_random_networks(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 7))
            s, p = random_network(rng, n, max_states=3)
            k = int(rng.integers(1, min(3, n) + 1))
            perm = rng.permutation(n)
            targets = [s.names[i] for i in perm[:k]]
            ev_vars = [s.names[i] for i in perm[k:] if rng.random() < 0.5]
            evidence = {v: s.variables[s.index(v)].states[int(rng.integers(s.variables[s.index(v)].cardinality))]
                        for v in ev_vars}
            got = query(s, p, targets, evidence).table
            ref = enumerate_query(s, p, targets, evidence).table
            assert np.max(np.abs(got - ref)) <= 1e-10
            assert np.max(np.abs(got - brute_query(s, p, targets, evidence))) <= 1e-10

    def test_marginalization_consistency(self, rng):
        s, p = random_network(rng, 5)
        x, y = s.names[0], s.names[3]
        pair = query(s, p, [x, y]).table
        single = query(s, p, [x]).table
        assert np.allclose(pair.sum(axis=1), single, atol=1e-12)

    def test_overlap(self):
        s, p = chain_xy()
        with pytest.raises(OverlapTargetEvidence):
            query(s, p, ["X"], {"X": "0"})

    def test_zero_evidence(self):
        v = make_variables([2, 2])
        s = NetworkStructure.from_arcs(v, [("V0", "V1")])
        p = ParameterSet(s, [np.array([[1.0, 0.0]]), np.array([[0.5, 0.5], [0.5, 0.5]])])
        with pytest.raises(ZeroEvidenceProbability):
            query(s, p, ["V1"], {"V0": "s1"})

    def test_unknown_state(self):
        s, p = chain_xy()
        with pytest.raises(UnknownState):
            query(s, p, ["X"], {"Y": "2"})


class TestFamilyPosteriors:
    def test_fully_observed_gives_indicators(self, fraud):
        s, prior = fraud["s1"], fraud["prior"]
        case = {"Fraud": "no", "Gas": "no", "Jewelry": "yes", "Age": ">50", "Sex": "female"}
        for t in family_posteriors(s, prior, case):
            assert set(np.unique(t)) <= {0.0, 1.0}
            assert t.sum() == 1.0

    def test_single_variable_missing_gives_marginal(self):
        s = NetworkStructure.empty(make_variables([3]))
        p = ParameterSet(s, [np.array([[0.2, 0.3, 0.5]])])
        (t,) = family_posteriors(s, p, [None])
        assert t[0] == pytest.approx([0.2, 0.3, 0.5])

    def test_chain_middle_missing_matches_enumeration(self, rng):
        v = make_variables([2, 3, 2])
        s = NetworkStructure.from_arcs(v, [("V0", "V1"), ("V1", "V2")])
        p = random_params(rng, s)
        joint = brute_joint(s, p)
        tables = family_posteriors(s, p, ["s1", None, "s0"])
        # enumerate completions of V1 and normalize
        w = np.array([joint[(1, k, 0)] for k in range(3)])
        w /= w.sum()
        assert tables[1][1] == pytest.approx(w, abs=1e-12)
        assert tables[1][0] == pytest.approx(0.0)
        assert tables[2][:, 0] == pytest.approx(w, abs=1e-12)

    def test_rows_sum_to_one_with_random_missingness(self, rng):
        for _ in range(20):
            s, p = random_network(rng, 4)
            case = [None if rng.random() < 0.4 else s.variables[i].states[0] for i in range(4)]
            try:
                tables = family_posteriors(s, p, case)
            except ZeroEvidenceProbability:
                continue
            for t in tables:
                assert t.sum() == pytest.approx(1.0, abs=1e-10)

    def test_against_brute_force_family_marginals(self, rng):
        s, p = random_network(rng, 4, max_states=2)
        joint = brute_joint(s, p)
        case = ["s0", None, None, "s1"]
        obs = {0: 0, 3: 1}
        tables = family_posteriors(s, p, case)
        z = sum(pr for c, pr in joint.items() if all(c[i] == x for i, x in obs.items()))
        for i in range(4):
            ref = np.zeros(s.family_shape(i))
            for c, pr in joint.items():
                if all(c[k] == x for k, x in obs.items()):
                    j = 0
                    for pa in s.parent_indices[i]:
                        j = j * s.cardinalities[pa] + c[pa]
                    ref[j, c[i]] += pr / z
            assert np.allclose(tables[i], ref, atol=1e-12)


def test_query_result_probabilities_cover_all_states(fraud):
    res = query(fraud["s1"], fraud["prior"], ["Jewelry", "Gas"], {"Fraud": "no"})
    assert res.table.shape == (2, 2)
    assert res.table.sum() == pytest.approx(1.0)
    labels = list(itertools.product(*res.states))
    assert len(labels) == 4
