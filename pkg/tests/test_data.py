import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coarsebn.data import (
    Completion,
    Dataset,
    bind_pattern,
    check_completion,
    compatible_assignments,
    completion_distribution,
    empirical_pattern_distribution,
    format_dataset_csv,
    member_count,
    member_flat_indices,
    parse_dataset_csv,
    recover_coarsening,
)
from coarsebn.errors import DataError


def basic_completion(alpha):
    """Completion of the four-pattern dataset splitting U_1 as (alpha, 1-alpha)
    between (t,t) and (t,f)."""
    return Completion(
        (
            {(0, 0): alpha, (0, 1): 1.0 - alpha},
            {(0, 0): 1.0},
            {(1, 0): 1.0},
            {(1, 1): 1.0},
        )
    )


class TestPatternDistribution:
    def test_fixture_frequencies_and_entropy(self, basic_data):
        m = empirical_pattern_distribution(basic_data)
        freqs = m.as_dict()
        assert freqs[("t", None)] == pytest.approx(0.45, abs=1e-15)
        assert freqs[("f", "f")] == pytest.approx(0.4, abs=1e-15)
        # entropy by direct formula, independent accumulation
        expect = -sum(f * math.log(f) for f in freqs.values())
        assert m.entropy == pytest.approx(expect, abs=1e-15)
        assert m.entropy == pytest.approx(1.1059, abs=5e-4)

    def test_single_pattern_zero_entropy(self):
        d = Dataset(("X",), ((("a",), 3.0), (("a",), 2.0)))
        assert empirical_pattern_distribution(d).entropy == 0.0

    def test_two_equal_patterns_log2(self):
        d = Dataset(("X",), ((("a",), 1.0), ((None,), 1.0)))
        assert empirical_pattern_distribution(d).entropy == pytest.approx(
            math.log(2), abs=1e-15
        )

    @given(
        scale=st.floats(min_value=1e-3, max_value=1e3),
        order=st.permutations(range(4)),
    )
    @settings(max_examples=60, deadline=None)
    def test_invariant_under_reorder_and_rescale(self, basic_data, scale, order):
        cases = [basic_data.cases[i] for i in order]
        scaled = Dataset(
            basic_data.variables,
            tuple((p, w * scale) for p, w in cases),
        )
        a = empirical_pattern_distribution(basic_data)
        b = empirical_pattern_distribution(scaled)
        assert a.as_dict() == pytest.approx(b.as_dict(), abs=1e-12)
        assert a.entropy == pytest.approx(b.entropy, abs=1e-12)


class TestCompatibleAssignments:
    def test_fully_observed_single(self, basic_net, basic_data):
        bound = bind_pattern(basic_net, basic_data.variables, ("t", "t"))
        assert list(compatible_assignments(basic_net, bound)) == [(0, 0)]

    def test_example_pattern_members(self, basic_net, basic_data):
        bound = bind_pattern(basic_net, basic_data.variables, ("t", None))
        assert sorted(compatible_assignments(basic_net, bound)) == [(0, 0), (0, 1)]

    def test_three_missing_binary_count(self, asia_net):
        pattern = tuple(
            None if i < 3 else "no" for i in range(len(asia_net.nodes))
        )
        variables = tuple(s.name for s in asia_net.nodes)
        bound = bind_pattern(asia_net, variables, pattern)
        members = list(compatible_assignments(asia_net, bound))
        assert len(members) == 8
        assert member_count(asia_net, bound) == 8
        flat = member_flat_indices(asia_net, bound)
        assert sorted(flat) == sorted(asia_net.ravel(x) for x in members)


class TestCompletionDistribution:
    def test_identity_on_complete_data(self, basic_net):
        d = Dataset(("A", "B"), ((("t", "t"), 2.0), (("f", "f"), 6.0)))
        c = Completion(({(0, 0): 1.0}, {(1, 1): 1.0}))
        dist = completion_distribution(c, d)
        assert dist == pytest.approx({(0, 0): 0.25, (1, 1): 0.75})

    def test_example_optimal_completion(self, basic_net, basic_data):
        c = basic_completion(1.0 / 9.0)
        assert check_completion(c, basic_data, basic_net) == []
        dist = completion_distribution(c, basic_data)
        # hand arithmetic: 0.05 + 0.45/9 = 0.1
        assert dist[(0, 0)] == pytest.approx(0.1, abs=1e-15)
        assert dist[(0, 1)] == pytest.approx(0.4, abs=1e-15)
        assert dist[(1, 0)] == pytest.approx(0.1, abs=1e-15)
        assert dist[(1, 1)] == pytest.approx(0.4, abs=1e-15)

    def test_point_mass_support_bounded_by_distinct_cases(self, basic_data):
        c = basic_completion(1.0)  # a 1-completion
        dist = completion_distribution(c, basic_data)
        assert len(dist) <= len(set(p for p, _ in basic_data.cases))

    @given(
        alpha=st.floats(min_value=0, max_value=1),
        beta=st.floats(min_value=0, max_value=1),
        lam=st.floats(min_value=0, max_value=1),
    )
    @settings(max_examples=100, deadline=None)
    def test_mixture_linearity(self, basic_data, alpha, beta, lam):
        ca, cb = basic_completion(alpha), basic_completion(beta)
        mixed = Completion(
            tuple(
                {
                    x: lam * da.get(x, 0.0) + (1 - lam) * db.get(x, 0.0)
                    for x in set(da) | set(db)
                }
                for da, db in zip(ca.per_case, cb.per_case)
            )
        )
        pa = completion_distribution(ca, basic_data)
        pb = completion_distribution(cb, basic_data)
        pm = completion_distribution(mixed, basic_data)
        for x in set(pa) | set(pb) | set(pm):
            expect = lam * pa.get(x, 0.0) + (1 - lam) * pb.get(x, 0.0)
            assert pm.get(x, 0.0) == pytest.approx(expect, abs=1e-12)


class TestRecoverCoarsening:
    def test_example_lambdas(self, basic_net, basic_data):
        m = empirical_pattern_distribution(basic_data)
        c = basic_completion(1.0 / 9.0)
        model = recover_coarsening(m, c, basic_data, basic_net)
        row_tt = model.row((0, 0))
        # 0.45*(1/9)/0.1 = 0.5
        assert row_tt[("t", None)] == pytest.approx(0.5, abs=1e-12)
        assert row_tt[("t", "t")] == pytest.approx(0.5, abs=1e-12)
        row_tf = model.row((0, 1))
        # 0.45*(8/9)/0.4 = 1
        assert row_tf[("t", None)] == pytest.approx(1.0, abs=1e-12)
        assert model.check() == []

    def test_fully_observed_self_reporting(self, basic_net):
        d = Dataset(("A", "B"), ((("t", "t"), 1.0), (("f", "f"), 3.0)))
        m = empirical_pattern_distribution(d)
        c = Completion(({(0, 0): 1.0}, {(1, 1): 1.0}))
        model = recover_coarsening(m, c, d, basic_net)
        assert model.row((0, 0)) == pytest.approx({("t", "t"): 1.0})
        assert model.row((1, 1)) == pytest.approx({("f", "f"): 1.0})

    def test_reproduces_pattern_probabilities(self, basic_net, basic_data):
        # P_c equals the model distribution here, so the recovered mechanism
        # must reproduce the observed pattern masses exactly.
        from coarsebn.network import joint_probability

        m = empirical_pattern_distribution(basic_data)
        c = basic_completion(1.0 / 9.0)
        model = recover_coarsening(m, c, basic_data, basic_net)
        lam_by_pattern: dict = {}
        for x, lams in model.rows:
            for pattern, l in lams:
                lam_by_pattern.setdefault(pattern, {})[x] = l
        for pattern, weight in basic_data.grouped().items():
            prob = sum(
                joint_probability(basic_net, x) * l
                for x, l in lam_by_pattern[pattern].items()
            )
            assert prob == pytest.approx(weight, abs=1e-12)


class TestCsv:
    def test_round_trip_weights_lossless(self, basic_data):
        text = format_dataset_csv(basic_data)
        again = parse_dataset_csv(text)
        assert again.variables == basic_data.variables
        for (pa, wa), (pb, wb) in zip(again.cases, basic_data.cases):
            assert pa == pb
            assert wa == wb  # bit-exact round trip through 17 digits

    def test_round_trip_awkward_weights(self):
        d = Dataset(
            ("X", "Y"),
            (
                (("a", None), 1.0 / 3.0),
                ((None, "b"), math.pi),
                (("a", "b"), 1e-17),
            ),
        )
        again = parse_dataset_csv(format_dataset_csv(d))
        for (pa, wa), (pb, wb) in zip(again.cases, d.cases):
            assert pa == pb
            assert wa == wb

    def test_unit_weight_column_omitted(self):
        d = Dataset(("X",), ((("a",), 1.0), ((None,), 1.0)))
        text = format_dataset_csv(d)
        assert "__weight" not in text
        assert parse_dataset_csv(text).cases == d.cases

    def test_missing_token(self):
        d = parse_dataset_csv("X,Y\n?,b\n")
        assert d.cases[0][0] == (None, "b")

    def test_ragged_row_rejected(self):
        with pytest.raises(Exception, match="cells"):
            parse_dataset_csv("X,Y\na\n")


class TestDatasetValidation:
    def test_negative_weight_rejected(self):
        with pytest.raises(DataError):
            Dataset(("X",), ((("a",), -1.0),))

    def test_zero_total_rejected(self):
        with pytest.raises(DataError):
            Dataset(("X",), ((("a",), 0.0),))

    def test_duplicate_header_rejected(self):
        with pytest.raises(DataError):
            Dataset(("X", "X"), ((("a", "b"), 1.0),))

    def test_unknown_variable_binding(self, basic_net):
        with pytest.raises(DataError):
            bind_pattern(basic_net, ("A", "Z"), ("t", "x"))
