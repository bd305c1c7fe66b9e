import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paqol.scm import (
    BernoulliLogistic,
    CategoricalTable,
    DiscreteScm,
    LinearGaussian,
    Scm,
    ScmError,
    discrete_node,
    intervene,
    linear_mediation_truth,
    load_scm,
    oracle_mediation,
    sample,
    sample_discrete,
    save_scm,
    scm_dag,
    scm_from_dict,
    scm_to_dict,
    study_template,
    true_ate,
)


def _chain(c1=2.0, c2=3.0, direct=4.0) -> Scm:
    return Scm(
        ("T", "Z", "Y"),
        {
            "T": BernoulliLogistic((), (), 0.0),
            "Z": LinearGaussian(("T",), (c1,), 0.0, 1.0),
            "Y": LinearGaussian(("Z", "T"), (c2, direct), 0.0, 1.0),
        },
        roles={"T": "treatment", "Z": "mediator", "Y": "outcome"},
    )


class TestValidation:
    def test_parent_must_precede(self):
        with pytest.raises(ScmError, match="before"):
            Scm(
                ("A", "B"),
                {
                    "A": LinearGaussian(("B",), (1.0,), 0.0, 1.0),
                    "B": LinearGaussian((), (), 0.0, 1.0),
                },
            )

    def test_negative_noise(self):
        with pytest.raises(ScmError, match="noise_sd"):
            LinearGaussian((), (), 0.0, -1.0)

    def test_cpt_rows_sum_to_one(self):
        with pytest.raises(ScmError, match="sums"):
            CategoricalTable((), (0.0, 1.0), (((), (0.5, 0.6)),))

    def test_coefficient_mismatch(self):
        with pytest.raises(ScmError, match="coefficient"):
            LinearGaussian(("a",), (), 0.0, 1.0)


class TestSampling:
    def test_single_node_mean(self):
        scm = Scm(("N",), {"N": LinearGaussian((), (), 0.0, 1.0)})
        cohort = sample(scm, 100_000, 0)
        assert abs(cohort.column("N").mean()) < 0.02

    def test_noiseless_chain_exact(self):
        scm = Scm(
            ("A", "B"),
            {
                "A": LinearGaussian((), (), 2.0, 0.0),
                "B": LinearGaussian(("A",), (3.0,), 1.0, 0.0),
            },
        )
        cohort = sample(scm, 10, 0)
        assert np.all(cohort.column("A") == 2.0)
        assert np.all(cohort.column("B") == 7.0)

    def test_same_seed_bit_identical(self):
        scm = study_template()
        a = sample(scm, 500, 42)
        b = sample(scm, 500, 42)
        assert np.array_equal(a.values, b.values)

    def test_n_must_be_positive(self):
        with pytest.raises(ScmError):
            sample(_chain(), 0, 0)

    def test_categorical_sampling_matches_cpt(self):
        table = CategoricalTable((), (0.0, 1.0, 2.0), (((), (0.2, 0.5, 0.3)),))
        scm = Scm(("K",), {"K": table})
        cohort = sample(scm, 60_000, 1)
        freq = [float(np.mean(cohort.column("K") == v)) for v in (0.0, 1.0, 2.0)]
        tol = 3 / math.sqrt(60_000)
        assert all(abs(f - p) < tol for f, p in zip(freq, (0.2, 0.5, 0.3)))


class TestTrueAte:
    def test_single_path_coefficient(self):
        scm = Scm(
            ("C", "T", "Y"),
            {
                "C": LinearGaussian((), (), 0.0, 1.0),
                "T": BernoulliLogistic(("C",), (0.5,), 0.0),
                "Y": LinearGaussian(("T", "C"), (10.0, 3.0), 0.0, 1.0),
            },
        )
        effect = true_ate(scm, "T", "Y")
        assert effect.method == "path_sum"
        assert effect.value == 10.0

    def test_path_sum_rule(self):
        effect = true_ate(_chain(), "T", "Y")
        assert effect.value == pytest.approx(4.0 + 2.0 * 3.0, abs=1e-12)

    def test_path_sum_cross_checked_by_do_mc(self):
        exact = true_ate(_chain(), "T", "Y").value
        scm = _chain()
        y1 = sample(intervene(scm, {"T": 1.0}), 200_000, 0).column("Y")
        y0 = sample(intervene(scm, {"T": 0.0}), 200_000, 1).column("Y")
        mc = y1.mean() - y0.mean()
        se = math.sqrt(y1.var() / y1.size + y0.var() / y0.size)
        assert abs(mc - exact) < 4 * se

    def test_no_path_is_zero(self):
        scm = Scm(
            ("T", "Y"),
            {
                "T": BernoulliLogistic((), (), 0.0),
                "Y": LinearGaussian((), (), 5.0, 1.0),
            },
        )
        assert true_ate(scm, "T", "Y").value == 0.0

    def test_non_binary_treatment_rejected(self):
        scm = Scm(
            ("T", "Y"),
            {
                "T": LinearGaussian((), (), 0.0, 1.0),
                "Y": LinearGaussian(("T",), (1.0,), 0.0, 1.0),
            },
        )
        with pytest.raises(ScmError, match="binary"):
            true_ate(scm, "T", "Y")

    def test_monte_carlo_route_for_nonlinear_mediator(self):
        # T -> M (logistic) -> Y: effect = (sigmoid(1.5) - sigmoid(0)) * 3.
        scm = Scm(
            ("T", "M", "Y"),
            {
                "T": BernoulliLogistic((), (), 0.0),
                "M": BernoulliLogistic(("T",), (1.5,), 0.0),
                "Y": LinearGaussian(("M",), (3.0,), 0.0, 1.0),
            },
        )
        effect = true_ate(scm, "T", "Y", mc_samples=300_000, seed=5)
        expected = (1 / (1 + math.exp(-1.5)) - 0.5) * 3.0
        assert effect.method == "monte_carlo"
        assert abs(effect.value - expected) < 4 * effect.standard_error + 1e-3


class TestMediationOracle:
    def _fixture(self):
        x = discrete_node("x", (0, 1), rows=(0.5, 0.5))
        z = discrete_node(
            "z", (0, 1), ("x",), {(0.0,): (0.8, 0.2), (1.0,): (0.2, 0.8)}
        )
        means = {(xv, zv): 2 * xv + 3 * zv for xv in (0.0, 1.0) for zv in (0.0, 1.0)}
        return DiscreteScm(x, (z,), "y", means)

    def test_hand_enumerated_values(self):
        res = oracle_mediation(self._fixture(), 0, 1)
        # Hand enumeration over the 4 cells:
        #   NDE = sum_z [E(Y|1,z) - E(Y|0,z)] P(z|0) = 2
        #   NIE_{0,1} = sum_z E(Y|0,z) [P(z|1) - P(z|0)] = 3 * 0.6 = 1.8
        #   NIE_{1,0} = sum_z E(Y|1,z) [P(z|0) - P(z|1)] = -1.8
        #   TE = 2 - (-1.8) = 3.8 = E[Y|do(1)] - E[Y|do(0)] = 4.4 - 0.6
        assert res.nde == pytest.approx(2.0, abs=1e-9)
        assert res.nie == pytest.approx(1.8, abs=1e-9)
        assert res.nie_reverse == pytest.approx(-1.8, abs=1e-9)
        assert res.te == pytest.approx(3.8, abs=1e-9)
        assert res.ate == pytest.approx(4.4 - 0.6, abs=1e-9)
        assert res.te == pytest.approx(res.ate, abs=1e-9)

    def test_nde_zero_when_outcome_ignores_treatment(self):
        x = discrete_node("x", (0, 1), rows=(0.5, 0.5))
        z = discrete_node("z", (0, 1), ("x",), {(0.0,): (0.7, 0.3), (1.0,): (0.4, 0.6)})
        means = {(xv, zv): 3 * zv for xv in (0.0, 1.0) for zv in (0.0, 1.0)}
        res = oracle_mediation(DiscreteScm(x, (z,), "y", means), 0, 1)
        assert res.nde == 0.0

    def test_nie_zero_when_mediator_ignores_treatment(self):
        x = discrete_node("x", (0, 1), rows=(0.5, 0.5))
        z = discrete_node("z", (0, 1), ("x",), {(0.0,): (0.7, 0.3), (1.0,): (0.7, 0.3)})
        means = {(xv, zv): 2 * xv + 3 * zv for xv in (0.0, 1.0) for zv in (0.0, 1.0)}
        res = oracle_mediation(DiscreteScm(x, (z,), "y", means), 0, 1)
        assert res.nie == 0.0

    @given(
        st.floats(0.05, 0.95),
        st.floats(0.05, 0.95),
        st.floats(-5, 5),
        st.floats(-5, 5),
        st.floats(-5, 5),
    )
    @settings(max_examples=60, deadline=None)
    def test_te_equals_do_contrast(self, p0, p1, a, b, c):
        x = discrete_node("x", (0, 1), rows=(0.5, 0.5))
        z = discrete_node(
            "z", (0, 1), ("x",), {(0.0,): (1 - p0, p0), (1.0,): (1 - p1, p1)}
        )
        means = {
            (xv, zv): a * xv + b * zv + c * xv * zv
            for xv in (0.0, 1.0)
            for zv in (0.0, 1.0)
        }
        res = oracle_mediation(DiscreteScm(x, (z,), "y", means), 0, 1)
        assert res.te == pytest.approx(res.ate, abs=1e-9)

    def test_two_mediator_enumeration(self):
        x = discrete_node("x", (0, 1), rows=(0.4, 0.6))
        z1 = discrete_node("z1", (0, 1), ("x",), {(0.0,): (0.8, 0.2), (1.0,): (0.3, 0.7)})
        z2 = discrete_node(
            "z2",
            (0, 1),
            ("x", "z1"),
            {
                (0.0, 0.0): (0.9, 0.1),
                (0.0, 1.0): (0.6, 0.4),
                (1.0, 0.0): (0.5, 0.5),
                (1.0, 1.0): (0.2, 0.8),
            },
        )
        means = {
            (xv, a, b): xv + 2 * a + 4 * b
            for xv in (0.0, 1.0)
            for a in (0.0, 1.0)
            for b in (0.0, 1.0)
        }
        res = oracle_mediation(DiscreteScm(x, (z1, z2), "y", means), 0, 1)
        assert res.te == pytest.approx(res.ate, abs=1e-9)

    def test_sampled_frequencies_converge_to_cpt(self):
        dscm = self._fixture()
        cohort = sample_discrete(dscm, 40_000, 3)
        x = cohort.column("x")
        z = cohort.column("z")
        for xv, p_z1 in ((0.0, 0.2), (1.0, 0.8)):
            rows = x == xv
            tol = 3 / math.sqrt(rows.sum())
            assert abs(z[rows].mean() - p_z1) < tol


class TestStudyTemplate:
    def test_default_physical_effect_is_paper_average(self):
        effect = true_ate(study_template(), "active", "qol_physical")
        assert effect.method == "path_sum"
        assert effect.value == pytest.approx(7.3, abs=1e-9)

    def test_default_psychological_effect(self):
        effect = true_ate(study_template(), "active", "qol_psychological")
        assert effect.value == pytest.approx(3.4, abs=1e-9)

    def test_mediation_decomposition(self):
        truth = linear_mediation_truth(study_template(), "active", "qol_physical")
        assert truth["nde"] == pytest.approx(4.0)
        assert truth["nie"] == pytest.approx(3.3, abs=1e-9)
        assert truth["te"] == pytest.approx(7.3, abs=1e-9)

    def test_covariate_means_match_reported_table(self):
        cohort = sample(study_template(), 100_000, 17)
        for name, want in (("age", 29.3), ("bmi", 30.69), ("epds", 6.1), ("children", 1.2)):
            got = float(cohort.column(name).mean())
            assert abs(got - want) / want < 0.02

    def test_outcomes_stay_in_range(self):
        cohort = sample(study_template(), 100_000, 18)
        for outcome in ("qol_physical", "qol_psychological"):
            col = cohort.column(outcome)
            assert col.min() >= 0.0 and col.max() <= 100.0

    def test_override_direct_effect_to_zero(self):
        scm = study_template({"active->qol_physical": 0.0})
        effect = true_ate(scm, "active", "qol_physical")
        assert effect.value == pytest.approx(3.3, abs=1e-9)  # mediated paths only

    def test_override_unknown_edge(self):
        with pytest.raises(ScmError, match="unknown edge"):
            study_template({"age->qol_physical": 1.0})

    def test_roles(self):
        scm = study_template()
        assert scm.roles["active"] == "treatment"
        assert scm.roles["qol_physical"] == "outcome"
        assert {n for n, r in scm.roles.items() if r == "mediator"} == {
            "steps",
            "average_met",
            "epds",
        }

    def test_treated_share_near_study_split(self):
        cohort = sample(study_template(), 100_000, 19)
        assert abs(cohort.column("active").mean() - 22 / 48) < 0.02


class TestSerialization:
    def test_round_trip(self, tmp_path):
        scm = study_template()
        path = tmp_path / "scm.json"
        save_scm(scm, path)
        back = load_scm(path)
        assert back.nodes == scm.nodes
        assert back.roles == scm.roles
        a = sample(scm, 200, 5)
        b = sample(back, 200, 5)
        assert np.array_equal(a.values, b.values)

    def test_dict_round_trip_preserves_mechanisms(self):
        scm = _chain()
        back = scm_from_dict(scm_to_dict(scm))
        assert back.mechanisms == scm.mechanisms

    def test_unknown_mechanism_kind(self):
        with pytest.raises(ScmError, match="unknown mechanism"):
            scm_from_dict({"nodes": [{"name": "a", "mechanism": "quantum"}]})

    def test_scm_dag_matches_parents(self):
        dag = scm_dag(_chain())
        assert dag.parents("Y") == {"Z", "T"}
