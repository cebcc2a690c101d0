import numpy as np
import pytest
from hypothesis import given, strategies as st

from collabcal.core import LabelOutOfSpace, LabelSpace
from collabcal.scores import (
    DegenerateDistribution,
    DistributionSpec,
    ExternalProviderAdapter,
    ScoreVector,
    normalize_probabilities,
    score_from_distribution,
    synthetic_distribution,
)

ABC = LabelSpace(["a", "b", "c"])


class TestNormalize:
    def test_already_normalized_passthrough(self):
        p = normalize_probabilities({"a": 0.2, "b": 0.2, "c": 0.6}, ABC)
        assert p == pytest.approx({"a": 0.2, "b": 0.2, "c": 0.6})

    def test_divides_by_total(self):
        p = normalize_probabilities({"a": 2, "b": 2, "c": 6}, ABC)
        assert p == pytest.approx({"a": 0.2, "b": 0.2, "c": 0.6})

    def test_drops_hallucinated_labels(self):
        p = normalize_probabilities({"a": 1, "z": 5}, LabelSpace(["a", "b"]))
        assert p == pytest.approx({"a": 1.0, "b": 0.0})

    def test_all_zero_mass_rejected(self):
        with pytest.raises(DegenerateDistribution):
            normalize_probabilities({"z": 5.0}, ABC)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            normalize_probabilities({"a": -1.0, "b": 2.0}, ABC)

    def test_sums_to_one(self):
        p = normalize_probabilities({"a": 0.31, "b": 0.127, "c": 9.1}, ABC)
        assert abs(sum(p.values()) - 1.0) < 1e-9

    @given(st.dictionaries(st.sampled_from(["a", "b", "c"]),
                           st.floats(0, 100), min_size=1).filter(
                               lambda d: sum(d.values()) > 0))
    def test_idempotent(self, raw):
        once = normalize_probabilities(raw, ABC)
        twice = normalize_probabilities(once, ABC)
        for label in ABC:
            assert twice[label] == pytest.approx(once[label], abs=1e-12)


class TestScore:
    def test_full_mass_scores_zero(self):
        assert score_from_distribution({"a": 1.0, "b": 0.0}, "a") == 0.0

    def test_formula_one_minus_p(self):
        assert score_from_distribution({"a": 0.25, "b": 0.75}, "a") == 0.75

    def test_uniform_four_labels(self):
        space = LabelSpace(list("wxyz"))
        p = {y: 0.25 for y in space}
        for y in space:
            assert score_from_distribution(p, y) == 0.75

    def test_unknown_label_rejected(self):
        with pytest.raises(LabelOutOfSpace):
            score_from_distribution({"a": 1.0}, "z")

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_antitone_in_probability(self, p1, p2):
        s1 = score_from_distribution({"y": p1}, "y")
        s2 = score_from_distribution({"y": p2}, "y")
        if p1 <= p2:
            assert s1 >= s2

    def test_vector_clamps_to_unit_interval(self):
        sv = ScoreVector.from_distribution({"a": 1.0 + 1e-12, "b": -1e-12}, ABC)
        assert (sv.values >= 0).all() and (sv.values <= 1).all()
        assert sv["c"] == 1.0  # absent label = zero mass


class TestSyntheticOracle:
    def test_point_mass_on_truth(self):
        spec = DistributionSpec(truth_mass=1.0)
        p = synthetic_distribution(spec, ABC, "b")
        assert p["b"] == 1.0 and p["a"] == 0.0 and p["c"] == 0.0

    def test_infinite_concentration_gives_nearest_neighbor(self):
        spec = DistributionSpec(truth_mass=0.5, concentration=float("inf"))
        p = synthetic_distribution(spec, ABC, "a")
        assert p == pytest.approx({"a": 0.5, "b": 0.5, "c": 0.0})

    def test_same_seed_identical_vectors(self):
        spec = DistributionSpec(truth_mass=0.6, truth_kappa=5.0, noise_seed=3)
        p1 = synthetic_distribution(spec, ABC, "b", rng=np.random.default_rng(11))
        p2 = synthetic_distribution(spec, ABC, "b", rng=np.random.default_rng(11))
        assert p1 == p2

    def test_valid_distribution(self):
        spec = DistributionSpec(truth_mass=0.4, concentration=0.5,
                                truth_kappa=4.0, confusion_rate=0.3)
        rng = np.random.default_rng(0)
        space = LabelSpace(list(range(9)))
        for _ in range(50):
            p = synthetic_distribution(spec, space, 4, rng=rng)
            values = np.array(list(p.values()))
            assert (values >= 0).all()
            assert abs(values.sum() - 1.0) < 1e-9

    def test_expected_truth_mass_matches_spec(self):
        spec = DistributionSpec(truth_mass=0.55, truth_kappa=6.0)
        rng = np.random.default_rng(42)
        space = LabelSpace(list(range(5)))
        draws = [synthetic_distribution(spec, space, 2, rng=rng)[2]
                 for _ in range(4000)]
        assert np.mean(draws) == pytest.approx(0.55, abs=0.02)

    def test_drift_schedule_steps(self):
        spec = DistributionSpec(truth_mass=0.9, drift=[(100, 0.4)])
        assert spec.truth_mass_at(1) == 0.9
        assert spec.truth_mass_at(99) == 0.9
        assert spec.truth_mass_at(100) == 0.4
        assert spec.truth_mass_at(5000) == 0.4

    def test_adaptive_gain_conditions_on_transcript(self):
        spec = DistributionSpec(truth_mass=0.5, adaptive_gain=0.5)
        without = synthetic_distribution(spec, ABC, "b", [frozenset({"a"})])
        with_truth = synthetic_distribution(spec, ABC, "b", [frozenset({"b"})])
        assert with_truth["b"] == pytest.approx(0.75)
        assert without["b"] == pytest.approx(0.5)

    def test_spec_roundtrip(self):
        spec = DistributionSpec(truth_mass=0.7, concentration=2.0,
                                truth_kappa=3.0, drift=[(10, 0.2)])
        assert DistributionSpec.from_dict(spec.to_dict()) == spec


def test_external_adapter_normalizes_and_drops():
    def fake_transport(url, payload):
        assert url == "http://provider.test/p"
        assert payload["labels"] == ["a", "b", "c"]
        return {"probabilities": {"a": 2.0, "b": 2.0, "c": 6.0, "zzz": 5.0}}

    adapter = ExternalProviderAdapter("http://provider.test/p",
                                      transport=fake_transport)
    p = adapter.distribution(ABC)
    assert p == pytest.approx({"a": 0.2, "b": 0.2, "c": 0.6})
