"""Model abstractions, designs, noisy data generation, and the registry."""

import numpy as np
import pytest

import identikit as ik
from identikit.models import MIN_NOISE_SD


class TestParameterSpace:
    def test_bounds_must_be_ordered(self):
        with pytest.raises(ValueError):
            ik.ParameterSpace(np.array([1.0]), np.array([1.0]))
        with pytest.raises(ValueError):
            ik.ParameterSpace(np.array([2.0]), np.array([1.0]))

    def test_ordering_constraints_validated(self):
        with pytest.raises(ValueError):
            ik.ParameterSpace(np.zeros(2), np.ones(2), orderings=((0, 0),))
        with pytest.raises(ValueError):
            ik.ParameterSpace(np.zeros(2), np.ones(2), orderings=((0, 5),))

    def test_membership(self):
        space = ik.ParameterSpace(np.zeros(2), np.ones(2), orderings=((0, 1),))
        assert space.contains([0.8, 0.2])
        assert not space.contains([0.2, 0.8])   # ordering violated
        assert not space.contains([1.2, 0.2])   # box violated
        assert not space.contains([0.8])        # wrong length

    def test_sample_respects_orderings(self):
        space = ik.ParameterSpace(np.zeros(2), np.ones(2), orderings=((0, 1),))
        draws = space.sample(np.random.default_rng(0), 50)
        assert all(space.contains(d) for d in draws)


class TestDesign:
    def test_validation(self):
        with pytest.raises(ValueError):
            ik.Design(np.array([]), 0.1)
        with pytest.raises(ValueError):
            ik.Design(np.array([1.0, 1.0]), 0.1)
        with pytest.raises(ValueError):
            ik.Design(np.array([1.0]), 0.0)
        # smallest admissible sigma is 1e-12; anything below is rejected
        with pytest.raises(ValueError):
            ik.Design(np.array([1.0]), 1e-300)
        ik.Design(np.array([1.0]), MIN_NOISE_SD)

    def test_replicates_positive(self):
        with pytest.raises(ValueError):
            ik.Design(np.array([1.0]), 0.1, replicates=0)


class TestEvaluate:
    def test_reciprocal_at_one(self):
        model = ik.get_model("reciprocal")
        design = ik.Design(np.array([0.3, 1.7]), 0.1)
        assert np.allclose(ik.evaluate(model, design, [1.0]), 2.0)

    def test_biexponential_at_t0(self):
        model = ik.get_model("biexponential")
        design = ik.Design(np.array([0.0]), 0.1)
        np.testing.assert_allclose(ik.evaluate(model, design, [1.3, 0.7]), [2.0])

    def test_logistic_initial_condition(self):
        model = ik.get_model("logistic")
        design = ik.Design(np.array([0.0]), 0.1)
        np.testing.assert_allclose(ik.evaluate(model, design, [1.0, 1.0, 0.5]), [0.5])

    def test_out_of_bounds_rejected(self):
        model = ik.get_model("reciprocal")
        design = ik.Design(np.array([1.0]), 0.1)
        with pytest.raises(ik.OutOfBoundsError):
            ik.evaluate(model, design, [-1.0])

    def test_non_finite_evaluation_signalled(self):
        space = ik.ParameterSpace(np.array([0.0]), np.array([10.0]))
        model = ik.Model(
            name="exploding", space=space,
            evaluator=lambda t, th: float("inf") if th[0] > 5 else 1.0,
            evaluate_times=lambda times, th: np.where(th[0] > 5, np.inf, 1.0) * np.ones(len(times)),
        )
        design = ik.Design(np.array([1.0]), 0.1)
        assert ik.evaluate(model, design, [1.0])[0] == 1.0
        with pytest.raises(ik.EvaluationError):
            ik.evaluate(model, design, [6.0])

    def test_bitwise_pure(self):
        model = ik.get_model("logistic")
        design = ik.Design(np.linspace(0.5, 4.0, 7), 0.1)
        theta = [1.2, 2.0, 0.3]
        first = ik.evaluate(model, design, theta)
        second = ik.evaluate(model, design, theta)
        assert np.array_equal(first, second)

    def test_swap_symmetry_exact_at_output_level(self):
        model = ik.get_model("biexponential")
        rng = np.random.default_rng(1)
        for _ in range(10):
            times = np.sort(rng.uniform(0.0, 5.0, size=6))
            times[0] = 0.0
            design = ik.Design(np.unique(times), 0.1)
            a, b = rng.uniform(0.05, 9.0, size=2)
            left = ik.evaluate(model, design, [a, b])
            right = ik.evaluate(model, design, [b, a])
            assert np.array_equal(left, right)

    def test_redundant_scaling_family(self):
        model = ik.get_model("redundant-exponential")
        design = ik.Design(np.linspace(0.0, 3.0, 6), 0.1)
        theta = np.array([1.0, -0.5, 0.5])
        base = ik.evaluate(model, design, theta)
        for c in (-1.0, 0.3, 2.0):
            shifted = np.array([theta[0] * np.exp(c), theta[1], theta[2] - c])
            assert model.space.contains(shifted)
            np.testing.assert_allclose(ik.evaluate(model, design, shifted), base, rtol=1e-12)


class TestGenerateData:
    def setup_method(self):
        self.model = ik.get_model("reciprocal")

    def test_vanishing_noise_limit(self):
        design = ik.Design(np.array([1.0, 2.0]), 1e-12)
        ds = ik.generate_data(self.model, design, [0.5], seed=0)
        np.testing.assert_allclose(ds.observations[:, 0], 3.0, atol=1e-10)

    def test_deterministic(self):
        design = ik.Design(np.array([1.0, 2.0]), 0.3, replicates=3)
        first = ik.generate_data(self.model, design, [0.5], seed=42)
        second = ik.generate_data(self.model, design, [0.5], seed=42)
        assert np.array_equal(first.observations, second.observations)
        assert first.seed == 42
        np.testing.assert_array_equal(first.theta_true, [0.5])

    def test_noise_stream_contract(self):
        # One standard-normal draw per observation, replicates within time,
        # from numpy's default generator at the recorded seed.
        design = ik.Design(np.array([1.0, 2.0]), 0.3, replicates=2)
        ds = ik.generate_data(self.model, design, [0.5], seed=9)
        z = np.random.default_rng(9).standard_normal((2, 2))
        expect = 3.0 + 0.3 * z
        assert np.array_equal(ds.observations, expect)

    def test_sigma_scaling_shares_noise_stream(self):
        times = np.array([1.0, 2.0, 3.0])
        theta = [0.5]
        mean = ik.evaluate(self.model, ik.Design(times, 1.0), theta)[:, None]
        lo = ik.generate_data(self.model, ik.Design(times, 0.25), theta, seed=7)
        hi = ik.generate_data(self.model, ik.Design(times, 0.5), theta, seed=7)
        # sigma ratio is a power of two, so the residual scaling is exact
        assert np.array_equal(lo.observations - mean, 0.5 * (hi.observations - mean))

    def test_mean_is_unbiased_monte_carlo(self):
        # sample mean of 1e5 replicates at one time point within 4 sigma / sqrt(N)
        sigma, n_rep = 0.4, 100_000
        design = ik.Design(np.array([2.0]), sigma, replicates=n_rep)
        ds = ik.generate_data(self.model, design, [0.5], seed=3)
        assert abs(ds.observations.mean() - 3.0) < 4 * sigma / np.sqrt(n_rep)


class TestRegistry:
    def test_contents_and_labels(self):
        names = {m.name: m for m in ik.builtin_registry()}
        assert set(names) == {"linear", "biexponential", "redundant-exponential",
                              "reciprocal", "logistic"}
        assert names["biexponential"].identifiability == "locally-not-globally"
        assert names["redundant-exponential"].identifiability == "structurally-unidentifiable"
        assert names["reciprocal"].identifiability == "globally-identifiable"
        assert names["logistic"].identifiability == "globally-identifiable"

    def test_lookup_unknown(self):
        with pytest.raises(ik.UnknownModelError):
            ik.get_model("fourier")

    def test_constants_forwarded(self):
        X = np.column_stack([np.ones(5), np.arange(5.0)])
        model = ik.get_model("linear", design_matrix=X)
        design = ik.Design(np.arange(5.0), 0.1)
        np.testing.assert_allclose(ik.evaluate(model, design, [1.0, 2.0]), X @ [1.0, 2.0])

    def test_ordered_biexponential(self):
        model = ik.get_model("biexponential", ordered=True)
        assert model.space.contains([2.0, 1.0])
        assert not model.space.contains([1.0, 2.0])


class TestDatasetIO:
    def test_roundtrip(self, tmp_path):
        model = ik.get_model("biexponential")
        design = ik.Design(np.linspace(0.5, 3.0, 4), 0.2, replicates=2)
        ds = ik.generate_data(model, design, [2.0, 1.0], seed=5)
        path = tmp_path / "dataset.csv"
        ik.save_dataset(ds, path)
        back = ik.load_dataset(path)
        assert np.array_equal(back.observations, ds.observations)
        assert np.array_equal(back.design.time_points, design.time_points)
        assert back.design.noise_sd == design.noise_sd
        assert back.design.replicates == design.replicates
        assert back.seed == 5
        np.testing.assert_array_equal(back.theta_true, [2.0, 1.0])
        # the recorded parameter and seed regenerate the observations exactly
        regen = ik.generate_data(model, back.design, back.theta_true, back.seed)
        assert np.array_equal(regen.observations, back.observations)

    def test_shape_validation(self):
        design = ik.Design(np.array([1.0, 2.0]), 0.1, replicates=2)
        with pytest.raises(ValueError):
            ik.Dataset(design, np.zeros((2, 3)))
