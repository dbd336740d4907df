import numpy as np
import pytest
from scipy import stats

from bellrot import estimators as est
from bellrot.bell import PHI_MINUS_AXIS, PHI_PLUS_AXIS, outcome_distribution
from bellrot.quantum import BELL_ORDER, BellKind, RotationVector

NO_NOISE = est.FilterConfig(process_noise_coeff=0.0, resample=False)


def bell_sequence(truth, n, seed, alpha=0.0):
    """Alternating phi+/phi- protocol outcomes sampled at a fixed true rotation."""
    rng = np.random.default_rng(seed)
    rot = RotationVector.from_array(truth)
    protocol = [(BellKind.PHI_PLUS, PHI_PLUS_AXIS), (BellKind.PHI_MINUS, PHI_MINUS_AXIS)]
    out = []
    for j in range(n):
        kind, axis = protocol[j % 2]
        p = outcome_distribution(kind, rot, axis, alpha).as_array()
        out.append((kind, axis, BELL_ORDER[rng.choice(4, p=p)]))
    return out


class TestPrior:
    def test_sample_spread(self):
        # Chi-square bound: for n=3000 draws per component the sample std of
        # N(0, 0.1745^2) lies in [0.15, 0.20] with probability >> 0.99.
        n = 3000
        lo = 0.1745 * np.sqrt(stats.chi2.ppf(1e-6, n - 1) / (n - 1))
        hi = 0.1745 * np.sqrt(stats.chi2.ppf(1 - 1e-6, n - 1) / (n - 1))
        assert 0.15 < lo and hi < 0.20
        for seed in range(20):
            ens = est.init_ensemble(est.PriorConfig(n_theta=1000), seed)
            std = ens.particles.std(axis=0, ddof=1)
            assert np.all((std > 0.15) & (std < 0.20))

    def test_equal_weights(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=1000), 1)
        assert np.all(ens.weights == 1 / 1000)
        assert ens.m == 0

    def test_deterministic(self):
        a = est.init_ensemble(est.PriorConfig(), 42)
        b = est.init_ensemble(est.PriorConfig(), 42)
        assert np.array_equal(a.particles, b.particles)

    def test_validation(self):
        with pytest.raises(ValueError):
            est.PriorConfig(sigma_prior=0.0)
        with pytest.raises(ValueError):
            est.PriorConfig(n_theta=1)

    def test_covariance_of_large_prior(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=100_000), 3)
        _, cov = est.estimate(ens)
        assert np.abs(cov - 0.1745**2 * np.eye(3)).max() < 0.03 * 0.1745**2


class TestProcessNoise:
    @pytest.mark.parametrize("m, expected", [(1, 0.1), (1000, 0.001), (8, 0.025)])
    def test_schedule(self, m, expected):
        assert est.process_noise_sigma(m, est.FilterConfig()) == pytest.approx(expected, rel=1e-12)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            est.process_noise_sigma(0, est.FilterConfig())

    def test_zero_coefficient_leaves_particles(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=50), 0)
        before = ens.particles.copy()
        est.predict(ens, est.FilterConfig(process_noise_coeff=0.0))
        assert np.array_equal(before, ens.particles)

    def test_perturbation_spread(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=100_000), 4)
        ens.m = 7
        before, weights = ens.particles.copy(), ens.weights.copy()
        est.predict(ens, est.FilterConfig())
        delta = ens.particles - before
        assert np.abs(delta.std(axis=0) / est.process_noise_sigma(8, est.FilterConfig()) - 1).max() < 0.02
        assert np.array_equal(weights, ens.weights)


class TestUpdate:
    def test_normalisation_arithmetic(self):
        ens = est.pinned_ensemble(np.zeros((2, 3)))
        est.reweight(ens, np.array([0.2, 0.6]))
        assert np.allclose(ens.weights, [0.25, 0.75])
        assert ens.m == 1

    def test_true_particle_gains(self):
        truth = np.array([0.05, -0.03, 0.08])
        ens = est.pinned_ensemble(np.stack([truth, np.zeros(3)]))
        kind, axis = BellKind.PHI_PLUS, PHI_PLUS_AXIS
        p_true = outcome_distribution(kind, RotationVector.from_array(truth), axis).as_array()
        p_zero = outcome_distribution(kind, RotationVector(), axis).as_array()
        observed = BELL_ORDER[int(np.argmax(p_true[:3] - p_zero[:3]))]
        est.update_weights(ens, kind, axis, observed)
        assert ens.weights[0] > ens.weights[1]

    def test_singlet_outcome_degenerate(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=100), 0)
        with pytest.raises(est.DegenerateLikelihoodError):
            est.update_weights(ens, BellKind.PHI_PLUS, PHI_PLUS_AXIS, BellKind.PSI_MINUS, alpha=0.0)

    def test_weights_stay_normalised(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=500), 5)
        for kind, axis, observed in bell_sequence([0.02, 0.04, -0.06], 200, 6, alpha=0.01):
            est.predict(ens, est.FilterConfig())
            est.update_weights(ens, kind, axis, observed, 0.01)
            assert abs(ens.weights.sum() - 1) < 1e-12
            est.maybe_resample(ens, est.FilterConfig())

    def test_matches_exact_bayes_on_grid(self):
        axis_values = np.linspace(-0.25, 0.25, 10)
        grid = np.array(np.meshgrid(axis_values, axis_values, axis_values, indexing="ij")).reshape(3, -1).T
        truth = np.array([0.07, -0.11, 0.04])
        seq = bell_sequence(truth, 50, seed=11, alpha=0.02)

        ens = est.pinned_ensemble(grid)
        for kind, axis, observed in seq:
            est.predict(ens, NO_NOISE)
            est.update_weights(ens, kind, axis, observed, 0.02)
            assert not est.maybe_resample(ens, NO_NOISE)

        # Brute force: product of density-matrix likelihoods per hypothesis.
        log_post = np.zeros(len(grid))
        for g, point in enumerate(grid):
            rot = RotationVector.from_array(point)
            for kind, axis, observed in seq:
                log_post[g] += np.log(outcome_distribution(kind, rot, axis, 0.02)[observed])
        exact = np.exp(log_post - log_post.max())
        exact /= exact.sum()
        assert np.array_equal(ens.particles, grid)
        assert np.abs(ens.weights - exact).max() < 1e-10


class TestEffectiveSampleSize:
    def test_uniform(self):
        assert est.effective_sample_size(est.pinned_ensemble(np.zeros((500, 3)))) == pytest.approx(500)

    def test_single_particle(self):
        w = np.zeros(10)
        w[3] = 1
        assert est.effective_sample_size(est.pinned_ensemble(np.zeros((10, 3)), w)) == pytest.approx(1)

    def test_two_halves(self):
        w = np.zeros(10)
        w[:2] = 0.5
        assert est.effective_sample_size(est.pinned_ensemble(np.zeros((10, 3)), w)) == pytest.approx(2)


class TestEstimate:
    def test_single_particle(self):
        ens = est.pinned_ensemble(np.array([[0.1, 0.2, 0.3]]))
        mean, cov = est.estimate(ens)
        assert np.allclose(mean.as_array(), [0.1, 0.2, 0.3])
        assert np.allclose(cov, 0)

    def test_symmetric_pair(self):
        v = np.array([0.1, -0.2, 0.05])
        mean, cov = est.estimate(est.pinned_ensemble(np.stack([v, -v])))
        assert np.allclose(mean.as_array(), 0)
        assert np.allclose(cov, np.outer(v, v))


class TestResampling:
    def test_degenerate_weights_cluster(self):
        points = np.random.default_rng(0).normal(0, 0.1, size=(400, 3))
        w = np.full(400, 1e-9)
        w[17] = 1.0
        ens = est.pinned_ensemble(points, w, seed=1)
        _, sigma = est.estimate(ens)
        est.resample_defensive(ens, est.FilterConfig())
        spread = np.abs(ens.particles - points[17]).max()
        assert spread < 10 * np.sqrt(np.trace(sigma) + 1e-12)
        assert np.allclose(ens.weights, 1 / 400)

    def test_weights_reset(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=300), 2)
        ens.weights = np.random.default_rng(3).dirichlet(np.ones(300))
        est.resample_defensive(ens, est.FilterConfig())
        assert np.all(ens.weights == 1 / 300)
        assert ens.n_resamples == 1

    def test_preserves_expectation(self):
        # Resampled mean should differ from the weighted mean by sampling noise only.
        n, reps = 1000, 60
        z_scores = []
        for rep in range(reps):
            rng = np.random.default_rng(100 + rep)
            points = rng.normal(0, 0.1, size=(n, 3))
            weights = rng.dirichlet(np.ones(n))
            ens = est.pinned_ensemble(points, weights, seed=rep)
            mean_before, cov = est.estimate(ens)
            est.resample_defensive(ens, est.FilterConfig())
            # selection variance cov/n plus jitter variance (0.9*0.1 + 0.1)*cov/n
            se = np.sqrt(np.diag(cov) * (1 + 0.19) / n)
            z_scores.append((ens.particles.mean(axis=0) - mean_before.as_array()) / se)
        z = np.array(z_scores)
        assert np.abs(z.mean(axis=0)).max() < 3 / np.sqrt(reps)
        assert np.mean(np.abs(z) < 3) > 0.97

    def test_threshold_gate(self):
        ens = est.init_ensemble(est.PriorConfig(n_theta=100), 0)
        assert not est.maybe_resample(ens, est.FilterConfig())
        ens.weights = np.zeros(100)
        ens.weights[:10] = 0.1
        assert est.maybe_resample(ens, est.FilterConfig())


class TestSingleQubit:
    @pytest.mark.parametrize("theta, expected", [(0.0, 0.5), (np.pi / 2, 1.0), (0.1, 0.549917)])
    def test_success_prob(self, theta, expected):
        assert est.single_qubit_success_prob(theta) == pytest.approx(expected, abs=1e-6)

    def test_mixed_success_prob(self):
        assert est.single_qubit_success_prob(np.pi / 2, alpha=1.0) == pytest.approx(0.5)

    def test_half_successes_give_zero(self):
        theta, var = est.single_qubit_estimate(est.SingleQubitTally([100, 100, 100], [50, 50, 50]))
        assert np.allclose(theta.as_array(), 0)
        assert np.allclose(var, 1 / 100)

    def test_all_successes_clamped(self):
        theta, _ = est.single_qubit_estimate(est.SingleQubitTally([10, 10, 10], [10, 0, 5]))
        assert np.pi / 2 - 1e-5 < theta.theta_x < np.pi / 2
        assert -np.pi / 2 < theta.theta_y < -np.pi / 2 + 1e-5

    def test_variance_is_one_over_n(self):
        _, var = est.single_qubit_estimate(est.SingleQubitTally([1000, 400, 90], [612, 150, 45]))
        assert np.allclose(var, [1 / 1000, 1 / 400, 1 / 90], rtol=1e-9)

    def test_needs_measurements(self):
        with pytest.raises(ValueError):
            est.single_qubit_estimate(est.SingleQubitTally([0, 1, 1], [0, 1, 0]))

    def test_tally_validation(self):
        with pytest.raises(ValueError):
            est.SingleQubitTally([3, 3, 3], [4, 0, 0])

    @pytest.mark.parametrize(
        "m, expected",
        [(1, ("z", "x", 1)), (2, ("x", "y", 2)), (3, ("y", "z", 0)), (4, ("z", "x", 1))],
    )
    def test_cycle(self, m, expected):
        assert tuple(est.single_qubit_cycle_schedule(m)) == expected

    @pytest.mark.parametrize("theta", [0.0, 0.05, 0.1])
    def test_estimator_variance(self, theta):
        n, reps = 10_000, 4000
        rng = np.random.default_rng(int(theta * 1000) + 7)
        successes = rng.binomial(n, est.single_qubit_success_prob(theta), size=reps)
        estimates = [
            est.single_qubit_estimate(est.SingleQubitTally([n, n, n], [s, s, s]))[0].theta_x for s in successes
        ]
        assert np.var(estimates, ddof=1) == pytest.approx(1 / n, rel=0.15)
        assert np.mean(estimates) == pytest.approx(theta, abs=4 / np.sqrt(n * reps) * 3)

    def test_likelihood(self):
        ens = est.pinned_ensemble(np.array([[0.0, 0.3, 0.0], [0.0, -0.3, 0.0]]))
        plus = est.single_qubit_likelihood(ens, 1, True)
        minus = est.single_qubit_likelihood(ens, 1, False)
        assert np.allclose(plus + minus, 1)
        assert plus[0] > plus[1]
