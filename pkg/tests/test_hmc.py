import numpy as np
import pytest

from qanneal.hmc import HmcConfig, hmc_step, leapfrog, tune_step_size


def standard_normal_energy():
    def logp(z):
        return -0.5 * np.sum(np.asarray(z) ** 2, axis=-1)

    def grad(z):
        return -np.asarray(z, dtype=float)

    return logp, grad


class TestConfig:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            HmcConfig(step_size=0.0, n_leapfrog=5, mass=np.ones(1))
        with pytest.raises(ValueError):
            HmcConfig(step_size=0.1, n_leapfrog=0, mass=np.ones(1))
        with pytest.raises(ValueError):
            HmcConfig(step_size=0.1, n_leapfrog=5, mass=np.array([1.0, -1.0]))

    def test_mass_coerced_to_vector(self):
        cfg = HmcConfig(step_size=0.1, n_leapfrog=5, mass=2.0)
        assert cfg.mass.shape == (1,)


class TestLeapfrog:
    def test_zero_momentum_zero_gradient_is_identity(self):
        cfg = HmcConfig(step_size=0.3, n_leapfrog=7, mass=np.ones(2))
        z = np.array([[1.5, -0.25], [0.0, 2.0]])
        p = np.zeros_like(z)
        z1, p1 = leapfrog(z, p, lambda x: np.zeros_like(x), cfg)
        assert np.array_equal(z1, z)
        assert np.array_equal(p1, p)

    def test_reversibility(self):
        rng = np.random.default_rng(0)
        cfg = HmcConfig(step_size=0.15, n_leapfrog=25, mass=np.array([1.0, 2.0]))
        _, grad = standard_normal_energy()
        z0 = rng.normal(size=(6, 2))
        p0 = rng.normal(size=(6, 2))
        z1, p1 = leapfrog(z0, p0, grad, cfg)
        z2, p2 = leapfrog(z1, -p1, grad, cfg)
        np.testing.assert_allclose(z2, z0, atol=1e-8)
        np.testing.assert_allclose(-p2, p0, atol=1e-8)

    def test_energy_error_is_second_order_in_step(self):
        rng = np.random.default_rng(1)
        logp, grad = standard_normal_energy()
        z0 = rng.normal(size=(30, 1))
        p0 = rng.normal(size=(30, 1))

        def max_energy_error(eps):
            cfg = HmcConfig(step_size=eps, n_leapfrog=int(round(2.0 / eps)), mass=np.ones(1))
            z1, p1 = leapfrog(z0, p0, grad, cfg)
            h0 = -logp(z0) + 0.5 * np.sum(p0**2, axis=1)
            h1 = -logp(z1) + 0.5 * np.sum(p1**2, axis=1)
            return float(np.max(np.abs(h1 - h0)))

        errs = [max_energy_error(eps) for eps in (0.2, 0.1, 0.05)]
        for coarse, fine in zip(errs, errs[1:]):
            assert 3.0 < coarse / fine < 5.5


class TestHmcStep:
    def test_zero_energy_change_always_accepts(self):
        # Flat density: leapfrog conserves the Hamiltonian exactly.
        def logp(z):
            return np.zeros(np.asarray(z).shape[0])

        cfg = HmcConfig(step_size=0.5, n_leapfrog=4, mass=np.ones(1))
        rng = np.random.default_rng(2)
        z = np.zeros((64, 1))
        z1, accepted = hmc_step(z, (logp, lambda x: np.zeros_like(x)), cfg, rng)
        assert accepted.all()
        assert not np.allclose(z1, z)

    def test_minus_inf_proposal_rejected_in_place(self):
        def logp(z):
            x = np.asarray(z)[:, 0]
            return np.where(np.abs(x) < 1.0, 0.0, -np.inf)

        cfg = HmcConfig(step_size=50.0, n_leapfrog=1, mass=np.ones(1))
        rng = np.random.default_rng(3)
        z = np.zeros((16, 1))
        z1, accepted = hmc_step(z, (logp, lambda x: np.zeros_like(x)), cfg, rng)
        assert not accepted.any()
        assert np.array_equal(z1, z)

    def test_single_point_interface(self):
        logp, grad = standard_normal_energy()
        cfg = HmcConfig(step_size=0.5, n_leapfrog=8, mass=np.ones(2))
        rng = np.random.default_rng(4)
        z1, accepted = hmc_step(np.zeros(2), (logp, grad), cfg, rng)
        assert z1.shape == (2,)
        assert isinstance(accepted, bool)

    def test_long_chain_moments_match_standard_normal(self):
        logp, grad = standard_normal_energy()
        cfg = HmcConfig(step_size=0.8, n_leapfrog=8, mass=np.ones(1))
        rng = np.random.default_rng(5)
        chains = 100
        z = rng.normal(size=(chains, 1))
        sums = np.zeros(chains)
        sq_sums = np.zeros(chains)
        steps = 1500
        for _ in range(steps):
            z, _ = hmc_step(z, (logp, grad), cfg, rng)
            sums += z[:, 0]
            sq_sums += z[:, 0] ** 2
        chain_means = sums / steps
        chain_vars = sq_sums / steps - chain_means**2
        se_mean = chain_means.std() / np.sqrt(chains)
        se_var = chain_vars.std() / np.sqrt(chains)
        assert abs(chain_means.mean()) < 4.0 * se_mean
        assert abs(chain_vars.mean() - 1.0) < 4.0 * se_var

    def test_deterministic_given_seed(self):
        logp, grad = standard_normal_energy()
        cfg = HmcConfig(step_size=0.4, n_leapfrog=6, mass=np.ones(2))
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(99)
            z = np.zeros((8, 2))
            for _ in range(5):
                z, _ = hmc_step(z, (logp, grad), cfg, rng)
            runs.append(z)
        assert np.array_equal(runs[0], runs[1])


class TestTuneStepSize:
    @pytest.mark.parametrize("eps0", [1e-3, 3.0])
    def test_reaches_reasonable_acceptance(self, eps0):
        logp, grad = standard_normal_energy()
        cfg = HmcConfig(step_size=eps0, n_leapfrog=8, mass=np.ones(1))
        rng = np.random.default_rng(6)
        z = rng.normal(size=(64, 1))
        tuned, z = tune_step_size(z, (logp, grad), cfg, rng, n_adapt=80)
        rates = []
        for _ in range(30):
            z, accepted = hmc_step(z, (logp, grad), tuned, rng)
            rates.append(accepted.mean())
        assert 0.4 < np.mean(rates) < 0.95

    def test_zero_adapt_is_a_no_op(self):
        logp, grad = standard_normal_energy()
        cfg = HmcConfig(step_size=0.2, n_leapfrog=3, mass=np.ones(1))
        rng = np.random.default_rng(7)
        z = np.zeros((4, 1))
        tuned, z_out = tune_step_size(z, (logp, grad), cfg, rng, n_adapt=0)
        assert tuned is cfg
        assert z_out is z
