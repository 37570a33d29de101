import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetnet import Branch, association_probabilities, paper_config, paper_model
from hetnet.association import branch_arguments
from hetnet.rate import (
    RateSettings,
    achievable_rate,
    interferer_density,
    psi_kernel,
    rate_constants,
    xi_kernel,
)

MODEL = paper_model()
CONFIG = paper_config(lambda_s=10.0, M_m=20)
RHO1 = 4.0841058620200644e-11  # tight-tolerance evaluation at CONFIG


def branch_radii(branch, r, config=CONFIG):
    return [c * r ** p for c, p in branch_arguments(branch, MODEL, config)]


@pytest.fixture(scope="module")
def constants():
    return rate_constants(MODEL, CONFIG)[0]


@pytest.fixture(scope="module")
def report():
    return achievable_rate(MODEL, CONFIG)


class TestInterfererDensity:
    def test_origin_is_clamped(self):
        assert interferer_density(0.0, MODEL, CONFIG) == 0.0

    def test_far_field(self):
        assert interferer_density(1e3, MODEL, CONFIG) == pytest.approx(CONFIG.lambda_m, rel=1e-6)

    def test_negative_region_is_clamped(self):
        # raw value at 0.5 km is -0.36505897 (40-digit quadrature of both void terms)
        assert interferer_density(0.5, MODEL, CONFIG) == 0.0

    @pytest.mark.parametrize("r,raw", [(1.0, 0.049709373931755982), (2.0, 0.099402956654909429)])
    def test_positive_region(self, r, raw):
        assert interferer_density(r, MODEL, CONFIG) == pytest.approx(raw, rel=1e-10)

    def test_bounded(self):
        d = interferer_density(np.linspace(0, 50, 5001), MODEL, CONFIG)
        assert np.all((d >= 0) & (d <= CONFIG.lambda_m))


class TestConstants:
    def test_cell_radius(self, constants):
        assert constants.c_v == 1 / math.sqrt(math.pi * CONFIG.lambda_m)

    def test_positive(self, constants):
        for name, value in constants.as_dict().items():
            assert value > 0, name
        assert constants.rho1 > CONFIG.sigma2

    def test_effective_loads(self, constants):
        a = association_probabilities(MODEL, CONFIG)
        lm_n = CONFIG.lambda_m * CONFIG.N - 1
        assert constants.n_m_eff == a.a_m * lm_n / CONFIG.lambda_m + 1
        assert constants.n_s_eff == a.a_s * lm_n / CONFIG.lambda_s + 1

    def test_rho1_refined(self, constants):
        assert constants.rho1 == pytest.approx(RHO1, rel=1e-9)

    def test_affine_in_macro_antennas(self):
        mu = [rate_constants(MODEL, CONFIG.replace(M_m=m))[0].mu1_tilde for m in (20, 40, 60)]
        assert mu[2] - mu[1] == pytest.approx(mu[1] - mu[0], rel=1e-9)
        assert mu[1] > mu[0]

    def test_no_small_cells(self):
        config = CONFIG.replace(lambda_s=0.0)
        k = rate_constants(MODEL, config)[0]
        assert k.nu3 == 0.0 and k.nu4 == 0.0
        a = association_probabilities(MODEL, config)
        noise = config.pilot_noise
        mbs_only = sum(
            p * config.P_m * config.M_m * k.xi1 / (k.n_m_eff * (nu + k.chi1 + noise))
            for p, nu in ((a.a_m_los, k.nu1), (a.a_m_nlos, k.nu2))
        )
        assert k.mu1_tilde == pytest.approx(mbs_only, rel=1e-12)

    def test_xi2_density_switch(self):
        k = rate_constants(MODEL, CONFIG, settings=RateSettings(xi2_density="lambda_s"))[0]
        base = rate_constants(MODEL, CONFIG)[0]
        assert k.xi2 == pytest.approx(base.xi2 * CONFIG.lambda_s / CONFIG.lambda_m, rel=1e-9)


class TestXi:
    def test_zero_z(self):
        assert xi_kernel(0.0, 0.1, 0.02, 0.01, 0.006, MODEL, CONFIG, RHO1) == 1.0

    def test_empty_domains(self):
        inf = math.inf
        assert xi_kernel(1.0, inf, inf, inf, inf, MODEL, CONFIG, RHO1) == 1.0

    def test_unit_z_is_probability(self):
        v = xi_kernel(1.0, *branch_radii(Branch.MBS_LOS, 0.1), MODEL, CONFIG, RHO1)
        assert 0 < v < 1

    def test_sampled_laplace_functional(self):
        # E[exp(-z I / rho1)] over 40000 sampled interference fields, 12 km window
        mean, stderr = 0.08336584271516308, 0.0008756999198898048
        v = xi_kernel(0.003, *branch_radii(Branch.MBS_LOS, 0.1), MODEL, CONFIG, RHO1)
        assert abs(v - mean) < 4 * stderr

    def test_nonincreasing_in_z(self):
        z = np.logspace(-6, 1, 50)
        v = xi_kernel(z, *branch_radii(Branch.SCB_NLOS, 0.2), MODEL, CONFIG, RHO1)
        assert np.all(np.diff(v) <= 0)


def psi_rates(P, n_eff, M, chi, g, config, rho1):
    """Exponential rates of the signal kernel, as mpmath numbers."""
    P, n_eff, M, chi, g, rho1 = map(mp.mpf, (P, n_eff, M, chi, g, rho1))
    rest = chi + mp.mpf(config.sigma2) / (config.tau * mp.mpf(config.p_p))
    low = g - g * g / (n_eff * (g + rest))
    high = g + M * g * g / (n_eff * (g + rest))
    return P / rho1 * low, P / rho1 * high


def psi_reference(z, *args):
    """The signal kernel evaluated with 50 digits."""
    with mp.workdps(50):
        low, high = psi_rates(*args)
        return mp.exp(-mp.mpf(z) * low) - mp.exp(-mp.mpf(z) * high)


class TestPsi:
    def args(self, constants, antennas=None):
        g = MODEL.L_los * 0.1 ** -MODEL.alpha_los
        m = CONFIG.M_m if antennas is None else antennas
        return CONFIG.P_m, constants.n_m_eff, m, constants.chi1, g, CONFIG, constants.rho1

    def test_zero(self, constants):
        assert psi_kernel(0.0, *self.args(constants)) == 0.0

    def test_more_antennas_help(self, constants):
        z = 1e-9
        assert 0 <= psi_kernel(z, *self.args(constants, 0)) < psi_kernel(z, *self.args(constants))

    @pytest.mark.parametrize("z", [1.0, 1e-3, 1e-8])
    def test_extended_precision(self, constants, z):
        ref = psi_reference(z, *self.args(constants))
        assert psi_kernel(z, *self.args(constants)) == pytest.approx(float(ref), rel=1e-10, abs=1e-300)

    def test_small_z_series(self, constants):
        args = self.args(constants)
        z = 1e-8
        with mp.workdps(50):
            low, high = psi_rates(*args)
            t = mp.mpf(z)
            # sum_k (-t)^k (low^k - high^k) / k!, divided by t
            series = mp.nsum(lambda k: (-t) ** k * (low ** k - high ** k) / mp.factorial(k), [1, 60]) / t
        integrand = math.exp(-z) / z * float(psi_kernel(z, *args))
        assert integrand == pytest.approx(float(series) * math.exp(-z), rel=1e-6)

    def test_vanishes_at_large_z(self, constants):
        assert psi_kernel(1e3, *self.args(constants)) < 1e-300


def test_kernels_fuzzed(constants):
    rng = np.random.default_rng(11)
    n = 10_000
    z = 10 ** rng.uniform(-9, 2, n)
    r = 10 ** rng.uniform(-3, 0.5, n)
    for branch in Branch:
        x = branch_radii(branch, r)
        xi = xi_kernel(z, *x, MODEL, CONFIG, constants.rho1)
        assert np.all((xi > 0) | (z > 1e-2)) and np.all((xi >= 0) & (xi <= 1))
        los = branch.los
        g = (MODEL.L_los * r ** -MODEL.alpha_los) if los else (MODEL.L_nlos * r ** -MODEL.alpha_nlos)
        psi = psi_kernel(z, CONFIG.P_s, constants.n_s_eff, CONFIG.M_s, constants.chi2, g, CONFIG, constants.rho1)
        assert np.all(psi >= 0)


class TestRate:
    def test_decomposition(self, report):
        parts = [report.r_m_los, report.r_m_nlos, report.r_s_los, report.r_s_nlos]
        assert all(p >= 0 for p in parts)
        assert report.r_total == pytest.approx(sum(parts), rel=1e-9)
        assert report.branch(Branch.SCB_LOS) == report.r_s_los

    def test_refinement_within_error(self, report):
        fine = achievable_rate(MODEL, CONFIG, RateSettings().finer())
        assert abs(fine.r_total - report.r_total) < report.quadrature_error

    def test_no_small_cells(self):
        rep = achievable_rate(MODEL, CONFIG.replace(lambda_s=0.0))
        assert rep.r_s_los == 0.0 and rep.r_s_nlos == 0.0 and rep.r_total > 0

    def test_as_dict(self, report):
        d = report.as_dict()
        assert d["r_total"] == report.r_total and "rho1" in d and "quadrature_error" in d

    def test_antenna_sweep_concave(self):
        base = paper_config(lambda_s=1.0)
        rates = [achievable_rate(MODEL, base.replace(M_m=m)).r_total for m in range(20, 501, 60)]
        inc = np.diff(rates)
        assert np.all(inc > 0) and np.all(np.diff(inc) < 0)

    @settings(max_examples=5, deadline=None)
    @given(lam=st.floats(0.5, 40), b=st.floats(0.1, 10))
    def test_nonnegative(self, lam, b):
        rep = achievable_rate(MODEL, CONFIG.replace(lambda_s=lam, B=b))
        assert rep.r_total >= 0 and np.isfinite(rep.quadrature_error)

    def test_association_part_bias_invariant(self):
        one = paper_config(lambda_s=7.0)
        two = one.replace(B=0.5, P_s=2 * one.P_s)
        a, b = association_probabilities(MODEL, one), association_probabilities(MODEL, two)
        assert a.a_s == pytest.approx(b.a_s, rel=1e-10)
