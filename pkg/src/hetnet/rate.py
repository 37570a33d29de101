"""Analytic approximation of the typical user's achievable downlink rate.

The rate is a sum of four branch terms.  Each term integrates, over the
serving distance ``r`` and an auxiliary variable ``z``, the product of an
interference Laplace functional (``xi_kernel``) and a signal kernel
(``psi_kernel``).  Both kernels are evaluated in vectorised form on fixed
composite Gauss-Legendre grids, and the quadrature error is estimated by
comparing against the same rule at half the resolution.
"""

import dataclasses
import math

import numpy as np
from scipy import special

from .association import (
    Branch,
    association_probabilities,
    branch_arguments,
    branch_weight,
    conditional_moment,
    effective_cutoff,
    zeta1,
    _kinks,
)
from .channel import Tier, derived_constants
from .errors import ConfigError, ConvergenceError
from .quadrature import composite_nodes, gauss_legendre, integrate

__all__ = [
    "RateSettings",
    "RateConstants",
    "RateReport",
    "interferer_density",
    "rate_constants",
    "xi_kernel",
    "psi_kernel",
    "achievable_rate",
]

LN2 = math.log(2.0)


@dataclasses.dataclass(frozen=True)
class RateSettings:
    """Numerical knobs of the rate evaluation.

    ``r_nodes``/``z_nodes``/``u_nodes`` are Gauss-Legendre orders per panel
    for the serving distance, the ``log z`` variable and the ``log u``
    variable of the interference functional.  ``z_floor`` sets the lower
    ``z`` cut (relative to the signal exponent) below which the integrand is
    replaced by its linear small-``z`` limit.  ``nu_cutoff_km`` is the
    near-field radius below which the mean serving gains are truncated.
    """

    r_nodes: int = 16
    r_panels: int = 6
    z_nodes: int = 48
    z_panels: int = 2
    u_nodes: int = 32
    z_floor: float = 1e-7
    z_ceiling: float = 40.0
    nu_cutoff_km: float = 1e-3
    xi2_density: str = "as_written"
    epsrel: float = 1e-8

    def __post_init__(self):
        if self.xi2_density not in ("as_written", "lambda_s"):
            raise ConfigError("xi2_density must be 'as_written' or 'lambda_s'")
        if not self.nu_cutoff_km > 0:
            raise ConfigError("nu_cutoff_km must be > 0")

    def coarser(self):
        return dataclasses.replace(
            self,
            r_nodes=max(self.r_nodes // 2, 2),
            z_nodes=max(self.z_nodes // 2, 2),
            u_nodes=max(self.u_nodes // 2, 2),
        )

    def finer(self):
        return dataclasses.replace(
            self, r_nodes=self.r_nodes * 2, z_nodes=self.z_nodes * 2, u_nodes=self.u_nodes * 2
        )


@dataclasses.dataclass(frozen=True)
class RateConstants:
    c_v: float
    chi1: float
    chi2: float
    xi1: float
    xi2: float
    nu1: float
    nu2: float
    nu3: float
    nu4: float
    n_m_eff: float
    n_s_eff: float
    mu1_tilde: float
    rho1: float

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class RateReport:
    r_total: float
    r_m_los: float
    r_m_nlos: float
    r_s_los: float
    r_s_nlos: float
    constants: RateConstants
    quadrature_error: float

    def branch(self, branch):
        return {
            Branch.MBS_LOS: self.r_m_los,
            Branch.MBS_NLOS: self.r_m_nlos,
            Branch.SCB_LOS: self.r_s_los,
            Branch.SCB_NLOS: self.r_s_nlos,
        }[branch]

    def as_dict(self):
        out = {k: getattr(self, k) for k in ("r_total", "r_m_los", "r_m_nlos", "r_s_los", "r_s_nlos")}
        out["quadrature_error"] = self.quadrature_error
        out.update(self.constants.as_dict())
        return out


def interferer_density(r, model, config):
    """Density of same-pilot users in other macro cells at distance ``r``.

    The raw expression goes negative near the origin, so it is clamped to
    ``[0, lambda_m]``.
    """
    r = np.asarray(r, dtype=float)
    k1, _, _, k4 = derived_constants(model, config)
    los = zeta1(r, k1 * r ** model.ratio_l_nl, model, config)
    nlos = zeta1(k4 * r ** model.ratio_nl_l, r, model, config)
    return np.clip(config.lambda_m * (1.0 - los - nlos), 0.0, config.lambda_m)


def _serving_gain(model, los):
    if los:
        return model.L_los, model.alpha_los
    return model.L_nlos, model.alpha_nlos


def rate_constants(model, config, assoc=None, settings=None):
    """Constants entering the pilot-contamination proxy ``rho1``.

    Returns ``(constants, error)`` where ``error`` sums the quadrature error
    estimates of the underlying integrals.
    """
    settings = settings or RateSettings()
    if assoc is None:
        assoc = association_probabilities(model, config)
    c_v = 1.0 / math.sqrt(math.pi * config.lambda_m)
    tol = dict(epsrel=settings.epsrel, epsabs=0.0)
    err = 0.0
    knots = sorted({*model.los_profile_mbs.breakpoints, *model.los_profile_scb.breakpoints})
    scale = c_v

    def chi(profile):
        def f(u):
            p = profile(u)
            gain = model.L_los * u ** -model.alpha_los * p + model.L_nlos * u ** -model.alpha_nlos * (1 - p)
            return u * float(interferer_density(u, model, config)) * gain
        # the clamp switches off at an interior point; pass a few hints
        return integrate(f, c_v, np.inf, points=knots, scale=scale, **tol)

    def xi(profile, density):
        def f(u):
            p = profile(u)
            return u * (
                model.L_los ** 2 * u ** (-2 * model.alpha_los) * p
                + model.L_nlos ** 2 * u ** (-2 * model.alpha_nlos) * (1 - p)
            )
        val, e = integrate(f, c_v, np.inf, points=knots, scale=scale, **tol)
        return 2 * math.pi * density * val, 2 * math.pi * density * e

    chi1, e1 = chi(model.los_profile_mbs)
    chi2, e2 = chi(model.los_profile_scb)
    chi1, chi2 = 2 * math.pi * chi1, 2 * math.pi * chi2
    xi1, e3 = xi(model.los_profile_mbs, config.lambda_m)
    xi2_density = config.lambda_m if settings.xi2_density == "as_written" else config.lambda_s
    xi2, e4 = xi(model.los_profile_scb, xi2_density)
    err += 2 * math.pi * (e1 + e2) + e3 + e4

    nus = {}
    for branch in Branch:
        if assoc.probability(branch) <= 0:
            nus[branch] = 0.0
            continue
        gain, slope = _serving_gain(model, branch.los)
        nus[branch], e = conditional_moment(
            branch,
            lambda u, gain=gain, slope=slope: gain * u ** -slope,
            model,
            config,
            lower=settings.nu_cutoff_km,
            epsrel=settings.epsrel,
        )
        err += e

    lm_n = config.lambda_m * config.N - 1.0
    n_m_eff = assoc.a_m * lm_n / config.lambda_m + 1.0
    n_s_eff = assoc.a_s * lm_n / config.lambda_s + 1.0 if config.lambda_s > 0 else math.nan
    noise = config.pilot_noise

    terms = (
        (Branch.MBS_LOS, config.P_m, config.M_m, xi1, n_m_eff, chi1),
        (Branch.MBS_NLOS, config.P_m, config.M_m, xi1, n_m_eff, chi1),
        (Branch.SCB_LOS, config.P_s, config.M_s, xi2, n_s_eff, chi2),
        (Branch.SCB_NLOS, config.P_s, config.M_s, xi2, n_s_eff, chi2),
    )
    mu1 = 0.0
    for branch, power, antennas, xi_val, n_eff, chi_val in terms:
        prob = assoc.probability(branch)
        if prob > 0:
            mu1 += prob * power * antennas * xi_val / (n_eff * (nus[branch] + chi_val + noise))

    constants = RateConstants(
        c_v=c_v,
        chi1=chi1,
        chi2=chi2,
        xi1=xi1,
        xi2=xi2,
        nu1=nus[Branch.MBS_LOS],
        nu2=nus[Branch.MBS_NLOS],
        nu3=nus[Branch.SCB_LOS],
        nu4=nus[Branch.SCB_NLOS],
        n_m_eff=n_m_eff,
        n_s_eff=n_s_eff,
        mu1_tilde=mu1,
        rho1=mu1 + config.sigma2,
    )
    return constants, err


def _tail_functional(a, c, alpha):
    """``int_a^inf (1 - exp(-c u^-alpha)) u du`` in closed form (``alpha > 2``)."""
    delta = 2.0 / alpha
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = c * np.power(a, -alpha)
        lower_gamma = special.gammainc(1.0 - delta, t) * special.gamma(1.0 - delta)
        val = 0.5 * (np.power(c, delta) * lower_gamma + np.expm1(-t) * a * a)
    # a = 0 gives 0 * inf in the second term; the limit is the full gamma value
    val = np.where(a > 0, val, 0.5 * np.power(c, delta) * special.gamma(1.0 - delta))
    return np.where((c > 0) & np.isfinite(a), val, 0.0)


def _laplace_exponent(profile, los, x, c, alpha, u_nodes):
    """``int_x^inf (1 - exp(-c u^-alpha)) q(u) u du`` with ``q`` the LoS or NLoS share.

    ``x`` and ``c`` broadcast against each other.
    """
    x, c = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(c, dtype=float))
    out = np.zeros(x.shape)
    gx, gw = gauss_legendre(u_nodes)
    for a, b, pa, slope in profile.segments():
        qa, qs = (pa, slope) if los else (1.0 - pa, -slope)
        if qa == 0 and qs == 0:
            continue
        lo = np.maximum(x, a)
        active = lo < b
        if not np.any(active):
            continue
        # log-spaced nodes; the origin is floored far below any relevant scale
        lo_log = np.log(np.maximum(lo[active], b * 1e-9))
        hi_log = math.log(b)
        half = 0.5 * (hi_log - lo_log)
        w = (0.5 * (hi_log + lo_log))[:, None] + half[:, None] * gx
        u = np.exp(w)
        q = qa + qs * (u - a)
        cc = c[active][:, None]
        integrand = -np.expm1(-cc * np.exp(-alpha * w)) * q * u * u
        out[active] += half * (integrand * gw).sum(axis=1)
    tail = profile.tail_value if los else 1.0 - profile.tail_value
    if tail > 0:
        if alpha <= 2.0:
            raise ConvergenceError(
                f"interference functional diverges for path-loss exponent {alpha} <= 2", achieved=math.inf
            )
        start = np.maximum(x, profile.breakpoints[-1])
        out += tail * _tail_functional(start, c, alpha)
    return out


def xi_kernel(z, x1, x2, x3, x4, model, config, rho1, u_nodes=32):
    """Laplace functional of the out-of-cell interference at ``z``.

    ``x1..x4`` are the LoS-MBS, NLoS-MBS, LoS-SCB and NLoS-SCB exclusion
    radii; all arguments broadcast.  Values lie in ``(0, 1]``.
    """
    z = np.asarray(z, dtype=float)
    s_m = z * config.P_m / rho1
    expo = config.lambda_m * (
        _laplace_exponent(model.los_profile_mbs, True, x1, s_m * model.L_los, model.alpha_los, u_nodes)
        + _laplace_exponent(model.los_profile_mbs, False, x2, s_m * model.L_nlos, model.alpha_nlos, u_nodes)
    )
    if config.lambda_s > 0:
        s_s = z * config.P_s / rho1
        expo = expo + config.lambda_s * (
            _laplace_exponent(model.los_profile_scb, True, x3, s_s * model.L_los, model.alpha_los, u_nodes)
            + _laplace_exponent(model.los_profile_scb, False, x4, s_s * model.L_nlos, model.alpha_nlos, u_nodes)
        )
    return np.exp(-2.0 * math.pi * expo)


def _psi_exponents(power, n_eff, antennas, chi, serving_gain, config, rho1):
    """Rates ``a <= b`` such that ``psi = exp(-a z) - exp(-b z)``."""
    g = np.asarray(serving_gain, dtype=float)
    rest = chi + config.pilot_noise
    denom = n_eff * (g + rest)
    # g - g^2/denom written without cancellation
    low = g * ((n_eff - 1.0) * (g + rest) + rest) / denom
    high = g + antennas * g * g / denom
    scale = power / rho1
    return scale * low, scale * high


def psi_kernel(z, P, n_eff, M, chi, serving_gain, config, rho1):
    """Signal kernel; nonnegative, zero at ``z = 0`` and as ``z -> inf``."""
    a, b = _psi_exponents(P, n_eff, M, chi, serving_gain, config, rho1)
    z = np.asarray(z, dtype=float)
    # exp(-a z) - exp(-b z) = exp(-a z) * (1 - exp(-(b - a) z))
    return -np.exp(-a * z) * np.expm1(-(b - a) * z)


def _branch_rate(branch, model, config, consts, settings, r_max):
    """Branch term ``A * E[log2(1 + SINR)]`` on a fixed tensor grid."""
    args = branch_arguments(branch, model, config)
    edges = [0.0, *[k for k in _kinks(branch, model, config, args) if 0 < k < r_max], r_max]
    r, wr = composite_nodes(edges, settings.r_panels, settings.r_nodes)
    weight = branch_weight(branch, r, model, config, args)
    keep = weight > 0
    r, wr, weight = r[keep], wr[keep], weight[keep]
    if r.size == 0:
        return 0.0

    gain, slope = _serving_gain(model, branch.los)
    g = gain * r ** -slope
    if branch.tier is Tier.MBS:
        power, n_eff, antennas, chi = config.P_m, consts.n_m_eff, config.M_m, consts.chi1
    else:
        power, n_eff, antennas, chi = config.P_s, consts.n_s_eff, config.M_s, consts.chi2
    a, b = _psi_exponents(power, n_eff, antennas, chi, g, config, consts.rho1)

    # z on a log scale between a floor where psi is linear and a ceiling
    # where exp(-(1 + a) z) is negligible
    z_lo = settings.z_floor / (1.0 + b)
    z_hi = settings.z_ceiling / (1.0 + a)
    t, wt = composite_nodes(np.linspace(0.0, 1.0, settings.z_panels + 1), 1, settings.z_nodes)
    log_lo, log_hi = np.log(z_lo), np.log(z_hi)
    span = (log_hi - log_lo)[:, None]
    z = np.exp(log_lo[:, None] + span * t)
    wz = span * wt

    xs = [c * r[:, None] ** p for c, p in args]
    xi = xi_kernel(z, *xs, model, config, consts.rho1, settings.u_nodes)
    integrand = np.exp(-(1.0 + a[:, None]) * z) * -np.expm1(-(b - a)[:, None] * z) * xi
    inner = (integrand * wz).sum(axis=1) + (b - a) * z_lo
    return float(np.sum(wr * weight * inner) / LN2)


def _rate_terms(model, config, assoc, consts, settings):
    terms = {}
    for branch in Branch:
        if assoc.probability(branch) <= 0:
            terms[branch] = 0.0
            continue
        r_max = effective_cutoff(branch, model, config)
        terms[branch] = _branch_rate(branch, model, config, consts, settings, r_max)
    return terms


def achievable_rate(model, config, settings=None, assoc=None):
    """Analytic rate approximation in bits/s/Hz.

    The reported ``quadrature_error`` is the change against a rule of half
    the order plus the error of the adaptive constant integrals.
    """
    settings = settings or RateSettings()
    if assoc is None:
        assoc = association_probabilities(model, config)
    consts, _ = rate_constants(model, config, assoc, settings)
    terms = _rate_terms(model, config, assoc, consts, settings)
    coarse = _rate_terms(model, config, assoc, consts, settings.coarser())
    total = sum(terms.values())
    error = abs(total - sum(coarse.values())) + assoc.error
    if not np.isfinite(total):
        raise ConvergenceError("rate integral is not finite", achieved=math.inf)
    return RateReport(
        r_total=total,
        r_m_los=terms[Branch.MBS_LOS],
        r_m_nlos=terms[Branch.MBS_NLOS],
        r_s_los=terms[Branch.SCB_LOS],
        r_s_nlos=terms[Branch.SCB_NLOS],
        constants=consts,
        quadrature_error=error,
    )
