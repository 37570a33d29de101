"""Association probabilities, mean loads and serving-distance densities.

Everything here is built on the void probabilities of the LoS/NLoS-thinned
base-station processes seen from the typical user at the origin.  For the
piecewise-linear LoS profiles of :mod:`hetnet.channel` the inner void
integrals are closed-form, so only the outer integral over the serving
distance needs quadrature.
"""

import dataclasses
import enum
import math

import numpy as np

from .channel import Tier, derived_constants
from .errors import ConvergenceError, DegenerateBranchError
from .quadrature import integrate

__all__ = [
    "Branch",
    "AssociationReport",
    "ServingDistanceDensity",
    "zeta1",
    "zeta2",
    "branch_arguments",
    "branch_weight",
    "association_probabilities",
    "mean_loads",
    "serving_distance_pdf",
    "conditional_moment",
]

SUM_TOLERANCE = 1e-4
_TAIL_EXPONENT = 60.0


class Branch(enum.Enum):
    MBS_LOS = "mbs_los"
    MBS_NLOS = "mbs_nlos"
    SCB_LOS = "scb_los"
    SCB_NLOS = "scb_nlos"

    @property
    def tier(self):
        return Tier.MBS if self in (Branch.MBS_LOS, Branch.MBS_NLOS) else Tier.SCB

    @property
    def los(self):
        return self in (Branch.MBS_LOS, Branch.SCB_LOS)

    @classmethod
    def of(cls, tier, los):
        if tier is Tier.MBS:
            return cls.MBS_LOS if los else cls.MBS_NLOS
        return cls.SCB_LOS if los else cls.SCB_NLOS


def _void_exponent(profile, density, x_los, x_nlos):
    return 2.0 * math.pi * density * (profile.los_moment(x_los) + profile.nlos_moment(x_nlos))


def zeta1(x1, x2, model, config):
    """Probability of no LoS MBS within ``x1`` and no NLoS MBS within ``x2``."""
    return np.exp(-_void_exponent(model.los_profile_mbs, config.lambda_m, x1, x2))


def zeta2(x1, x2, model, config):
    """Same as :func:`zeta1` for the SCB tier."""
    return np.exp(-_void_exponent(model.los_profile_scb, config.lambda_s, x1, x2))


def branch_arguments(branch, model, config):
    """Exclusion radii of a branch as ``(coef, power)`` pairs.

    For a serving distance ``r`` the four radii are ``coef * r**power``:
    LoS MBS, NLoS MBS, LoS SCB and NLoS SCB.  They are the arguments of
    ``zeta1``/``zeta2`` in the association integrals and of the interference
    functional in the rate expression.
    """
    k1, k2, k3, k4 = derived_constants(model, config)
    e, inv = model.ratio_l_nl, model.ratio_nl_l
    if branch is Branch.MBS_LOS:
        return ((1.0, 1.0), (k1, e), (k2, 1.0), (k1 * k3, e))
    if branch is Branch.MBS_NLOS:
        return ((k4, inv), (1.0, 1.0), (k2 * k4, inv), (k3, 1.0))
    if branch is Branch.SCB_LOS:
        return ((1.0 / k2, 1.0), (k1 / k3, e), (1.0, 1.0), (k1, e))
    return ((k4 / k2, inv), (1.0 / k3, 1.0), (k4, inv), (1.0, 1.0))


def _radii(args, r):
    return [c * np.power(r, p) for c, p in args]


def _tier_density(tier, config):
    return config.lambda_m if tier is Tier.MBS else config.lambda_s


def branch_weight(branch, r, model, config, args=None):
    """Unnormalised serving-distance density ``A_branch * f_branch(r)``."""
    r = np.asarray(r, dtype=float)
    density = _tier_density(branch.tier, config)
    if density == 0:
        return np.zeros_like(r)
    if args is None:
        args = branch_arguments(branch, model, config)
    x1, x2, x3, x4 = _radii(args, r)
    p = model.profile(branch.tier)(r)
    q = p if branch.los else 1.0 - p
    exponent = _void_exponent(model.los_profile_mbs, config.lambda_m, x1, x2)
    if config.lambda_s > 0:
        exponent = exponent + _void_exponent(model.los_profile_scb, config.lambda_s, x3, x4)
    return 2.0 * math.pi * density * r * q * np.exp(-exponent)


def _kinks(branch, model, config, args):
    """Serving distances where a branch integrand has a kink."""
    kinks = set()
    own = model.profile(branch.tier)
    kinks.update(float(b) for b in own.breakpoints[1:])
    profiles = (model.los_profile_mbs, model.los_profile_mbs, model.los_profile_scb, model.los_profile_scb)
    for (c, p), prof in zip(args, profiles):
        for b in prof.breakpoints[1:]:
            kinks.add(float((b / c) ** (1.0 / p)))
    return sorted(kinks)


def _support_end(branch, model, config):
    """Upper end of the branch density support (``inf`` when unbounded)."""
    prof = model.profile(branch.tier)
    tail = prof.tail_value if branch.los else 1.0 - prof.tail_value
    if tail > 0:
        return math.inf
    # last knot where the branch weight q(r) is nonzero
    r = prof.breakpoints
    q = prof(r) if branch.los else 1.0 - prof(r)
    nz = np.nonzero(q > 0)[0]
    if nz.size == 0:
        return 0.0
    i = nz[-1]
    return float(r[min(i + 1, r.size - 1)])


def effective_cutoff(branch, model, config, exponent=_TAIL_EXPONENT):
    """Distance beyond which the branch weight is below ``exp(-exponent)``."""
    end = _support_end(branch, model, config)
    args = branch_arguments(branch, model, config)

    def expo(r):
        x1, x2, x3, x4 = _radii(args, r)
        val = _void_exponent(model.los_profile_mbs, config.lambda_m, x1, x2)
        if config.lambda_s > 0:
            val += _void_exponent(model.los_profile_scb, config.lambda_s, x3, x4)
        return float(val)

    hi = 1.0 / math.sqrt(math.pi * config.lambda_m)
    while expo(hi) < exponent:
        hi *= 2.0
        if hi > 1e6:
            raise ConvergenceError("void probability does not decay; check the configuration")
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if expo(mid) < exponent:
            lo = mid
        else:
            hi = mid
    return min(hi, end)


@dataclasses.dataclass(frozen=True)
class AssociationReport:
    a_m_los: float
    a_m_nlos: float
    a_s_los: float
    a_s_nlos: float
    a_m: float
    a_s: float
    n_m: float
    n_s: float
    error: float = 0.0

    @property
    def total(self):
        return self.a_m_los + self.a_m_nlos + self.a_s_los + self.a_s_nlos

    def probability(self, branch):
        return {
            Branch.MBS_LOS: self.a_m_los,
            Branch.MBS_NLOS: self.a_m_nlos,
            Branch.SCB_LOS: self.a_s_los,
            Branch.SCB_NLOS: self.a_s_nlos,
        }[branch]

    def as_dict(self):
        return dataclasses.asdict(self)


def branch_probability(branch, model, config, epsrel=1e-8, epsabs=1e-12):
    """One association probability and its quadrature error estimate."""
    if _tier_density(branch.tier, config) == 0:
        return 0.0, 0.0
    end = _support_end(branch, model, config)
    if end == 0.0:
        return 0.0, 0.0
    args = branch_arguments(branch, model, config)
    kinks = [k for k in _kinks(branch, model, config, args) if k < end]
    scale = 1.0 / math.sqrt(math.pi * _tier_density(branch.tier, config))

    def f(r):
        return float(branch_weight(branch, r, model, config, args))

    return integrate(f, 0.0, end, points=kinks, scale=scale, epsrel=epsrel, epsabs=epsabs)


def association_probabilities(model, config, epsrel=1e-8, epsabs=1e-12):
    """The four branch probabilities, tier totals and mean loads.

    Raises
    ------
    ConvergenceError
        If the probabilities fail to sum to one within ``1e-4``.
    """
    values, errors = {}, 0.0
    for branch in Branch:
        values[branch], e = branch_probability(branch, model, config, epsrel, epsabs)
        errors += e
    total = sum(values.values())
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ConvergenceError(
            f"association probabilities sum to {total:.8f}, not 1", achieved=abs(total - 1.0)
        )
    a_m = values[Branch.MBS_LOS] + values[Branch.MBS_NLOS]
    a_s = values[Branch.SCB_LOS] + values[Branch.SCB_NLOS]
    n_m, n_s = _loads(a_m, a_s, config)
    return AssociationReport(
        a_m_los=values[Branch.MBS_LOS],
        a_m_nlos=values[Branch.MBS_NLOS],
        a_s_los=values[Branch.SCB_LOS],
        a_s_nlos=values[Branch.SCB_NLOS],
        a_m=a_m,
        a_s=a_s,
        n_m=n_m,
        n_s=n_s,
        error=errors,
    )


def _loads(a_m, a_s, config):
    n_m = a_m * config.N
    n_s = a_s * config.lambda_m * config.N / config.lambda_s if config.lambda_s > 0 else None
    return n_m, n_s


def mean_loads(report, config):
    """Mean users per MBS and per SCB; the SCB load is ``None`` without SCBs."""
    return _loads(report.a_m, report.a_s, config)


class ServingDistanceDensity:
    """Density of the serving distance conditioned on an association branch."""

    def __init__(self, branch, model, config, normalizer=None):
        self.branch = branch
        self.model = model
        self.config = config
        self._args = branch_arguments(branch, model, config)
        self._normalizer = normalizer
        self.support_end = _support_end(branch, model, config)
        self.kinks = [k for k in _kinks(branch, model, config, self._args) if k < self.support_end]
        self._cap = None

    @property
    def normalizer(self):
        if self._normalizer is None:
            self._normalizer = branch_probability(self.branch, self.model, self.config)[0]
        return self._normalizer

    def weight(self, r):
        return branch_weight(self.branch, r, self.model, self.config, self._args)

    def __call__(self, r):
        return self.weight(r) / self.normalizer

    def cdf(self, r):
        """CDF at the points ``r`` (any order), by per-interval Gauss-Legendre."""
        from .quadrature import gauss_legendre

        r = np.asarray(r, dtype=float)
        if self._cap is None:
            # beyond this radius the remaining mass is below exp(-60)
            self._cap = min(self.support_end, effective_cutoff(self.branch, self.model, self.config))
        flat = np.clip(r.ravel(), 0.0, self._cap)
        order = np.argsort(flat)
        grid = np.unique(np.concatenate([[0.0], flat, [k for k in self.kinks]]))
        x, w = gauss_legendre(20)
        lo, hi = grid[:-1], grid[1:]
        half = 0.5 * (hi - lo)
        nodes = 0.5 * (hi + lo)[:, None] + half[:, None] * x
        pieces = (self.weight(nodes) * w).sum(axis=1) * half
        cum = np.concatenate([[0.0], np.cumsum(pieces)]) / self.normalizer
        out = np.interp(flat, grid, cum)
        out[order] = np.maximum.accumulate(out[order])
        return np.minimum(out, 1.0).reshape(r.shape)


def serving_distance_pdf(branch, model, config):
    """Density of the serving distance for ``branch``.

    Raises
    ------
    DegenerateBranchError
        If the branch has zero probability (e.g. LoS under a pure NLoS profile).
    """
    dens = ServingDistanceDensity(branch, model, config)
    if dens.support_end == 0.0 or _tier_density(branch.tier, config) == 0 or dens.normalizer <= 0:
        raise DegenerateBranchError(f"degenerate branch {branch.value}: zero association probability")
    return dens


def conditional_moment(branch, g, model, config, lower=0.0, epsrel=1e-8, epsabs=0.0):
    """``E[g(R) | branch]`` and its error estimate.

    ``lower`` truncates the integral from below, which is needed when ``g``
    is not integrable at the origin against the density.

    Raises
    ------
    ConvergenceError
        If the integrand diverges at ``lower`` or quadrature fails.
    """
    dens = serving_distance_pdf(branch, model, config)

    def h(r):
        return float(g(r) * dens.weight(r))

    if lower == 0.0:
        # r h(r) must vanish at the origin for the integral to exist
        r1, r2 = 1e-12, 1e-9
        v1, v2 = r1 * abs(h(r1)), r2 * abs(h(r2))
        if not np.isfinite(v1) or (v2 > 0 and v1 >= v2 * 0.999):
            raise ConvergenceError(
                f"E[g(R)] for {branch.value} diverges at r = 0", achieved=np.inf
            )
    end = dens.support_end
    kinks = [k for k in dens.kinks if k > lower]
    scale = 1.0 / math.sqrt(math.pi * _tier_density(branch.tier, config))
    val, err = integrate(h, lower, end, points=kinks, scale=scale, epsrel=epsrel, epsabs=epsabs)
    return val / dens.normalizer, err / dens.normalizer
