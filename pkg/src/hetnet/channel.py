"""Propagation environment of the two-tier network.

Distances are in km, powers in mW (linear), path-loss intercepts are
dimensionless gains at 1 km.  LoS probability profiles are represented as
piecewise-linear functions of distance with a constant tail, which covers the
3GPP linear profile, the two degenerate profiles and tabulated profiles with a
single code path.
"""

import dataclasses
import enum
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

__all__ = [
    "Tier",
    "LoSProfile",
    "PropagationModel",
    "NetworkConfig",
    "DerivedConstants",
    "dbm_to_mw",
    "mw_to_dbm",
    "los_probability",
    "path_loss",
    "derived_constants",
    "biased_received_power",
    "paper_model",
    "paper_config",
]


class Tier(enum.Enum):
    MBS = "mbs"
    SCB = "scb"


def dbm_to_mw(dbm):
    return np.power(10.0, np.divide(dbm, 10.0))


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


@dataclasses.dataclass(frozen=True)
class LoSProfile:
    """Probability that a link of length ``r`` is LoS.

    Use the constructors :meth:`linear_3gpp`, :meth:`pure_nlos`,
    :meth:`pure_los` and :meth:`custom` rather than building the knot table by
    hand.  Between knots the probability is interpolated linearly; beyond the
    last knot it stays at the last value.
    """

    kind: str
    knots_r: tuple
    knots_p: tuple
    d_los: float = None

    def __post_init__(self):
        r = np.asarray(self.knots_r, dtype=float)
        p = np.asarray(self.knots_p, dtype=float)
        if r.ndim != 1 or r.size == 0 or r.size != p.size:
            raise ConfigError("LoS profile needs matching, non-empty knot tables")
        if r[0] != 0.0:
            raise ConfigError("LoS profile knots must start at r = 0")
        if np.any(np.diff(r) <= 0):
            raise ConfigError("LoS profile knot distances must be strictly increasing")
        if np.any((p < 0) | (p > 1)):
            raise ConfigError("LoS profile values must lie in [0, 1]")
        r.setflags(write=False)
        p.setflags(write=False)
        # cumulative int_0^{r_i} p(u) u du at every knot
        cum = np.zeros_like(r)
        for i in range(r.size - 1):
            cum[i + 1] = cum[i] + _segment_moment(r[i], p[i], _slope(r, p, i), r[i + 1])
        cum.setflags(write=False)
        object.__setattr__(self, "_r", r)
        object.__setattr__(self, "_p", p)
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def linear_3gpp(cls, d_los):
        """``1 - r/d_los`` for ``r <= d_los``, zero beyond."""
        if not d_los > 0:
            raise ConfigError("d_los_km must be > 0")
        return cls("linear3gpp", (0.0, float(d_los)), (1.0, 0.0), float(d_los))

    @classmethod
    def pure_nlos(cls):
        return cls("nlos", (0.0,), (0.0,))

    @classmethod
    def pure_los(cls):
        return cls("los", (0.0,), (1.0,))

    @classmethod
    def custom(cls, points):
        """Tabulated profile from ``(r, p)`` pairs.

        A knot at ``r = 0`` holding the first value is inserted when missing.
        """
        pts = sorted((float(r), float(p)) for r, p in points)
        if not pts:
            raise ConfigError("custom LoS profile needs at least one knot")
        if pts[0][0] < 0:
            raise ConfigError("custom LoS profile distances must be >= 0")
        if pts[0][0] > 0:
            pts.insert(0, (0.0, pts[0][1]))
        return cls("custom", tuple(r for r, _ in pts), tuple(p for _, p in pts))

    @property
    def breakpoints(self):
        """Distances where the profile has a kink."""
        return self._r

    @property
    def tail_value(self):
        """LoS probability beyond the last knot."""
        return float(self._p[-1])

    def __call__(self, r):
        return np.interp(r, self._r, self._p)

    def segments(self):
        """Yield ``(a, b, p_a, slope)`` for every finite linear piece."""
        r, p = self._r, self._p
        for i in range(r.size - 1):
            yield r[i], r[i + 1], p[i], _slope(r, p, i)

    def los_moment(self, x):
        """Closed form of ``int_0^x p(u) u du`` (vectorised over ``x``)."""
        x = np.asarray(x, dtype=float)
        r, p, cum = self._r, self._p, self._cum
        i = np.clip(np.searchsorted(r, x, side="right") - 1, 0, r.size - 1)
        slope = np.zeros_like(x)
        inner = i < r.size - 1
        if np.any(inner):
            ii = i[inner]
            slope[inner] = (p[ii + 1] - p[ii]) / (r[ii + 1] - r[ii])
        return cum[i] + _segment_moment(r[i], p[i], slope, x)

    def nlos_moment(self, x):
        """``int_0^x (1 - p(u)) u du``."""
        x = np.asarray(x, dtype=float)
        return 0.5 * x * x - self.los_moment(x)


def _slope(r, p, i):
    return (p[i + 1] - p[i]) / (r[i + 1] - r[i])


def _segment_moment(a, pa, slope, x):
    # int_a^x (pa + slope (u - a)) u du
    c0 = pa - slope * a
    return c0 * (x * x - a * a) / 2.0 + slope * (x ** 3 - a ** 3) / 3.0


@dataclasses.dataclass(frozen=True)
class PropagationModel:
    """Two-slope path loss plus per-tier LoS profiles."""

    L_los: float
    L_nlos: float
    alpha_los: float
    alpha_nlos: float
    los_profile_mbs: LoSProfile
    los_profile_scb: LoSProfile

    def __post_init__(self):
        for name in ("L_los", "L_nlos", "alpha_los", "alpha_nlos"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        object.__setattr__(self, "ratio_l_nl", self.alpha_los / self.alpha_nlos)
        object.__setattr__(self, "ratio_nl_l", self.alpha_nlos / self.alpha_los)

    def profile(self, tier):
        return self.los_profile_mbs if tier is Tier.MBS else self.los_profile_scb

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class NetworkConfig:
    """Deployment and radio parameters (linear units)."""

    lambda_m: float
    lambda_s: float
    lambda_u: float
    M_m: float
    M_s: float
    N: int
    P_m: float
    P_s: float
    B: float
    tau: int
    p_p: float
    sigma2: float

    def __post_init__(self):
        positive = ("lambda_m", "lambda_u", "P_m", "P_s", "B", "p_p", "sigma2")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0 (got {getattr(self, name)!r})")
        if not self.lambda_s >= 0:
            raise ConfigError(f"lambda_s must be >= 0 (got {self.lambda_s!r})")
        for name in ("M_m", "M_s"):
            if not getattr(self, name) >= 1:
                raise ConfigError(f"{name} must be >= 1 (got {getattr(self, name)!r})")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be an integer >= 1 (got {self.N!r})")
        if int(self.tau) != self.tau:
            raise ConfigError(f"tau must be an integer (got {self.tau!r})")
        if self.tau < self.N:
            raise ConfigError(f"tau must satisfy τ ≥ N (tau={self.tau}, N={self.N})")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "tau", int(self.tau))

    @property
    def pilot_noise(self):
        """Per-antenna noise left on a despread pilot, ``sigma2 / (tau p_p)``."""
        return self.sigma2 / (self.tau * self.p_p)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


class DerivedConstants(NamedTuple):
    k1: float
    k2: float
    k3: float
    k4: float


def los_probability(profile, r):
    return profile(r)


def path_loss(model, r, los):
    """Linear path gain ``L r^-alpha`` of the LoS or NLoS slope."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("path loss is singular at r = 0")
    gain = np.where(los, model.L_los * r ** -model.alpha_los, model.L_nlos * r ** -model.alpha_nlos)
    return gain if gain.ndim else float(gain)


def derived_constants(model, config):
    bias_ratio = config.B * config.P_s / config.P_m
    return DerivedConstants(
        k1=(model.L_nlos / model.L_los) ** (1.0 / model.alpha_nlos),
        k2=bias_ratio ** (1.0 / model.alpha_los),
        k3=bias_ratio ** (1.0 / model.alpha_nlos),
        k4=(model.L_los / model.L_nlos) ** (1.0 / model.alpha_los),
    )


def biased_received_power(model, config, tier, r, los):
    """Average biased received power (mW) used for cell association."""
    power = config.P_m if tier is Tier.MBS else config.B * config.P_s
    return power * path_loss(model, r, los)


def paper_model(d_los=0.3):
    """3GPP two-slope model with the linear LoS profile on both tiers."""
    profile = LoSProfile.linear_3gpp(d_los)
    return PropagationModel(
        L_los=10 ** -10.38,
        L_nlos=10 ** -14.54,
        alpha_los=2.09,
        alpha_nlos=3.75,
        los_profile_mbs=profile,
        los_profile_scb=profile,
    )


def paper_config(**overrides):
    """Evaluation parameters; ``overrides`` replace individual fields.

    ``lambda_s``, ``lambda_u``, ``M_m``, ``M_s``, ``N`` and ``tau`` are study
    variables rather than fixed values, so the defaults here are only a
    convenient baseline.
    """
    values = dict(
        lambda_m=1.0,
        lambda_s=10.0,
        lambda_u=100.0,
        M_m=100,
        M_s=5,
        N=10,
        P_m=dbm_to_mw(53.0),
        P_s=dbm_to_mw(33.0),
        B=1.0,
        tau=10,
        p_p=dbm_to_mw(24.0),
        sigma2=dbm_to_mw(-104.0),
    )
    values.update(overrides)
    if "N" in overrides and "tau" not in overrides:
        values["tau"] = max(values["tau"], values["N"])
    return NetworkConfig(**values)
