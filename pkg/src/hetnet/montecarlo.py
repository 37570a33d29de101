"""Event-level Monte Carlo simulator of the two-tier downlink.

One realization samples PPP deployments in a disc window around the typical
user at the origin, partitions users into macro cells, schedules ``N`` users
per cell with reused pilots, associates every scheduled user by biased
received power, runs MMSE uplink training and evaluates the exact downlink
SINR of the typical user under MRT precoding.

Random streams: realization ``i`` draws from
``default_rng(SeedSequence(seed, spawn_key=(i,)))``, so results depend only on
``(seed, i)`` and never on how realizations are spread across workers.
"""

import dataclasses
import math

import numpy as np
from scipy import spatial

from .association import Branch
from .channel import NetworkConfig, PropagationModel, Tier
from .errors import ConfigError

__all__ = [
    "SimConfig",
    "Realization",
    "Estimates",
    "SinrSample",
    "RateEstimate",
    "AssociationEstimate",
    "sample_network",
    "schedule_and_associate",
    "uplink_training",
    "downlink_sinr",
    "precoder_power",
    "simulate_once",
    "estimate_rate",
    "estimate_association",
]

MIN_CI_SAMPLES = 30
_DENSE_LINKS = 50_000


@dataclasses.dataclass(frozen=True)
class SimConfig:
    model: PropagationModel
    config: NetworkConfig
    window_radius: float = 6.0
    n_realizations: int = 1000
    seed: int = 0
    max_user_resamples: int = 2

    def __post_init__(self):
        c_v = 1.0 / math.sqrt(math.pi * self.config.lambda_m)
        if not self.window_radius >= 5 * c_v:
            raise ConfigError(
                f"window_radius must be >= 5 C_v = {5 * c_v:.4g} km (got {self.window_radius})"
            )
        if int(self.n_realizations) != self.n_realizations or self.n_realizations < 1:
            raise ConfigError("n_realizations must be an integer >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")

    def rng(self, index):
        return np.random.default_rng(np.random.SeedSequence(int(self.seed), spawn_key=(int(index),)))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class Realization:
    """One sampled network.

    BS ids are ``0..n_mbs-1`` for MBSs and ``n_mbs + j`` for SCB ``j``.
    User 0 is the typical user.  Arrays indexed by ``k`` refer to scheduled
    users; ``mbs_los`` covers every MBS-user link while ``scb_los`` covers
    SCB links to scheduled users only (the only SCB links ever used).
    """

    mbs_points: np.ndarray
    scb_points: np.ndarray
    user_points: np.ndarray
    mbs_los: "LinkTags"
    scb_los: "LinkTags" = None
    schedules: np.ndarray = None
    scheduled: np.ndarray = None
    pilots: np.ndarray = None
    serving: np.ndarray = None
    gain_mbs: np.ndarray = None
    typical_serving: int = -1
    typical_branch: Branch = None
    serving_distance: float = math.nan
    user_resamples: int = 0
    short_cells: int = 0

    @property
    def n_mbs(self):
        return len(self.mbs_points)

    @property
    def los_tags(self):
        return {"mbs": self.mbs_los, "scb": self.scb_los}

    @property
    def associations(self):
        """Serving BS id of every scheduled user, keyed by user index."""
        return dict(zip(self.scheduled.tolist(), self.serving.tolist()))


@dataclasses.dataclass(frozen=True)
class TierEstimates:
    """Training output for one tier.

    ``active`` lists the BS ids (tier-local) with at least one user,
    ``g_typ[a]`` is the true channel from active BS ``a`` to the typical
    user and ``y[p]`` the despread pilot observation of pair ``p`` =
    ``(pair_bs[p], pair_pilot[p])`` normalised so that an estimate is
    ``eta * y``.
    """

    antennas: int
    active: np.ndarray
    g_typ: np.ndarray
    pair_bs: np.ndarray
    pair_pilot: np.ndarray
    pair_power: np.ndarray
    y: np.ndarray
    user_pair: np.ndarray


@dataclasses.dataclass(frozen=True)
class Estimates:
    mbs: TierEstimates
    scb: TierEstimates
    eta: np.ndarray
    gain: np.ndarray

    def tier(self, tier):
        return self.mbs if tier is Tier.MBS else self.scb

    def estimate(self, k):
        """MMSE estimate of scheduled user ``k``'s channel at its serving BS."""
        t = self._tier_of(k)
        return self.eta[k] * t.y[t.user_pair[k]]

    def _tier_of(self, k):
        return self.mbs if self.mbs.user_pair[k] >= 0 else self.scb


@dataclasses.dataclass(frozen=True)
class SinrSample:
    branch: Branch
    signal: float
    interference: float
    sinr: float
    rate: float
    serving_distance: float = math.nan


@dataclasses.dataclass(frozen=True)
class RateEstimate:
    mean_rate: float
    ci95: float
    ci_reliable: bool
    n: int
    branch_frequencies: dict
    branch_mean_rates: dict
    user_resamples: int
    short_cells: int
    samples: tuple = ()

    def summary(self):
        return {
            "mean_rate": self.mean_rate,
            "ci95": self.ci95,
            "ci_reliable": self.ci_reliable,
            "n": self.n,
            "branch_frequencies": {b.value: v for b, v in self.branch_frequencies.items()},
            "branch_mean_rates": {b.value: v for b, v in self.branch_mean_rates.items()},
            "user_resamples": self.user_resamples,
            "short_cells": self.short_cells,
        }


@dataclasses.dataclass(frozen=True)
class AssociationEstimate:
    n: int
    frequencies: dict
    distances: dict

    def frequency(self, branch):
        return self.frequencies[branch]


def _uniform_disc(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def _sq_distances(a, b):
    dx = np.subtract.outer(a[:, 0], b[:, 0])
    dy = np.subtract.outer(a[:, 1], b[:, 1])
    return dx * dx + dy * dy


class LinkTags:
    """LoS links from a BS set to a point set, stored as sorted integer keys.

    Link ``(b, u)`` has key ``b * n_points + u``; every link not listed is
    NLoS.
    """

    def __init__(self, keys, n_bs, n_points):
        self.keys = np.asarray(keys, dtype=np.int64)
        self.n_bs = n_bs
        self.n_points = n_points

    def __len__(self):
        return self.keys.size

    def pairs(self):
        return np.divmod(self.keys, self.n_points)

    def lookup(self, bs, point):
        key = np.asarray(bs, dtype=np.int64) * self.n_points + point
        pos = np.clip(np.searchsorted(self.keys, key), 0, max(self.keys.size - 1, 0))
        return (self.keys.size > 0) & (self.keys[pos] == key) if self.keys.size else np.zeros(key.shape, bool)

    def per_point(self):
        return np.bincount(self.pairs()[1], minlength=self.n_points)

    def dense(self, rows, cols):
        """Boolean tag matrix restricted to ``rows`` x ``cols``."""
        rows, cols = np.asarray(rows), np.asarray(cols)
        out = np.zeros((rows.size, cols.size), dtype=bool)
        if not self.keys.size:
            return out
        rpos = np.full(self.n_bs, -1)
        rpos[rows] = np.arange(rows.size)
        cpos = np.full(self.n_points, -1)
        cpos[cols] = np.arange(cols.size)
        bs, pt = self.pairs()
        keep = (rpos[bs] >= 0) & (cpos[pt] >= 0)
        out[rpos[bs[keep]], cpos[pt[keep]]] = True
        return out


def _draw_tags(rng, profile, bs_points, points):
    """Bernoulli LoS tags of every BS-point link.

    Links beyond the reach of a profile with zero tail never consume draws.
    Draws are made in key order so the stream use is reproducible.
    """
    n_bs, n_pts = len(bs_points), len(points)
    if n_bs == 0 or n_pts == 0:
        return LinkTags([], n_bs, n_pts)
    reach = float(profile.breakpoints[-1]) if profile.tail_value == 0 else math.inf
    if reach <= 0:
        return LinkTags([], n_bs, n_pts)
    if n_bs * n_pts <= _DENSE_LINKS or math.isinf(reach):
        d = np.sqrt(_sq_distances(bs_points, points)).ravel()
        keys = np.flatnonzero(d < reach)
        d = d[keys]
    else:
        near = spatial.cKDTree(bs_points).sparse_distance_matrix(
            spatial.cKDTree(points), reach, output_type="ndarray"
        )
        keys = near["i"].astype(np.int64) * n_pts + near["j"]
        order = np.argsort(keys)
        keys, d = keys[order], near["v"][order]
        inside = d < reach
        keys, d = keys[inside], d[inside]
    los = rng.random(keys.size) < profile(d)
    return LinkTags(keys[los], n_bs, n_pts)


def _gain(model, d2, los):
    """Path gain from squared distance and LoS tag."""
    out = model.L_nlos * np.power(d2, -0.5 * model.alpha_nlos)
    if np.any(los):
        out[los] = model.L_los * np.power(d2[los], -0.5 * model.alpha_los)
    return out


def _strongest(model, bs_points, points, tags, tree=None):
    """Index and gain of the strongest BS for every point.

    NLoS gain falls with distance, so the best NLoS link is the nearest BS
    not tagged LoS; it lies among the ``1 + (LoS links of the point)``
    nearest BSs.  LoS links are scored one by one.
    """
    n_bs, n_pts = len(bs_points), len(points)
    tree = tree or spatial.cKDTree(bs_points)
    k = int(min(n_bs, (tags.per_point().max() if len(tags) else 0) + 1))
    dist, idx = tree.query(points, k=k)
    dist, idx = dist.reshape(n_pts, k), idx.reshape(n_pts, k)
    rows = np.arange(n_pts)
    free = ~tags.lookup(idx, rows[:, None])
    first = np.argmax(free, axis=1)
    has = free[rows, first]
    best = idx[rows, first]
    with np.errstate(divide="ignore"):
        gain = np.where(has, model.L_nlos * dist[rows, first] ** -model.alpha_nlos, 0.0)
    if len(tags):
        bs, pt = tags.pairs()
        diff = bs_points[bs] - points[pt]
        g = model.L_los * np.power(np.einsum("ij,ij->i", diff, diff), -0.5 * model.alpha_los)
        top = np.zeros(n_pts)
        np.maximum.at(top, pt, g)
        hit = g == top[pt]
        owner = np.full(n_pts, -1)
        owner[pt[hit]] = bs[hit]
        win = top > gain
        best = np.where(win, owner, best)
        gain = np.where(win, top, gain)
    return best, gain


def _draw_users(sim, rng, mbs, with_users=True):
    cfg = sim.config
    n_u = rng.poisson(cfg.lambda_u * math.pi * sim.window_radius ** 2) if with_users else 0
    users = np.vstack(([[0.0, 0.0]], _uniform_disc(rng, n_u, sim.window_radius)))
    return users, _draw_tags(rng, sim.model.los_profile_mbs, mbs, users)


def sample_network(sim, rng, with_users=True):
    """Draw BS and user point sets plus MBS-user LoS tags.

    With ``with_users=False`` only the typical user is placed, which is all
    the association statistics of the typical user need.
    """
    cfg = sim.config
    area = math.pi * sim.window_radius ** 2
    # the typical user always needs a macro cell
    n_m = 0
    while n_m == 0:
        n_m = rng.poisson(cfg.lambda_m * area)
    mbs = _uniform_disc(rng, n_m, sim.window_radius)
    n_s = rng.poisson(cfg.lambda_s * area) if cfg.lambda_s > 0 else 0
    scb = _uniform_disc(rng, n_s, sim.window_radius)
    users, tags = _draw_users(sim, rng, mbs, with_users)
    return Realization(mbs_points=mbs, scb_points=scb, user_points=users, mbs_los=tags)


def _short_cells(cell, n_mbs, mbs, N, interior):
    counts = np.bincount(cell, minlength=n_mbs)
    inside = np.hypot(mbs[:, 0], mbs[:, 1]) <= interior
    return int(np.count_nonzero((counts < N) & inside)), int(np.count_nonzero(counts < N))


def schedule_and_associate(real, sim, rng):
    """Macro-cell partition, per-cell scheduling and biased association.

    Users belong to the MBS with the strongest unbiased received power.
    When an interior cell (MBS within ``window_radius - 2 C_v`` of the
    origin) holds fewer than ``N`` users, users are redrawn up to
    ``sim.max_user_resamples`` times; remaining short cells schedule every
    user they have and are counted in ``short_cells``.  Pilot ``n`` goes to
    the ``n``-th scheduled user of every cell, in random order.
    """
    model, cfg = sim.model, sim.config
    mbs, N = real.mbs_points, cfg.N
    interior = sim.window_radius - 2.0 / math.sqrt(math.pi * cfg.lambda_m)
    tree = spatial.cKDTree(mbs)
    users, mbs_los = real.user_points, real.mbs_los
    resamples = 0
    while True:
        cell, home_gain = _strongest(model, mbs, users, mbs_los, tree)
        short_inside, short_all = _short_cells(cell, len(mbs), mbs, N, interior)
        if short_inside == 0 or resamples >= sim.max_user_resamples or len(users) == 1:
            break
        resamples += 1
        users, mbs_los = _draw_users(sim, rng, mbs)

    schedules = np.full((len(mbs), N), -1, dtype=np.int64)
    order = np.argsort(cell, kind="stable")
    bounds = np.searchsorted(cell[order], np.arange(len(mbs) + 1))
    for i in range(len(mbs)):
        members = order[bounds[i]:bounds[i + 1]]
        if i == cell[0]:
            others = members[members != 0]
            chosen = np.concatenate(([0], rng.permutation(others)[: N - 1]))
            chosen = rng.permutation(chosen)
        else:
            chosen = rng.permutation(members)[:N]
        schedules[i, : len(chosen)] = chosen

    slot = schedules >= 0
    scheduled = schedules[slot]
    pilots = np.nonzero(slot)[1]
    k0 = int(np.flatnonzero(scheduled == 0)[0])

    sched_pts = users[scheduled]
    gain_mbs = _gain(model, _sq_distances(mbs, sched_pts), mbs_los.dense(np.arange(len(mbs)), scheduled))
    scb_los = _draw_tags(rng, model.los_profile_scb, real.scb_points, sched_pts)

    home = cell[scheduled]
    serving = home.copy()
    if len(real.scb_points):
        j, g_scb = _strongest(model, real.scb_points, sched_pts, scb_los)
        to_scb = cfg.B * cfg.P_s * g_scb > cfg.P_m * home_gain[scheduled]
        serving[to_scb] = len(mbs) + j[to_scb]

    b0 = int(serving[k0])
    if b0 < len(mbs):
        branch = Branch.of(Tier.MBS, bool(mbs_los.lookup(b0, 0)))
        dist = float(np.hypot(*mbs[b0]))
    else:
        branch = Branch.of(Tier.SCB, bool(scb_los.lookup(b0 - len(mbs), k0)))
        dist = float(np.hypot(*real.scb_points[b0 - len(mbs)]))

    return dataclasses.replace(
        real,
        user_points=users,
        mbs_los=mbs_los,
        scb_los=scb_los,
        schedules=schedules,
        scheduled=scheduled,
        pilots=pilots,
        serving=serving,
        gain_mbs=gain_mbs,
        typical_serving=b0,
        typical_branch=branch,
        serving_distance=dist,
        user_resamples=resamples,
        short_cells=short_all,
    )


def _complex_normal(rng, shape, variance):
    scale = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _antennas(value, name):
    if int(value) != value:
        raise ConfigError(f"{name} must be an integer for simulation (got {value})")
    return int(value)


def _train_tier(rng, real, model, tier, users, local_bs, k0, antennas, config):
    """Pilot observations and typical-user channels at one tier's active BSs.

    Returns the tier estimates together with each tier user's serving gain
    and pilot-observation power.
    """
    n_sched = len(real.scheduled)
    pilots = real.pilots
    user_pair = np.full(n_sched, -1, dtype=np.int64)
    if users.size == 0:
        empty = np.empty((0, antennas), dtype=complex)
        none = np.empty(0, np.int64)
        est = TierEstimates(antennas, none, empty, none, none, np.empty(0), empty, user_pair)
        return est, np.empty(0), np.empty(0)
    active, bs_pos = np.unique(local_bs, return_inverse=True)
    if tier is Tier.MBS:
        gains = real.gain_mbs[active]
    else:
        pts = real.user_points[real.scheduled]
        d2 = _sq_distances(real.scb_points[active], pts)
        gains = _gain(model, d2, real.scb_los.dense(active, np.arange(n_sched)))
    onehot = np.zeros((n_sched, config.N))
    onehot[np.arange(n_sched), pilots] = 1.0
    pilot_power = gains @ onehot + config.pilot_noise

    width = config.N
    uniq, pair_of_user = np.unique(bs_pos * width + pilots[users], return_inverse=True)
    pair_bs, pair_pilot = uniq // width, uniq % width
    user_pair[users] = pair_of_user

    phi_typ = gains[:, k0]
    g_typ = _complex_normal(rng, (len(active), antennas), phi_typ[:, None])
    power = pilot_power[pair_bs, pair_pilot]
    # the other copilot channels and the noise merge into one Gaussian term
    copilot = pair_pilot == pilots[k0]
    residual = power - np.where(copilot, phi_typ[pair_bs], 0.0)
    y = _complex_normal(rng, (len(uniq), antennas), np.maximum(residual, 0.0)[:, None])
    y[copilot] += g_typ[pair_bs[copilot]]
    est = TierEstimates(antennas, active, g_typ, pair_bs, pair_pilot, power, y, user_pair)
    return est, gains[bs_pos, users], power[pair_of_user]


def uplink_training(real, model, config, rng):
    """MMSE channel estimation with pilot reuse across macro cells.

    For BS ``b`` and pilot ``n`` the despread observation is the sum of the
    channels of every scheduled user holding pilot ``n`` plus noise of
    variance ``sigma2 / (tau p_p)`` per antenna.  Only the typical user's
    channel is needed explicitly; the other copilot channels and the noise
    are independent zero-mean Gaussians and are drawn as a single term with
    their summed variance, which leaves the joint law of all quantities
    entering the SINR unchanged.
    """
    m_m = _antennas(config.M_m, "M_m")
    m_s = _antennas(config.M_s, "M_s")
    n_sched = len(real.scheduled)
    k0 = int(np.flatnonzero(real.scheduled == 0)[0])
    n_m = real.n_mbs
    ks = np.arange(n_sched)
    is_m = real.serving < n_m

    eta = np.empty(n_sched)
    gain = np.empty(n_sched)
    mbs, g, s = _train_tier(rng, real, model, Tier.MBS, ks[is_m], real.serving[is_m], k0, m_m, config)
    gain[is_m], eta[is_m] = g, g / s
    scb, g, s = _train_tier(rng, real, model, Tier.SCB, ks[~is_m], real.serving[~is_m] - n_m, k0, m_s, config)
    gain[~is_m], eta[~is_m] = g, g / s
    return Estimates(mbs=mbs, scb=scb, eta=eta, gain=gain)


def _tier_interference(t, power, skip):
    """Received power at the typical user from every active BS of a tier.

    Each user ``u`` of BS ``b`` contributes
    ``|g_typ^H y_pair|^2 / (M S_pair)``; ``skip`` is the tier-local id of
    the serving BS (excluded), or ``-1``.
    """
    if t.active.size == 0:
        return 0.0
    proj = np.einsum("pm,pm->p", t.g_typ[t.pair_bs].conj(), t.y)
    per_pair = np.abs(proj) ** 2 / (t.antennas * t.pair_power)
    users = t.user_pair[t.user_pair >= 0]
    per_user = per_pair[users]
    owner = t.pair_bs[users]
    load = np.bincount(owner, minlength=t.active.size)
    totals = np.bincount(owner, weights=per_user, minlength=t.active.size) / load
    if skip >= 0:
        totals[np.flatnonzero(t.active == skip)] = 0.0
    return power * float(totals.sum())


def downlink_sinr(real, est, model, config, rng=None):
    """Exact SINR of the typical user under MRT with estimated channels.

    The serving cell contributes the intra-cell term (estimate of the
    typical user against the other users' precoders) and the estimation
    error term; every other active BS interferes through the true channel.
    ``rng`` is accepted for interface symmetry; all randomness is drawn in
    training.
    """
    n_m = real.n_mbs
    b0 = real.typical_serving
    k0 = int(np.flatnonzero(real.scheduled == 0)[0])
    if b0 < n_m:
        tier, local, power = Tier.MBS, b0, config.P_m
    else:
        tier, local, power = Tier.SCB, b0 - n_m, config.P_s
    t = est.tier(tier)
    a0 = int(np.flatnonzero(t.active == local)[0])
    cell = np.flatnonzero(real.serving == b0)
    assert cell.size > 0 and k0 in cell, "serving cell must contain the typical user"

    est_cell = est.eta[cell, None] * t.y[t.user_pair[cell]]
    norm = t.antennas * est.gain[cell] * est.eta[cell]
    kappa2 = 1.0 / cell.size
    i0 = int(np.flatnonzero(cell == k0)[0])
    g_hat = est_cell[i0]
    g_err = g_hat - t.g_typ[a0]

    cross = np.abs(est_cell.conj() @ g_hat) ** 2 / norm
    signal = power * kappa2 * cross[i0]
    intra = power * kappa2 * (cross.sum() - cross[i0])
    error = power * kappa2 * float(np.sum(np.abs(est_cell.conj() @ g_err) ** 2 / norm))

    other = _tier_interference(est.mbs, config.P_m, local if tier is Tier.MBS else -1)
    other += _tier_interference(est.scb, config.P_s, local if tier is Tier.SCB else -1)
    interference = intra + error + other
    sinr = signal / (interference + config.sigma2)
    return SinrSample(
        branch=real.typical_branch,
        signal=float(signal),
        interference=float(interference),
        sinr=float(sinr),
        rate=float(np.log2(1.0 + sinr)),
        serving_distance=real.serving_distance,
    )


def precoder_power(real, est):
    """Per active BS ``kappa^2 sum_u ||g_hat_u||^2 / E||g_hat_u||^2`` (mean 1)."""
    out = []
    for t in (est.mbs, est.scb):
        if t.active.size == 0:
            continue
        users = np.flatnonzero(t.user_pair >= 0)
        pairs = t.user_pair[users]
        # ||eta y||^2 / (M phi eta) = ||y||^2 / (M S)
        ratio = np.sum(np.abs(t.y[pairs]) ** 2, axis=1) / (t.antennas * t.pair_power[pairs])
        owner = t.pair_bs[pairs]
        load = np.bincount(owner, minlength=t.active.size)
        out.append(np.bincount(owner, weights=ratio, minlength=t.active.size) / load)
    return np.concatenate(out) if out else np.empty(0)


def simulate_once(sim, index):
    rng = sim.rng(index)
    real = sample_network(sim, rng)
    real = schedule_and_associate(real, sim, rng)
    est = uplink_training(real, sim.model, sim.config, rng)
    return downlink_sinr(real, est, sim.model, sim.config), real.user_resamples, real.short_cells


def _run_chunk(fn, sim, indices):
    return [fn(sim, i) for i in indices]


def _map(fn, sim, n, threads):
    if threads is None or threads <= 1:
        return [fn(sim, i) for i in range(n)]
    import joblib

    chunks = np.array_split(np.arange(n), max(1, min(n, threads * 4)))
    parts = joblib.Parallel(n_jobs=threads)(
        joblib.delayed(_run_chunk)(fn, sim, c.tolist()) for c in chunks if c.size
    )
    return [x for part in parts for x in part]


def estimate_rate(sim, threads=1):
    """Mean rate of the typical user over ``sim.n_realizations`` networks.

    The 95% interval is the normal-approximation half-width; it is flagged
    unreliable below 30 realizations.
    """
    results = _map(simulate_once, sim, sim.n_realizations, threads)
    samples = tuple(r[0] for r in results)
    rates = np.array([s.rate for s in samples])
    n = rates.size
    std = rates.std(ddof=1) if n > 1 else math.nan
    freqs, means = {}, {}
    for b in Branch:
        mask = np.array([s.branch is b for s in samples])
        freqs[b] = float(mask.mean())
        means[b] = float(rates[mask].mean()) if mask.any() else math.nan
    return RateEstimate(
        mean_rate=float(rates.mean()),
        ci95=float(1.959963984540054 * std / math.sqrt(n)) if n > 1 else math.nan,
        ci_reliable=n >= MIN_CI_SAMPLES,
        n=n,
        branch_frequencies=freqs,
        branch_mean_rates=means,
        user_resamples=int(sum(r[1] for r in results)),
        short_cells=int(sum(r[2] for r in results)),
        samples=samples,
    )


def associate_typical(sim, index):
    """Branch and serving distance of the typical user in one realization."""
    rng = sim.rng(index)
    real = sample_network(sim, rng, with_users=False)
    cfg, model = sim.config, sim.model
    d2_m = np.einsum("ij,ij->i", real.mbs_points, real.mbs_points)
    los_m = real.mbs_los.dense(np.arange(real.n_mbs), [0])[:, 0]
    p_m = cfg.P_m * _gain(model, d2_m, los_m)
    i = int(np.argmax(p_m))
    best = (p_m[i], Branch.of(Tier.MBS, bool(los_m[i])), math.sqrt(d2_m[i]))
    if len(real.scb_points):
        tags = _draw_tags(rng, model.los_profile_scb, real.scb_points, real.user_points[:1])
        los_s = tags.dense(np.arange(len(real.scb_points)), [0])[:, 0]
        d2_s = np.einsum("ij,ij->i", real.scb_points, real.scb_points)
        p_s = cfg.B * cfg.P_s * _gain(model, d2_s, los_s)
        j = int(np.argmax(p_s))
        if p_s[j] > best[0]:
            best = (p_s[j], Branch.of(Tier.SCB, bool(los_s[j])), math.sqrt(d2_s[j]))
    return best[1], float(best[2])


def estimate_association(sim, threads=1):
    """Empirical branch frequencies and per-branch serving distances."""
    results = _map(associate_typical, sim, sim.n_realizations, threads)
    n = len(results)
    freqs, dists = {}, {}
    for b in Branch:
        d = np.array([r[1] for r in results if r[0] is b])
        freqs[b] = d.size / n
        dists[b] = d
    return AssociationEstimate(n=n, frequencies=freqs, distances=dists)
