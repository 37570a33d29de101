"""Parameter sweeps, scalar optimizers and figure reproduction."""

import dataclasses
import math
import os

import numpy as np

from .association import association_probabilities
from .errors import ConfigError, ConvergenceError, DegenerateBranchError
from .io import emit
from .montecarlo import SimConfig, estimate_rate
from .rate import RateSettings, achievable_rate

__all__ = [
    "VARIABLES",
    "SweepSpec",
    "SweepPoint",
    "AntennaSplit",
    "Optimum",
    "apply_variable",
    "sweep",
    "optimize_scalar",
    "optimize_parameter",
    "optimize_split",
    "FIGURES",
    "reproduce",
]

VARIABLES = ("lambda_s", "M_m", "M_s", "B", "varpi", "N")
ENGINES = ("analytic", "montecarlo", "association")
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclasses.dataclass(frozen=True)
class AntennaSplit:
    """Share ``varpi`` of a macro cell's ``M_total`` antennas moved to its SCBs.

    With ``lambda_s / lambda_m`` SCBs per macro cell each SCB gets
    ``varpi * M_total * lambda_m / lambda_s`` antennas.
    """

    M_total: float
    varpi: float
    lambda_s: float
    lambda_m: float = 1.0

    @property
    def M_m(self):
        return (1.0 - self.varpi) * self.M_total

    @property
    def M_s(self):
        return self.varpi * self.M_total * self.lambda_m / self.lambda_s

    def feasible(self, N):
        return 0.0 <= self.varpi < 1.0 and self.M_m >= N and self.lambda_s > 0 and self.M_s >= 1.0

    def rounded(self):
        """Nearest integer antenna counts."""
        return max(int(round(self.M_m)), 1), max(int(round(self.M_s)), 1)


def apply_variable(config, variable, value, m_total=None):
    """Copy of ``config`` with one study variable set."""
    if variable == "varpi":
        if m_total is None:
            raise ConfigError("the varpi variable needs M_total")
        split = AntennaSplit(m_total, value, config.lambda_s, config.lambda_m)
        if not split.feasible(config.N):
            raise ConfigError(
                f"antenna split varpi={value} infeasible: M_m={split.M_m:.4g}, M_s={split.M_s:.4g}"
            )
        return config.replace(M_m=split.M_m, M_s=split.M_s)
    if variable == "N":
        n = int(value)
        if n != value:
            raise ConfigError(f"N must be an integer (got {value})")
        return config.replace(N=n, tau=max(config.tau, n))
    if variable not in VARIABLES:
        raise ConfigError(f"unknown sweep variable {variable!r}")
    return config.replace(**{variable: value})


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    variable: str
    grid: tuple
    model: object
    config: object
    engine: str = "analytic"
    m_total: float = None
    n_realizations: int = 1000
    seed: int = 0
    window_radius: float = 6.0
    threads: int = 1
    settings: RateSettings = None

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}; choose from {VARIABLES}")
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}; choose from {ENGINES}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ConfigError("sweep grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        if self.engine == "montecarlo" and self.variable in ("M_m", "M_s"):
            if any(v != int(v) for v in grid):
                raise ConfigError("montecarlo sweeps need integer antenna counts")
        object.__setattr__(self, "grid", grid)


@dataclasses.dataclass(frozen=True)
class SweepPoint:
    value: float
    config: object = None
    result: object = None
    error: str = None

    @property
    def ok(self):
        return self.error is None


def _evaluate(spec, config, index):
    if spec.engine == "association":
        return association_probabilities(spec.model, config)
    if spec.engine == "analytic":
        return achievable_rate(spec.model, config, spec.settings)
    if spec.variable == "varpi":
        m_m, m_s = AntennaSplit(spec.m_total, spec.grid[index], config.lambda_s, config.lambda_m).rounded()
        config = config.replace(M_m=m_m, M_s=m_s)
    sim = SimConfig(
        spec.model,
        config,
        window_radius=spec.window_radius,
        n_realizations=spec.n_realizations,
        # distinct but reproducible streams per grid point
        seed=(int(spec.seed) + 1_000_003 * index) % 2 ** 64,
    )
    return estimate_rate(sim, threads=spec.threads)


def _sweep_point(spec, index):
    value = spec.grid[index]
    try:
        config = apply_variable(spec.config, spec.variable, value, spec.m_total)
        return SweepPoint(value, config, _evaluate(spec, config, index))
    except (ConfigError, ConvergenceError, DegenerateBranchError) as exc:
        return SweepPoint(value, None, None, f"{type(exc).__name__}: {exc}")


def sweep(spec):
    """Evaluate the engine at every grid point; failures are recorded, not raised.

    Analytic grid points run in parallel when ``spec.threads > 1``; Monte
    Carlo points run one after another and parallelize over realizations.
    """
    indices = range(len(spec.grid))
    if spec.threads > 1 and spec.engine != "montecarlo" and len(spec.grid) > 1:
        import joblib

        return joblib.Parallel(n_jobs=spec.threads)(joblib.delayed(_sweep_point)(spec, i) for i in indices)
    return [_sweep_point(spec, i) for i in indices]


@dataclasses.dataclass(frozen=True)
class Optimum:
    argmax: float
    value: float
    flag: str = None
    evaluations: int = 0
    grid: tuple = ()
    grid_values: tuple = ()


def _unimodal(values):
    """True when the sequence rises (weakly) to a single peak and then falls."""
    i = int(np.argmax(values))
    rising = all(b >= a for a, b in zip(values[: i + 1], values[1 : i + 1]))
    falling = all(b <= a for a, b in zip(values[i:], values[i + 1 :]))
    return rising and falling


def optimize_scalar(objective, bracket, tolerance=1e-3, pre_grid=16):
    """Maximise ``objective`` on ``bracket`` by pre-grid plus golden section.

    The pre-grid guards the unimodality assumption: a constant grid returns
    the bracket midpoint flagged ``"plateau"``; a grid with several peaks
    returns the grid argmax flagged ``"multimodal"``.  A peak on the bracket
    edge is refined in the edge cell and flagged ``"boundary"``.
    Only comparisons of objective values are used, so the argmax is
    invariant to any increasing transformation of the objective.
    """
    lo, hi = map(float, bracket)
    if not hi > lo:
        raise ValueError("bracket must satisfy lo < hi")
    grid = np.linspace(lo, hi, pre_grid)
    values = [float(objective(x)) for x in grid]
    evaluations = len(grid)
    top = max(values)
    if max(values) - min(values) <= 1e-12 * max(abs(top), 1e-300):
        mid = 0.5 * (lo + hi)
        return Optimum(mid, float(objective(mid)), "plateau", evaluations + 1, tuple(grid), tuple(values))
    if not _unimodal(values):
        i = int(np.argmax(values))
        return Optimum(float(grid[i]), values[i], "multimodal", evaluations, tuple(grid), tuple(values))

    i = int(np.argmax(values))
    flag = "boundary" if i in (0, len(grid) - 1) else None
    a, b = float(grid[max(i - 1, 0)]), float(grid[min(i + 1, len(grid) - 1)])
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = float(objective(c)), float(objective(d))
    evaluations += 2
    while b - a > tolerance:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = float(objective(c))
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = float(objective(d))
        evaluations += 1
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    # never return something worse than the grid point we started from
    if values[i] > best_f:
        best_x, best_f = float(grid[i]), values[i]
    return Optimum(best_x, best_f, flag, evaluations, tuple(grid), tuple(values))


def _rate_objective(model, config, variable, settings, m_total=None, log_scale=False):
    def objective(x):
        value = 10.0 ** x if log_scale else x
        return achievable_rate(model, apply_variable(config, variable, value, m_total), settings).r_total

    return objective


def optimize_parameter(variable, model, config, bracket, tolerance=1e-3, log_scale=False,
                       settings=None, m_total=None):
    """Rate-maximising value of one study variable via :func:`optimize_scalar`.

    With ``log_scale`` the search runs over ``log10`` of the variable
    (useful for the bias) and ``tolerance`` is in decades.
    """
    if variable == "N":
        raise ConfigError("N is an integer variable; use a sweep instead")
    objective = _rate_objective(model, config, variable, settings, m_total, log_scale)
    if log_scale:
        lo, hi = bracket
        result = optimize_scalar(objective, (math.log10(lo), math.log10(hi)), tolerance)
        return dataclasses.replace(
            result,
            argmax=10.0 ** result.argmax,
            grid=tuple(10.0 ** g for g in result.grid),
        )
    return optimize_scalar(objective, bracket, tolerance)


@dataclasses.dataclass(frozen=True)
class SplitResult:
    varpi_star: float
    rate_star: float
    grid_varpi_star: float
    varpi: tuple
    rates: tuple
    feasible: tuple
    M_total: float

    def split(self, config):
        return AntennaSplit(self.M_total, self.varpi_star, config.lambda_s, config.lambda_m)


def optimize_split(M_total, model, config, grid, tolerance=1e-3, settings=None):
    """Best antenna split on ``grid``, refined by golden section around the grid peak.

    Infeasible grid points (``M_m < N`` or ``M_s < 1``) are skipped.
    """
    grid = [float(v) for v in grid]
    feasible = [AntennaSplit(M_total, w, config.lambda_s, config.lambda_m).feasible(config.N) for w in grid]
    if not any(feasible):
        raise ConfigError("no feasible antenna split on the grid")
    objective = _rate_objective(model, config, "varpi", settings, M_total)
    rates = [objective(w) if ok else math.nan for w, ok in zip(grid, feasible)]
    idx = [i for i, ok in enumerate(feasible) if ok]
    best = max(idx, key=lambda i: rates[i])
    pos = idx.index(best)
    a = grid[idx[max(pos - 1, 0)]]
    b = grid[idx[min(pos + 1, len(idx) - 1)]]
    star, rate_star = grid[best], rates[best]
    if b > a:
        refined = optimize_scalar(objective, (a, b), tolerance, pre_grid=3)
        if refined.value > rate_star:
            star, rate_star = refined.argmax, refined.value
    return SplitResult(
        varpi_star=star,
        rate_star=rate_star,
        grid_varpi_star=grid[best],
        varpi=tuple(grid),
        rates=tuple(rates),
        feasible=tuple(feasible),
        M_total=M_total,
    )


def split_grid(M_total, config, step=0.05):
    """Antenna-split grid from the first feasible share up to the last one."""
    start = config.lambda_s / (M_total * config.lambda_m)
    stop = 1.0 - config.N / M_total
    grid = np.arange(math.ceil(start / step) * step, stop + 1e-12, step)
    grid = [round(float(g), 12) for g in grid]
    if not grid or grid[0] > start + 1e-12:
        grid.insert(0, start)
    return grid


def _rate_row(prefix, report):
    row = dict(prefix)
    row.update(
        r_total=report.r_total,
        r_m_los=report.r_m_los,
        r_m_nlos=report.r_m_nlos,
        r_s_los=report.r_s_los,
        r_s_nlos=report.r_s_nlos,
    )
    return row


def figure_rate_vs_density(model, config, settings=None, grid=range(1, 61)):
    base = config.replace(N=10, tau=max(config.tau, 10), M_m=20, M_s=5, B=1.0)
    return [
        _rate_row({"lambda_s": float(l)}, achievable_rate(model, base.replace(lambda_s=float(l)), settings))
        for l in grid
    ]


def figure_rate_vs_antennas(model, config, settings=None, grid=(10, 20, 40, 80, 160, 320, 640, 1280)):
    base = config.replace(N=10, tau=max(config.tau, 10), lambda_s=1.0, M_s=5, B=1.0)
    return [_rate_row({"M_m": m}, achievable_rate(model, base.replace(M_m=m), settings)) for m in grid]


def figure_optimal_density(model, config, settings=None, n_values=(5, 10, 15), bracket=(1.0, 60.0),
                           tolerance=1e-2):
    rows = []
    for n in n_values:
        base = config.replace(N=n, tau=max(config.tau, n), M_m=20, M_s=5, B=1.0)
        opt = optimize_parameter("lambda_s", model, base, bracket, tolerance, settings=settings)
        rows.append({"N": n, "lambda_s_opt": opt.argmax, "r_opt": opt.value, "flag": opt.flag or ""})
    return rows


def figure_optimal_bias(model, config, settings=None, m_values=(20, 60, 100, 200), bracket=(0.01, 100.0),
                        tolerance=1e-3, lambda_s=10.0):
    rows = []
    for m in m_values:
        base = config.replace(N=10, tau=max(config.tau, 10), M_m=m, M_s=5, lambda_s=lambda_s)
        opt = optimize_parameter("B", model, base, bracket, tolerance, log_scale=True, settings=settings)
        rows.append({"M_m": m, "B_opt": opt.argmax, "r_opt": opt.value, "flag": opt.flag or ""})
    return rows


def figure_rate_vs_split(model, config, settings=None, M_total=200, lambda_values=(5.0, 10.0, 20.0)):
    rows = []
    for lam in lambda_values:
        base = config.replace(N=10, tau=max(config.tau, 10), lambda_s=lam, B=1.0)
        for w in split_grid(M_total, base):
            split = AntennaSplit(M_total, w, lam, base.lambda_m)
            report = achievable_rate(model, base.replace(M_m=split.M_m, M_s=split.M_s), settings)
            rows.append(_rate_row({"lambda_s": lam, "varpi": w, "M_m": split.M_m, "M_s": split.M_s}, report))
    return rows


def figure_optimal_split(model, config, settings=None, M_total=200, lambda_values=(5.0, 10.0, 20.0),
                         n_values=(5, 10, 15)):
    rows = []
    for n in n_values:
        for lam in lambda_values:
            base = config.replace(N=n, tau=max(config.tau, n), lambda_s=lam, B=1.0)
            res = optimize_split(M_total, model, base, split_grid(M_total, base), settings=settings)
            m_m, m_s = res.split(base).rounded()
            rows.append({
                "N": n,
                "lambda_s": lam,
                "varpi_opt": res.varpi_star,
                "varpi_grid_opt": res.grid_varpi_star,
                "r_opt": res.rate_star,
                "M_m_int": m_m,
                "M_s_int": m_s,
            })
    return rows


FIGURES = {
    "fig4": figure_rate_vs_density,
    "fig5": figure_rate_vs_antennas,
    "fig6": figure_optimal_density,
    "fig7": figure_optimal_bias,
    "fig8": figure_rate_vs_split,
    "fig9": figure_optimal_split,
}


def reproduce(figure, out_dir, model, config, settings=None):
    """Compute one figure's data and write ``<out_dir>/<figure>.csv``."""
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    rows = FIGURES[figure](model, config, settings)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{figure}.csv")
    emit(rows, "csv", path)
    return path, rows
