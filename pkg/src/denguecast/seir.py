"""Two-strain host-vector ODE system with fixed-step RK4 integration.

Used to generate synthetic outbreaks and to confirm numerically that the
cumulative infection curve of the full compartmental system obeys the
quadratic rate law dC/dt ~ W*C*(L0 - C) that the forecasting pipeline
assumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import DataError, FitError
from .icc import IccPoint, fit_logistic_curve, fit_parabola, icc_points
from .timeseries import IncidenceSeries, cumulative

STATE_FIELDS = ("s", "i1", "r1", "i2", "r2", "d", "y1", "y2", "r", "v1", "v2")

#: negative excursions smaller than this are treated as round-off, not clamps
CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class SeirParams:
    """Rate constants of the two-strain model (all per week)."""

    b1: float      # strain-1 vector-to-human transmission
    b2: float      # strain-2 vector-to-human transmission
    a1: float      # strain-1 human-to-vector transmission
    a2: float      # strain-2 human-to-vector transmission
    gamma: float   # human recovery
    mu_h: float    # human mortality
    mu_v: float    # vector mortality
    sigma1: float  # susceptibility multiplier for second infection by strain 1
    sigma2: float  # susceptibility multiplier for second infection by strain 2
    q: float       # fraction of second infections that become severe

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise DataError(f"{f.name} must be >= 0")
        if not 0.0 <= self.q <= 1.0:
            raise DataError("q must lie in [0, 1]")


@dataclass(frozen=True)
class SeirState:
    """Population fractions: humans by infection history, vectors by strain.

    Also used as a plain record for compartment *rates*, so sign constraints
    are enforced by :meth:`validate` (called on states entering integration)
    rather than at construction.
    """

    s: float
    i1: float
    r1: float
    i2: float
    r2: float
    d: float
    y1: float
    y2: float
    r: float
    v1: float
    v2: float

    def validate(self) -> "SeirState":
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise DataError(f"{f.name} must be >= 0")
        if self.v1 + self.v2 > 1.0 + 1e-12:
            raise DataError("infected vector fractions exceed the vector population")
        return self

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f) for f in STATE_FIELDS])

    @classmethod
    def from_array(cls, arr) -> "SeirState":
        return cls(**dict(zip(STATE_FIELDS, map(float, arr))))

    @property
    def human_total(self) -> float:
        return self.s + self.i1 + self.r1 + self.i2 + self.r2 + self.d + self.y1 + self.y2 + self.r


def derivatives(state: SeirState, params: SeirParams) -> SeirState:
    """Right-hand sides of the two-strain system, one rate per compartment."""
    rates = _rhs(np.append(state.as_array(), 0.0), params)
    return SeirState.from_array(rates[:11])


def _rhs(y: np.ndarray, p: SeirParams) -> np.ndarray:
    """Vector field over the 11 compartments plus cumulative infection inflow."""
    s, i1, r1, i2, r2, d, y1, y2, r, v1, v2 = y[:11]
    f1 = p.b1 * v1   # strain-1 force of infection on humans
    f2 = p.b2 * v2
    cross1 = p.sigma1 * f1 * r2   # second infections by strain 1
    cross2 = p.sigma2 * f2 * r1
    vacant = 1.0 - (v1 + v2)
    return np.array([
        -(f1 + f2) * s - p.mu_h * s,
        f1 * s - (p.gamma + p.mu_h) * i1,
        p.gamma * i1 - cross2 - p.mu_h * r1,
        f2 * s - (p.gamma + p.mu_h) * i2,
        p.gamma * i2 - cross1 - p.mu_h * r2,
        p.q * (cross2 + cross1) - (p.mu_h + p.gamma) * d,
        (1.0 - p.q) * cross1 - (p.gamma + p.mu_h) * y1,
        (1.0 - p.q) * cross2 - (p.gamma + p.mu_h) * y2,
        p.gamma * (y1 + y2 + d),
        p.a1 * (i1 + y1) * vacant - p.mu_v * v1,
        p.a2 * (i2 + y2) * vacant - p.mu_v * v2,
        (f1 + f2) * s + cross1 + cross2,
    ])


@dataclass
class Trajectory:
    """Weekly snapshots of the integrated system."""

    dt: float
    weeks: np.ndarray         # integer week marks, starting at 0
    states: np.ndarray        # (len(weeks), 11) compartment fractions
    cum_infections: np.ndarray  # fraction of the population ever infected
    clamp_events: int

    def state_at(self, week: int) -> SeirState:
        idx = int(np.searchsorted(self.weeks, week))
        if idx >= len(self.weeks) or self.weeks[idx] != week:
            raise DataError(f"week {week} not in trajectory")
        return SeirState.from_array(self.states[idx])


def integrate(state0: SeirState, params: SeirParams, dt: float, n_steps: int) -> Trajectory:
    """Classical RK4 over n_steps of size dt (weeks), sampled at week boundaries.

    Components are clamped to >= 0 after every step; excursions beyond
    round-off are counted as clamp events.  dt must divide one week so the
    weekly sampling lands exactly on step boundaries.
    """
    if dt <= 0:
        raise DataError("dt must be positive")
    steps_per_week = round(1.0 / dt)
    if steps_per_week < 1 or abs(steps_per_week * dt - 1.0) > 1e-9:
        raise DataError("dt must evenly divide one week")
    state0.validate()
    y = np.append(state0.as_array(), 0.0)
    weeks = [0]
    states = [y[:11].copy()]
    cum = [0.0]
    clamp_events = 0
    for k in range(1, n_steps + 1):
        k1 = _rhs(y, params)
        k2 = _rhs(y + 0.5 * dt * k1, params)
        k3 = _rhs(y + 0.5 * dt * k2, params)
        k4 = _rhs(y + dt * k3, params)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FitError(f"non-finite state at step {k}")
        negative = y < 0
        if negative.any():
            clamp_events += int((y < -CLAMP_TOL).sum())
            y = np.where(negative, 0.0, y)
        if k % steps_per_week == 0:
            weeks.append(k // steps_per_week)
            states.append(y[:11].copy())
            cum.append(float(y[11]))
    return Trajectory(dt=dt, weeks=np.array(weeks), states=np.array(states),
                      cum_infections=np.array(cum), clamp_events=clamp_events)


def weekly_incidence(traj: Trajectory, population: float) -> IncidenceSeries:
    """Integer new cases per week: population times the infection inflow integral.

    Counts every flow out of the susceptible and cross-susceptible pools, i.e.
    first infections plus second infections of either strain.
    """
    if len(traj.weeks) < 2:
        raise DataError("trajectory must span at least 2 week boundaries")
    raw = population * np.diff(traj.cum_infections)
    counts = tuple(int(math.floor(x + 0.5)) for x in raw)
    return IncidenceSeries(start_week=1, new_cases=counts)


def icc_shape_check(series) -> tuple[float, float]:
    """Goodness of the quadratic rate law on a completed synthetic outbreak.

    ``series`` is an IncidenceSeries or a plain sequence of weekly counts
    (real-valued counts are allowed for synthetic data).  Returns (R^2 of
    the rate-vs-cumulative parabola on reporting weeks, relative
    disagreement between the time-domain growth rate and W*L0).
    """
    if isinstance(series, IncidenceSeries):
        start_week = series.start_week
        counts = np.array(series.new_cases, dtype=float)
    else:
        start_week = 1
        counts = np.asarray(series, dtype=float)
    peak = counts.max()
    if peak <= 0:
        raise DataError("series has no cases")
    if np.any(counts[-3:] >= 0.05 * peak):
        raise DataError("outbreak not completed: final 3 weeks at or above 5% of peak")
    cum = np.cumsum(counts)
    points = [IccPoint(float(c), float(x)) for c, x in zip(cum, counts) if x > 0]
    para = fit_parabola(points, float(cum[-1]))
    dc = np.array([p.dc for p in points])
    tss = float(((dc - dc.mean()) ** 2).sum())
    resid = float(sum((p.dc - para.w * p.c * (para.l0 - p.c)) ** 2 for p in points))
    r_squared = 1.0 - resid / tss
    weeks = np.arange(start_week, start_week + len(counts))
    logi = fit_logistic_curve(weeks, cum, para.l0)
    delta_rel = abs(logi.delta - para.w * para.l0) / logi.delta
    return r_squared, delta_rel


@dataclass(frozen=True)
class Scenario:
    """A fully specified simulation run loaded from a key-value file."""

    params: SeirParams
    state0: SeirState
    dt: float
    weeks: int
    population: float


def load_scenario(path) -> Scenario:
    """Parse a plain-text ``key = value`` scenario file ('#' starts a comment)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing file: {path}")
    pairs: dict[str, float] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip().lower()
        if key in pairs:
            raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            pairs[key] = float(value)
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad number {value.strip()!r}") from None
    param_keys = [f.name for f in fields(SeirParams)]
    needed = set(param_keys) | set(STATE_FIELDS) | {"dt", "weeks", "population"}
    missing = needed - pairs.keys()
    if missing:
        raise DataError(f"{path}: missing keys {sorted(missing)}")
    extra = pairs.keys() - needed
    if extra:
        raise DataError(f"{path}: unknown keys {sorted(extra)}")
    return Scenario(
        params=SeirParams(**{k: pairs[k] for k in param_keys}),
        state0=SeirState(**{k: pairs[k] for k in STATE_FIELDS}).validate(),
        dt=pairs["dt"],
        weeks=int(pairs["weeks"]),
        population=pairs["population"],
    )


def run_scenario(scenario: Scenario) -> tuple[Trajectory, IncidenceSeries]:
    n_steps = scenario.weeks * round(1.0 / scenario.dt)
    traj = integrate(scenario.state0, scenario.params, scenario.dt, n_steps)
    return traj, weekly_incidence(traj, scenario.population)
