"""Branching-process Monte Carlo of an outbreak with and without tracing alerts.

Model, in brief: every infected individual is infectious for exactly
``incubation_days`` days after the day of infection and is then detected
and strictly quarantined (zero offspring afterwards).  While infectious it
produces Poisson(r0 / incubation_days) new cases per day, divided by the
quarantine factor k on days it is under an alert.  App adoption is a
per-individual Bernoulli(efficiency) draw.  Alerts switch on at
``activation_day`` and ramp up linearly over ``ramp_days``.

Two alert policies:

* FROM_INFECTION - a new app-user case is alerted at creation with
  probability equal to the current activation level, and then transmits
  at the reduced rate for its whole infectious window.
* AT_DETECTION - when a case reaches detection, a Bernoulli(activation
  level) upload alerts its app-user offspring (and app-user infector)
  from that day on.

RNG discipline: each replicate owns one seeded generator, and per-day
draw counts never depend on branch outcomes (app and alert coin flips are
consumed whether or not they matter).  As a consequence runs that should
be equivalent - k=1, efficiency=0, activation after the horizon - consume
identical streams and produce bit-identical series for the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .crypto import derive_seed

__all__ = [
    "AlertPolicy",
    "SimulationParams",
    "InfectionRecord",
    "DailySeries",
    "EnsembleSeries",
    "AbortCapExceeded",
    "NoGrowthRoot",
    "activation_level",
    "daily_offspring_rate",
    "ReplicateState",
    "step_day",
    "run_replicate",
    "simulate_replicate",
    "run_ensemble",
    "renewal_growth_factor",
    "fit_growth_factor",
    "mean_completed_offspring",
]

NOT_SET = -1  # sentinel for "no such day" in int arrays


class AlertPolicy(Enum):
    FROM_INFECTION = "FromInfection"
    AT_DETECTION = "AtDetection"


class NoGrowthRoot(Exception):
    """The renewal equation has no positive growth root (r0 <= 0)."""


class AbortCapExceeded(Exception):
    """Active infectious count blew past the safety cap.

    Carries the partial series accumulated up to the abort day, with the
    truncation flag set.
    """

    def __init__(self, day: int, active: int, series: "DailySeries") -> None:
        super().__init__(f"active count {active} exceeded cap on day {day}")
        self.day = day
        self.active = active
        self.series = series


@dataclass(frozen=True)
class SimulationParams:
    """All knobs of the branching model; defaults follow the headline scenario."""

    r0: float = 3.0
    incubation_days: int = 14
    quarantine_factor: float = 10.0
    activation_day: int = 30
    ramp_days: int = 10
    efficiency: float = 1.0
    initial_infected: int = 10
    horizon_days: int = 60
    replicates: int = 50
    max_active: int = 5_000_000
    alert_policy: AlertPolicy = AlertPolicy.FROM_INFECTION

    def __post_init__(self) -> None:
        if self.r0 < 0:
            raise ValueError("r0 must be nonnegative")
        if self.incubation_days < 1:
            raise ValueError("incubation_days must be at least 1")
        if self.quarantine_factor < 1:
            raise ValueError("quarantine_factor must be at least 1")
        if self.activation_day < 0:
            raise ValueError("activation_day must be nonnegative")
        if self.ramp_days < 0:
            raise ValueError("ramp_days must be nonnegative")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must be within [0, 1]")
        if self.initial_infected < 1:
            raise ValueError("initial_infected must be at least 1")
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be at least 1")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.max_active < 1:
            raise ValueError("max_active must be at least 1")

    def without_app(self) -> "SimulationParams":
        """The seed-coupled no-intervention twin of this parameter set."""
        return replace(self, efficiency=0.0)


@dataclass
class InfectionRecord:
    """One infected individual's timeline."""

    id: int
    infected_on: int
    infector: int | None
    is_app_user: bool
    detected_on: int
    alerted_on: int | None = None


@dataclass
class DailySeries:
    """New infections per day, day 0 through the horizon."""

    new_infected_per_day: np.ndarray
    truncated: bool = False
    truncated_at: int | None = None

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.new_infected_per_day)

    def __len__(self) -> int:
        return len(self.new_infected_per_day)


@dataclass
class EnsembleSeries:
    """Replicate stack with its per-day mean and standard error."""

    daily: np.ndarray            # shape (replicates, days)
    mean: np.ndarray
    se: np.ndarray
    truncated: bool = False
    aborted_replicates: list[int] = field(default_factory=list)

    @property
    def cumulative_per_replicate(self) -> np.ndarray:
        return np.cumsum(self.daily, axis=1)

    def cumulative_stats(self, day: int) -> tuple[float, float]:
        """(mean, standard error) of the cumulative count at a given day."""
        cum = self.cumulative_per_replicate[:, day].astype(float)
        n = cum.shape[0]
        se = cum.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
        return float(cum.mean()), float(se)


def activation_level(day: int, params: SimulationParams) -> float:
    """Fraction of the alert machinery switched on at a given day.

    Zero before the activation day, then a linear ramp reaching one after
    ramp_days (immediately when ramp_days is zero).
    """
    if day < params.activation_day:
        return 0.0
    if params.ramp_days == 0:
        return 1.0
    return min(1.0, (day - params.activation_day) / params.ramp_days)


def daily_offspring_rate(rec: InfectionRecord, day: int, params: SimulationParams) -> float:
    """Expected new cases produced by one record on one day."""
    if day < rec.infected_on:
        raise ValueError("day precedes the record's infection")
    if day <= rec.infected_on or day > rec.detected_on:
        return 0.0
    rate = params.r0 / params.incubation_days
    if rec.alerted_on is not None and rec.alerted_on <= day:
        rate /= params.quarantine_factor
    return rate


class ReplicateState:
    """Flat-array population of one replicate.

    Records are stored in creation order, so the infectious set on any
    day is a contiguous slice and per-day sampling is one vectorised
    Poisson draw.
    """

    __slots__ = (
        "params", "infected_on", "infector", "is_app_user", "alerted_on",
        "offspring", "count", "day_start", "series", "_first_active",
    )

    def __init__(self, params: SimulationParams, rng: np.random.Generator) -> None:
        self.params = params
        size = max(1024, params.initial_infected)
        self.infected_on = np.zeros(size, np.int32)
        self.infector = np.full(size, NOT_SET, np.int64)
        self.is_app_user = np.zeros(size, bool)
        self.alerted_on = np.full(size, NOT_SET, np.int32)
        self.offspring = np.zeros(size, np.int64)
        self.count = 0
        self._first_active = 0
        # day_start[d] = index of the first record created on day d
        self.day_start = np.zeros(params.horizon_days + 2, np.int64)
        self.series = np.zeros(params.horizon_days + 1, np.int64)
        self._append_cohort(0, params.initial_infected, NOT_SET, rng)
        self.series[0] = params.initial_infected

    def _grow(self, need: int) -> None:
        size = self.infected_on.shape[0]
        if self.count + need <= size:
            return
        while self.count + need > size:
            size *= 2
        for name in ("infected_on", "infector", "is_app_user", "alerted_on", "offspring"):
            old = getattr(self, name)
            fresh = np.full(size, NOT_SET, old.dtype) if name in ("infector", "alerted_on") \
                else np.zeros(size, old.dtype)
            fresh[: self.count] = old[: self.count]
            setattr(self, name, fresh)

    def _append_cohort(self, day: int, total: int, infectors, rng: np.random.Generator) -> None:
        """Create `total` records infected on `day`, consuming one app-user
        and (under FROM_INFECTION) one alert uniform per record regardless
        of outcomes."""
        if total == 0:
            return
        self._grow(total)
        lo, hi = self.count, self.count + total
        self.infected_on[lo:hi] = day
        self.infector[lo:hi] = infectors
        app = rng.random(total) < self.params.efficiency
        self.is_app_user[lo:hi] = app
        self.alerted_on[lo:hi] = NOT_SET
        self.offspring[lo:hi] = 0
        if self.params.alert_policy is AlertPolicy.FROM_INFECTION:
            alerted = rng.random(total) < activation_level(day, self.params)
            self.alerted_on[lo:hi] = np.where(app & alerted, day, NOT_SET)
        self.count = hi
        self.day_start[day + 1 :] = hi

    def active_slice(self, day: int) -> tuple[int, int]:
        """Index range of records infectious on `day` (creation order)."""
        earliest = day - self.params.incubation_days
        while (
            self._first_active < self.count
            and self.infected_on[self._first_active] < earliest
        ):
            self._first_active += 1
        return self._first_active, int(self.day_start[min(day, len(self.day_start) - 1)])

    def record(self, index: int) -> InfectionRecord:
        infector = int(self.infector[index])
        alerted = int(self.alerted_on[index])
        return InfectionRecord(
            id=index,
            infected_on=int(self.infected_on[index]),
            infector=None if infector == NOT_SET else infector,
            is_app_user=bool(self.is_app_user[index]),
            alerted_on=None if alerted == NOT_SET else alerted,
            detected_on=int(self.infected_on[index]) + self.params.incubation_days,
        )

    def records(self) -> list[InfectionRecord]:
        return [self.record(i) for i in range(self.count)]

    def to_series(self, through_day: int | None = None, truncated: bool = False) -> DailySeries:
        if through_day is None:
            return DailySeries(self.series.copy(), truncated=truncated)
        return DailySeries(
            self.series[: through_day + 1].copy(),
            truncated=truncated,
            truncated_at=through_day,
        )


def _alert_children_of(state: ReplicateState, day: int, dlo: int, dhi: int,
                       uploaded: np.ndarray, start: int) -> None:
    """Alert app-user records in [start, count) whose infector uploaded today."""
    parent = state.infector[start : state.count]
    candidates = np.nonzero((parent >= dlo) & (parent < dhi))[0] + start
    if candidates.size == 0:
        return
    keep = (
        uploaded[state.infector[candidates] - dlo]
        & state.is_app_user[candidates]
        & (state.alerted_on[candidates] == NOT_SET)
    )
    state.alerted_on[candidates[keep]] = day


def _apply_detection_uploads(
    state: ReplicateState, day: int, rng: np.random.Generator
) -> tuple[int, int, np.ndarray] | None:
    """AT_DETECTION policy: records detected today roll an upload coin; on
    success their app-user offspring and app-user infector become alerted."""
    params = state.params
    born = day - params.incubation_days
    if born < 0:
        return None
    dlo = int(state.day_start[born])
    dhi = int(state.day_start[born + 1])
    n_det = dhi - dlo
    if n_det == 0:
        return None
    # one uniform per detecting record, consumed whatever the level is
    uploaded = rng.random(n_det) < activation_level(day, params)
    if not uploaded.any():
        return None
    # offspring created on earlier days; today's cohort is handled after it exists
    _alert_children_of(state, day, dlo, dhi, uploaded, start=dhi)
    # the infector of each uploading record, when it is an app user
    ups = state.infector[dlo:dhi][uploaded]
    ups = ups[ups != NOT_SET]
    if ups.size:
        sel = state.is_app_user[ups] & (state.alerted_on[ups] == NOT_SET)
        state.alerted_on[ups[sel]] = day
    return dlo, dhi, uploaded


def step_day(
    state: ReplicateState,
    day: int,
    params: SimulationParams,
    rng: np.random.Generator,
) -> int:
    """Advance one day; returns how many new infections were created."""
    uploads = None
    if params.alert_policy is AlertPolicy.AT_DETECTION:
        uploads = _apply_detection_uploads(state, day, rng)
    lo, hi = state.active_slice(day)
    active = hi - lo
    if active > params.max_active:
        raise AbortCapExceeded(day, active, state.to_series(day - 1, truncated=True))
    if active == 0:
        state.series[day] = 0
        state.day_start[day + 1 :] = state.count
        return 0
    rates = np.full(active, params.r0 / params.incubation_days)
    alerted = state.alerted_on[lo:hi]
    rates[(alerted != NOT_SET) & (alerted <= day)] /= params.quarantine_factor
    drawn = rng.poisson(rates)
    state.offspring[lo:hi] += drawn
    total = int(drawn.sum())
    state.series[day] = total
    infectors = np.repeat(np.arange(lo, hi, dtype=np.int64), drawn)
    born_at = state.count
    state._append_cohort(day, total, infectors, rng)
    if total == 0:
        state.day_start[day + 1 :] = state.count
    elif uploads is not None:
        dlo, dhi, uploaded = uploads
        _alert_children_of(state, day, dlo, dhi, uploaded, start=born_at)
    return total


def simulate_replicate(params: SimulationParams, seed: int) -> ReplicateState:
    """Run one full replicate and return its record arrays."""
    rng = np.random.Generator(np.random.PCG64(seed))
    state = ReplicateState(params, rng)
    for day in range(1, params.horizon_days + 1):
        step_day(state, day, params, rng)
    return state


def run_replicate(params: SimulationParams, seed: int) -> DailySeries:
    """One replicate's daily series; bit-identical for identical inputs."""
    return simulate_replicate(params, seed).to_series()


def run_ensemble(params: SimulationParams, base_seed: int) -> EnsembleSeries:
    """Mean and standard error over `params.replicates` independent runs.

    Replicate r draws its seed from (base_seed, r) with a keyed digest, so
    results do not depend on execution order.  A replicate that hits the
    activity cap contributes its partial series and flags the ensemble as
    truncated; nothing is dropped silently.
    """
    rows: list[np.ndarray] = []
    aborted: list[int] = []
    for r in range(params.replicates):
        seed = derive_seed(base_seed, r)
        try:
            rows.append(run_replicate(params, seed).new_infected_per_day)
        except AbortCapExceeded as abort:
            rows.append(abort.series.new_infected_per_day)
            aborted.append(r)
    length = min(len(row) for row in rows)
    stack = np.stack([row[:length] for row in rows])
    mean = stack.mean(axis=0)
    n = stack.shape[0]
    se = stack.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(length)
    return EnsembleSeries(
        daily=stack,
        mean=mean,
        se=se,
        truncated=bool(aborted),
        aborted_replicates=aborted,
    )


def renewal_growth_factor(r0: float, incubation_days: int) -> float:
    """Growth factor g per day solving the discrete renewal equation.

    g is the unique positive root of
    (r0/incubation_days) * sum_{a=1..incubation_days} g**(-a) = 1,
    found by bisection to a residual below 1e-10.  Serves as the
    independent oracle for the exponential phase of the simulation.
    """
    if r0 <= 0:
        raise NoGrowthRoot("growth root requires r0 > 0")
    rate = r0 / incubation_days

    def residual(g: float) -> float:
        return rate * sum(g ** (-a) for a in range(1, incubation_days + 1)) - 1.0

    lo, hi = 1e-9, 2.0
    while residual(hi) > 0:
        hi *= 2.0
    mid = 0.5 * (lo + hi)
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        value = residual(mid)
        if abs(value) < 1e-10:
            break
        if value > 0:
            lo = mid
        else:
            hi = mid
    return mid


def fit_growth_factor(daily_mean: np.ndarray, start_day: int, end_day: int) -> float:
    """Per-day growth factor from a log-linear fit over [start_day, end_day]."""
    days = np.arange(start_day, end_day + 1)
    values = np.asarray(daily_mean, dtype=float)[start_day : end_day + 1]
    if np.any(values <= 0):
        raise ValueError("growth window contains non-positive incidence")
    slope = np.polyfit(days, np.log(values), 1)[0]
    return float(np.exp(slope))


def mean_completed_offspring(
    params: SimulationParams,
    base_seed: int,
    replicates: int,
    after_day: int,
) -> tuple[float, int]:
    """Mean total offspring of cohorts infected strictly after `after_day`
    whose full infectious window fits inside the horizon.

    Brute-force counter over fresh replicates; the observable behind the
    post-ramp offspring checks (expected value
    efficiency*r0/k + (1-efficiency)*r0 once the ramp saturates).
    """
    latest = params.horizon_days - params.incubation_days
    total = 0
    count = 0
    for r in range(replicates):
        state = simulate_replicate(params, derive_seed(base_seed, r))
        born = state.infected_on[: state.count]
        mask = (born > after_day) & (born <= latest)
        total += int(state.offspring[: state.count][mask].sum())
        count += int(mask.sum())
    if count == 0:
        raise ValueError("cohort window is empty at these parameters")
    return total / count, count
