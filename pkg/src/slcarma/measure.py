"""Poisson random measures with periodically varying intensity and the
compound-Poisson-plus-drift subordinators they drive.

The intensity is piecewise constant on a partition of one period [0, T]
into r subintervals B_i = (s_{i-1}, s_i] and repeats with period T.  Each
subinterval carries a nonnegative expected event count m_i ("mass"), so the
cumulative intensity grows by m_i over each copy of B_i.  The driving
process is

    S(t) = gamma * t + sum_{k=1}^{N(t)} J_k,

with N a counting process of that intensity and J_k i.i.d. jump sizes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError


class SignedJumpWarning(UserWarning):
    """Jump law admits negative values: S is not almost surely nondecreasing."""


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class PeriodicPartition:
    """Partition of one period into half-open subintervals with event masses.

    Parameters
    ----------
    lengths : sequence of r positive reals, subinterval widths; the period is
        their sum.
    masses : sequence of r nonnegative reals, expected event count per copy
        of each subinterval.  All-zero masses describe a driftless measure
        (no events ever); negative masses are rejected.
    """

    lengths: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        lengths = _as_float_array(self.lengths, "lengths")
        masses = _as_float_array(self.masses, "masses")
        if lengths.size != masses.size:
            raise ValidationError("lengths and masses must have equal size")
        if np.any(lengths <= 0):
            raise ValidationError("subinterval lengths must be positive")
        if np.any(masses < 0):
            raise ValidationError("masses must be nonnegative")
        lengths.flags.writeable = False
        masses.flags.writeable = False
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "masses", masses)
        bounds = np.concatenate(([0.0], np.cumsum(lengths)))
        bounds.flags.writeable = False
        object.__setattr__(self, "_boundaries", bounds)
        prefix = np.concatenate(([0.0], np.cumsum(masses)))
        prefix.flags.writeable = False
        object.__setattr__(self, "_prefix_mass", prefix)

    @property
    def r(self) -> int:
        return int(self.lengths.size)

    @property
    def period(self) -> float:
        return float(self._boundaries[-1])

    @property
    def boundaries(self) -> np.ndarray:
        """Breakpoints s_0 = 0 < s_1 < ... < s_r = T."""
        return self._boundaries

    @property
    def total_mass(self) -> float:
        """Expected event count over one full period."""
        return float(self._prefix_mass[-1])

    def rates_per_unit_time(self) -> np.ndarray:
        return self.masses / self.lengths

    def subinterval_index(self, phase):
        """Index i with phase in (s_i, s_{i+1}], mapping phase 0 to index 0."""
        idx = np.searchsorted(self._boundaries, phase, side="left") - 1
        return np.clip(idx, 0, self.r - 1)

    @classmethod
    def from_rates(cls, lengths, rates_per_unit_time) -> "PeriodicPartition":
        lengths = _as_float_array(lengths, "lengths")
        rates = _as_float_array(rates_per_unit_time, "rates_per_unit_time")
        if lengths.size != rates.size:
            raise ValidationError("lengths and rates_per_unit_time must have equal size")
        return cls(lengths=lengths, masses=lengths * rates)

    @classmethod
    def from_dict(cls, doc: dict) -> "PeriodicPartition":
        if not isinstance(doc, dict):
            raise ValidationError("partition must be an object")
        has_mass = "masses" in doc
        has_rate = "rates_per_unit_time" in doc
        if has_mass == has_rate:
            raise ValidationError(
                "partition needs exactly one of 'masses' or 'rates_per_unit_time'")
        if "lengths" not in doc:
            raise ValidationError("partition.lengths is required")
        if has_mass:
            return cls(lengths=doc["lengths"], masses=doc["masses"])
        return cls.from_rates(doc["lengths"], doc["rates_per_unit_time"])

    def to_dict(self) -> dict:
        return {"lengths": self.lengths.tolist(), "masses": self.masses.tolist()}


def cumulative_intensity(partition: PeriodicPartition, t):
    """Expected event count on (0, t] for the periodically repeated measure.

    Satisfies the periodic splitting Lambda(k*T + s) = k*Lambda(T) + Lambda(s)
    and interpolates linearly inside each subinterval.  Accepts scalars or
    arrays; rejects negative times.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or not np.all(np.isfinite(t_arr)):
        raise ValidationError("time must be finite and nonnegative")
    T = partition.period
    k = np.floor(t_arr / T)
    s = t_arr - k * T
    # division can round up when t sits a hair under a period boundary
    neg = s < 0
    if np.any(neg):
        k = np.where(neg, k - 1, k)
        s = np.where(neg, s + T, s)
    bounds = partition.boundaries
    idx = np.clip(np.searchsorted(bounds, s, side="left") - 1, 0, partition.r - 1)
    frac = (s - bounds[idx]) / partition.lengths[idx]
    partial = partition._prefix_mass[idx] + partition.masses[idx] * frac
    partial = np.where(s == 0.0, 0.0, partial)
    lam = k * partition.total_mass + partial
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(lam)
    return lam


# ---------------------------------------------------------------------------
# jump-size laws


class JumpLaw:
    """Common interface for i.i.d. jump-size distributions.

    Subclasses expose the mean `kappa`, the second moment `beta`, the
    characteristic function `cf(u)`, sampling, and whether the law is
    almost surely nonnegative.
    """

    family = ""

    @property
    def kappa(self) -> float:
        raise NotImplementedError

    @property
    def beta(self) -> float:
        raise NotImplementedError

    def cf(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    @property
    def nonnegative(self) -> bool:
        raise NotImplementedError

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"family": self.family, "params": self.params()}

    @staticmethod
    def from_dict(doc: dict) -> "JumpLaw":
        if not isinstance(doc, dict) or "family" not in doc:
            raise ValidationError("jumps must be an object with a 'family' field")
        family = doc["family"]
        params = doc.get("params", {})
        if not isinstance(params, dict):
            raise ValidationError("jumps.params must be an object")
        try:
            if family == "normal":
                return NormalJumps(params["mean"], params["var"])
            if family == "exponential":
                return ExponentialJumps(params["rate"])
            if family == "constant":
                return ConstantJumps(params["value"])
            if family == "table":
                return TableJumps(params["values"], params["probs"])
        except KeyError as exc:
            raise ValidationError(f"jumps.params missing field {exc}") from exc
        raise ValidationError(f"unknown jump family {family!r}")

    def __eq__(self, other):
        return isinstance(other, JumpLaw) and self.to_dict() == other.to_dict()


class NormalJumps(JumpLaw):
    family = "normal"

    def __init__(self, mean, var):
        self.mean = float(mean)
        self.var = float(var)
        if not (np.isfinite(self.mean) and np.isfinite(self.var)) or self.var < 0:
            raise ValidationError("normal jumps need finite mean and var >= 0")

    @property
    def kappa(self):
        return self.mean

    @property
    def beta(self):
        return self.var + self.mean ** 2

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.mean - 0.5 * self.var * u ** 2)

    def sample(self, rng, size):
        return rng.normal(self.mean, math.sqrt(self.var), size)

    @property
    def nonnegative(self):
        return self.var == 0.0 and self.mean >= 0.0

    def params(self):
        return {"mean": self.mean, "var": self.var}


class ExponentialJumps(JumpLaw):
    family = "exponential"

    def __init__(self, rate):
        self.rate = float(rate)
        if not np.isfinite(self.rate) or self.rate <= 0:
            raise ValidationError("exponential jumps need rate > 0")

    @property
    def kappa(self):
        return 1.0 / self.rate

    @property
    def beta(self):
        return 2.0 / self.rate ** 2

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return self.rate / (self.rate - 1j * u)

    def sample(self, rng, size):
        return rng.exponential(1.0 / self.rate, size)

    @property
    def nonnegative(self):
        return True

    def params(self):
        return {"rate": self.rate}


class ConstantJumps(JumpLaw):
    family = "constant"

    def __init__(self, value):
        self.value = float(value)
        if not np.isfinite(self.value):
            raise ValidationError("constant jumps need a finite value")

    @property
    def kappa(self):
        return self.value

    @property
    def beta(self):
        return self.value ** 2

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * u * self.value)

    def sample(self, rng, size):
        return np.full(size, self.value)

    @property
    def nonnegative(self):
        return self.value >= 0.0

    def params(self):
        return {"value": self.value}


class TableJumps(JumpLaw):
    """Finite discrete law given by atoms and probabilities."""

    family = "table"

    def __init__(self, values, probs):
        self.values = _as_float_array(values, "table values")
        self.probs = _as_float_array(probs, "table probs")
        if self.values.size != self.probs.size:
            raise ValidationError("table values and probs must have equal size")
        if np.any(self.probs < 0) or abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValidationError("table probs must be nonnegative and sum to 1")

    @property
    def kappa(self):
        return float(self.probs @ self.values)

    @property
    def beta(self):
        return float(self.probs @ self.values ** 2)

    def cf(self, u):
        u = np.asarray(u, dtype=float)
        return np.exp(1j * np.multiply.outer(u, self.values)) @ self.probs

    def sample(self, rng, size):
        return rng.choice(self.values, size=size, p=self.probs)

    @property
    def nonnegative(self):
        return bool(np.all(self.values >= 0))

    def params(self):
        return {"values": self.values.tolist(), "probs": self.probs.tolist()}


# ---------------------------------------------------------------------------
# subordinator configuration and sample paths


@dataclass(frozen=True, eq=False)
class SubordinatorSpec:
    """Drift rate, periodic event intensity, jump law, and horizon in periods."""

    gamma: float
    partition: PeriodicPartition
    jumps: JumpLaw
    horizon_periods: int
    require_subordinator: bool = False

    def __post_init__(self):
        gamma = float(self.gamma)
        if not np.isfinite(gamma):
            raise ValidationError("gamma must be finite")
        object.__setattr__(self, "gamma", gamma)
        if not isinstance(self.partition, PeriodicPartition):
            raise ValidationError("partition must be a PeriodicPartition")
        if not isinstance(self.jumps, JumpLaw):
            raise ValidationError("jumps must be a JumpLaw")
        m = int(self.horizon_periods)
        if m != self.horizon_periods or m <= 0:
            raise ValidationError("horizon_periods must be a positive integer")
        object.__setattr__(self, "horizon_periods", m)
        if self.require_subordinator:
            if gamma < 0:
                raise ValidationError("subordinator requires gamma >= 0")
            if not self.jumps.nonnegative:
                raise ValidationError(
                    "subordinator requires an a.s. nonnegative jump law")
        elif gamma < 0 or not self.jumps.nonnegative:
            warnings.warn(
                "drift or jump law admits negative values; S(t) may decrease",
                SignedJumpWarning, stacklevel=2)

    @property
    def horizon(self) -> float:
        return self.horizon_periods * self.partition.period

    def with_horizon(self, horizon_periods: int) -> "SubordinatorSpec":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SignedJumpWarning)
            return replace(self, horizon_periods=horizon_periods)

    @classmethod
    def from_dict(cls, doc: dict) -> "SubordinatorSpec":
        if not isinstance(doc, dict):
            raise ValidationError("subordinator must be an object")
        for key in ("gamma", "partition", "jumps", "horizon_periods"):
            if key not in doc:
                raise ValidationError(f"subordinator.{key} is required")
        return cls(
            gamma=doc["gamma"],
            partition=PeriodicPartition.from_dict(doc["partition"]),
            jumps=JumpLaw.from_dict(doc["jumps"]),
            horizon_periods=doc["horizon_periods"],
            require_subordinator=bool(doc.get("require_subordinator", False)),
        )

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "partition": self.partition.to_dict(),
            "jumps": self.jumps.to_dict(),
            "horizon_periods": self.horizon_periods,
            "require_subordinator": self.require_subordinator,
        }


@dataclass(frozen=True, eq=False)
class SubordinatorPath:
    """One realized path: ordered event times, jump sizes, drift, horizon."""

    event_times: np.ndarray
    jump_sizes: np.ndarray
    gamma: float
    horizon: float
    label: str = ""

    def __post_init__(self):
        times = np.asarray(self.event_times, dtype=float)
        jumps = np.asarray(self.jump_sizes, dtype=float)
        if times.shape != jumps.shape or times.ndim != 1:
            raise ValidationError("event_times and jump_sizes must be aligned 1-d arrays")
        if times.size:
            if not np.all(np.diff(times) > 0):
                raise ValidationError("event times must be strictly increasing")
            if times[0] <= 0 or times[-1] > self.horizon:
                raise ValidationError("event times must lie in (0, horizon]")
        times.flags.writeable = False
        jumps.flags.writeable = False
        object.__setattr__(self, "event_times", times)
        object.__setattr__(self, "jump_sizes", jumps)
        cum = np.concatenate(([0.0], np.cumsum(jumps)))
        cum.flags.writeable = False
        object.__setattr__(self, "_cum_jumps", cum)

    @property
    def n_events(self) -> int:
        return int(self.event_times.size)

    def counts(self, t):
        """N(t): number of events in (0, t]."""
        return np.searchsorted(self.event_times, t, side="right")

    def evaluate(self, t):
        """S(t) = gamma*t + sum of jumps up to and including time t."""
        t_arr = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.event_times, t_arr, side="right")
        out = self.gamma * t_arr + self._cum_jumps[idx]
        if np.isscalar(t) or t_arr.ndim == 0:
            return float(out)
        return out

    def cumulative_at_events(self) -> np.ndarray:
        """S evaluated at each event time (right-continuous)."""
        return self.gamma * self.event_times + self._cum_jumps[1:]


def _strictly_increasing(times: np.ndarray) -> np.ndarray:
    """Nudge floating-point ties up by one ulp so event times are strict."""
    if times.size == 0:
        return times
    if times[0] <= 0.0:
        times[0] = np.nextafter(0.0, np.inf)
    while True:
        bad = np.nonzero(np.diff(times) <= 0)[0]
        if bad.size == 0:
            return times
        times[bad + 1] = np.nextafter(times[bad], np.inf)


def _rng_pair(seed):
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(seed)
    times_ss, jumps_ss = ss.spawn(2)
    return np.random.default_rng(times_ss), np.random.default_rng(jumps_ss)


def _draw_event_times(spec: SubordinatorSpec, rng: np.random.Generator) -> np.ndarray:
    part = spec.partition
    m = spec.horizon_periods
    masses = np.tile(part.masses, m)
    counts = rng.poisson(masses)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0)
    starts = np.tile(part.boundaries[:-1], m)
    starts += np.repeat(np.arange(m) * part.period, part.r)
    widths = np.tile(part.lengths, m)
    u = rng.random(total)
    times = np.repeat(starts, counts) + u * np.repeat(widths, counts)
    # subintervals are ordered and disjoint, so one global sort suffices
    times.sort()
    return _strictly_increasing(times)


def simulate_counting_process(spec: SubordinatorSpec, seed) -> np.ndarray:
    """Event times over (0, horizon]: per-subinterval Poisson counts with the
    subinterval mass as parameter, positions i.i.d. uniform, merged in order.
    Deterministic for a given seed."""
    times_rng, _ = _rng_pair(seed)
    return _draw_event_times(spec, times_rng)


def simulate_subordinator(spec: SubordinatorSpec, seed) -> SubordinatorPath:
    """Sample a full path: event times as in simulate_counting_process plus
    i.i.d. jump sizes drawn from an independent substream."""
    times_rng, jumps_rng = _rng_pair(seed)
    times = _draw_event_times(spec, times_rng)
    jumps = np.asarray(spec.jumps.sample(jumps_rng, times.size), dtype=float)
    label = f"subordinator(seed={seed!r}, periods={spec.horizon_periods})"
    return SubordinatorPath(times, jumps, spec.gamma, spec.horizon, label)


def subordinator_mean(spec: SubordinatorSpec, t):
    """E[S(t)] = gamma*t + Lambda(t)*kappa."""
    lam = cumulative_intensity(spec.partition, t)
    return spec.gamma * np.asarray(t, dtype=float) + lam * spec.jumps.kappa


def subordinator_variance(spec: SubordinatorSpec, t):
    """var[S(t)] = Lambda(t)*beta with beta the second jump moment."""
    return cumulative_intensity(spec.partition, t) * spec.jumps.beta


def characteristic_function(spec: SubordinatorSpec, t, u):
    """E[exp(iu S(t))] = exp(iu*gamma*t + Lambda(t)*(cf_J(u) - 1)).

    Factorizes over periods: phi_{kT+s} = phi_T^k * phi_s, the display of the
    periodically divisible structure.
    """
    t = float(t)
    if t < 0 or not np.isfinite(t):
        raise ValidationError("time must be finite and nonnegative")
    lam = cumulative_intensity(spec.partition, t)
    u_arr = np.asarray(u, dtype=float)
    out = np.exp(1j * u_arr * spec.gamma * t + lam * (spec.jumps.cf(u_arr) - 1.0))
    if np.isscalar(u) or u_arr.ndim == 0:
        return complex(out)
    return out


def sample_marginal(spec: SubordinatorSpec, t, size: int, seed) -> np.ndarray:
    """Draw `size` independent copies of S(t) from the marginal law.

    Uses the superposition identity N(t) ~ Poisson(Lambda(t)) plus i.i.d.
    jumps; equal in law to evaluating simulated paths at t but vectorized.
    """
    t = float(t)
    if t < 0:
        raise ValidationError("time must be nonnegative")
    lam = cumulative_intensity(spec.partition, t)
    rng = np.random.default_rng(np.random.SeedSequence(seed)
                                if not isinstance(seed, np.random.SeedSequence) else seed)
    counts = rng.poisson(lam, size)
    total = int(counts.sum())
    jumps = np.asarray(spec.jumps.sample(rng, total), dtype=float)
    cum = np.concatenate(([0.0], np.cumsum(jumps)))
    ends = np.cumsum(counts)
    sums = cum[ends] - cum[ends - counts]
    return spec.gamma * t + sums
