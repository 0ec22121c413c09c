"""Spectral-coherence diagnostics for periodic correlation in sampled series.

The workhorse statistic is the smoothed squared coherence between discrete
Fourier ordinates d(theta_p) = sum_t X_t e^{i t theta_p}, theta_p = 2 pi p / n:

    |gamma(p, q, M)|^2 =
        |sum_{m<M} d(theta_{p+m}) conj(d(theta_{q+m}))|^2
        / (sum_{m<M} |d(theta_{p+m})|^2 * sum_{m<M} |d(theta_{q+m})|^2),

with indices wrapping mod n.  A series with T-periodic correlation puts
mass on the diagonals |p - q| = multiples of n/T; white noise exceeds the
level-alpha threshold 1 - alpha^{1/(M-1)} at the nominal rate.  The
threshold's null law assumes the two smoothing windows are disjoint, so
cells with circular offset below M (including the trivially unit diagonal)
are excluded from all inference.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError


def dft_ordinates(series) -> np.ndarray:
    """Fourier ordinates with the positive-exponent convention.

    d[p] = sum_t series[t] * exp(+i t theta_p), computed as n * ifft.
    """
    x = np.asarray(series)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("series must be 1-d with at least two samples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("series must be finite")
    return x.size * np.fft.ifft(x)


@dataclass(eq=False)
class CoherenceGrid:
    """Smoothed squared-coherence surface plus staged inference results."""

    n: int
    smoothing_m: int
    values: np.ndarray
    detrended: bool
    n_degenerate: int = 0
    alpha: float | None = None
    threshold: float | None = None
    mask: np.ndarray | None = None
    detected_spacings: list = field(default_factory=list)
    estimated_period: int | None = None

    def valid_cells(self) -> np.ndarray:
        """Boolean grid of cells whose windows do not overlap (inference zone)."""
        d = np.mod(np.arange(self.n)[None, :] - np.arange(self.n)[:, None], self.n)
        circ = np.minimum(d, self.n - d)
        return circ >= self.smoothing_m


def spectral_coherence(series, smoothing_m: int, detrend: bool = True) -> CoherenceGrid:
    """Squared coherence |gamma(p, q, M)|^2 over the full n x n index grid.

    The series is centered (global mean removed) unless detrend=False.
    Window sums wrap mod n.  Cells with a zero denominator get value 0 and
    are counted in n_degenerate; the diagonal is identically 1.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValidationError("series must be 1-d")
    n = x.size
    M = int(smoothing_m)
    if M < 2:
        raise ValidationError("smoothing_m must be at least 2")
    if M > n:
        raise ValidationError("smoothing_m cannot exceed the series length")
    if detrend:
        x = x - x.mean()
    d = dft_ordinates(x)
    W = np.empty((M, n), dtype=complex)
    for m in range(M):
        W[m] = np.roll(d, -m)
    window_power = np.sum(np.abs(W) ** 2, axis=0)
    cross = W.conj().T @ W
    num = np.abs(cross) ** 2
    den = np.outer(window_power, window_power)
    degenerate = den == 0.0
    values = np.divide(num, den, out=np.zeros_like(num), where=~degenerate)
    np.clip(values, 0.0, 1.0, out=values)
    np.fill_diagonal(values, 1.0)
    return CoherenceGrid(n=n, smoothing_m=M, values=values, detrended=detrend,
                         n_degenerate=int(np.count_nonzero(degenerate)))


def significance_mask(grid: CoherenceGrid, alpha: float) -> np.ndarray:
    """Cells exceeding the level-alpha white-noise threshold 1 - alpha^{1/(M-1)}.

    Stores alpha, threshold, and the mask on the grid and returns the mask.
    """
    if not (0.0 < alpha < 1.0):
        raise ValidationError("alpha must be in (0, 1)")
    threshold = 1.0 - alpha ** (1.0 / (grid.smoothing_m - 1))
    mask = grid.values > threshold
    grid.alpha = float(alpha)
    grid.threshold = float(threshold)
    grid.mask = mask
    return mask


def _offset_occupancy(mask: np.ndarray, d: int) -> float:
    n = mask.shape[0]
    p = np.arange(n)
    return float(mask[p, (p + d) % n].mean())


def _line_profile(mask: np.ndarray, d: int, n_blocks: int) -> tuple:
    """Occupancy and block coverage of the wrapped diagonal at offset d.

    Coverage is the fraction of contiguous blocks along the diagonal that
    contain at least one significant cell: a genuine line is lit along its
    whole length, while clusters of spurious exceedances (width ~M) light
    only a few blocks.
    """
    n = mask.shape[0]
    p = np.arange(n)
    cells = mask[p, (p + d) % n]
    occupancy = float(cells.mean())
    coverage = float(np.mean([blk.any() for blk in np.array_split(cells, n_blocks)]))
    return occupancy, coverage


_COVERAGE_MIN = 0.5
_SINGLETON_OCC_FACTOR = 10.0


@dataclass(frozen=True)
class PeriodDetection:
    period: int
    spacing: int
    offsets: tuple
    qualifying: tuple
    line_mass: float


def detect_period(mask: np.ndarray, smoothing_m: int,
                  line_threshold: float) -> PeriodDetection | None:
    """Infer a period from off-diagonal lines of significant cells.

    A circular offset d in [M, n/2] is "hot" when its diagonal occupancy
    exceeds `line_threshold`, and an unambiguous LINE when its cells are
    additionally spread over more than half of the M-length blocks along
    the diagonal (see _line_profile).  Candidate spacings (lines and their
    pairwise gcds >= M) are scored by the summed occupancy of the lines
    within one cell of their multiples; the best-explaining spacing wins
    and is snapped to the nearest divisor of n (with a warning) when
    needed.  The period is n divided by the spacing.

    Returns None when no line qualifies, when the spacing falls below the
    statistic's resolution M, or when the winning family is a single weak
    line (occupancy below 10x the threshold): one faint diagonal cannot be
    told apart from a chance cluster, whereas a genuine fundamental
    saturates its line.

    The reported offsets are every hot offset consistent with the spacing
    (within one cell of a multiple); a blotchy line at an exact multiple
    is almost surely real once the family is established.  line_mass is
    the occupancy mass of those offsets over that plus the mass of
    unambiguous competing lines; ambiguous hot offsets off the family are
    indistinguishable from broadband speckle and count for neither side.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.shape[0] != mask.shape[1]:
        raise ValidationError("mask must be a square boolean grid")
    n = mask.shape[0]
    M = int(smoothing_m)
    n_blocks = max(1, n // M)
    hot = {}
    lines = {}
    for d in range(M, n // 2 + 1):
        occupancy, coverage = _line_profile(mask, d, n_blocks)
        if occupancy > line_threshold:
            hot[d] = occupancy
            if coverage > _COVERAGE_MIN:
                lines[d] = occupancy
    if not lines:
        return None
    qualifying = sorted(lines)
    candidates = set(qualifying)
    for i, a in enumerate(qualifying):
        for b in qualifying[i + 1:]:
            g = math.gcd(a, b)
            if g >= M:
                candidates.add(g)

    def family(g: int, pool) -> list:
        members = []
        for d in pool:
            r = d % g
            if min(r, g - r) <= 1:
                members.append(d)
        return members

    g = min(candidates,
            key=lambda c: (-sum(lines[d] for d in family(c, qualifying)), c))
    if n % g != 0:
        divisors = [k for k in range(1, n + 1) if n % k == 0]
        snapped = min(divisors, key=lambda k: abs(k - g))
        warnings.warn(f"line spacing {g} does not divide n={n}; snapping to "
                      f"{snapped}", UserWarning, stacklevel=2)
        g = snapped
    members = family(g, qualifying)
    if g < M or not members:
        return None
    if len(members) == 1 and lines[members[0]] < _SINGLETON_OCC_FACTOR * line_threshold:
        return None
    full = family(g, sorted(hot))
    explained = sum(hot[d] for d in full)
    competing = sum(lines[d] for d in qualifying if d not in full)
    return PeriodDetection(period=n // g, spacing=g, offsets=tuple(full),
                           qualifying=tuple(qualifying),
                           line_mass=explained / (explained + competing))


@dataclass(frozen=True)
class Verdict:
    """Three-way call: Stationary, PC (with period), or NonstationaryOther."""

    kind: str
    period: int | None
    line_offsets: tuple
    exceedance_rate: float
    line_mass: float

    def to_dict(self) -> dict:
        return {"class": self.kind,
                "period": self.period,
                "line_offsets": list(self.line_offsets)}


def classify(grid: CoherenceGrid, mask: np.ndarray | None = None) -> Verdict:
    """Classify the analyzed series from its significance pattern.

    PC(T) when period detection succeeds and the detected equally spaced
    family carries at least half of the line-like significance mass (its
    line_mass); Stationary when the off-diagonal exceedance rate stays
    within the null band (3 * alpha); everything else is
    NonstationaryOther.
    """
    if mask is None:
        mask = grid.mask
    if mask is None or grid.alpha is None:
        raise ValidationError("run significance_mask before classify")
    valid = grid.valid_cells()
    n_valid = int(np.count_nonzero(valid))
    exceed = mask & valid
    rate = int(np.count_nonzero(exceed)) / n_valid if n_valid else 0.0
    detection = detect_period(mask, grid.smoothing_m, 3.0 * grid.alpha)
    line_mass = detection.line_mass if detection is not None else 0.0
    grid.detected_spacings = list(detection.offsets) if detection else []
    grid.estimated_period = detection.period if detection else None
    if detection is not None and line_mass >= 0.5:
        return Verdict("PC", detection.period, detection.offsets, rate, line_mass)
    if rate <= 3.0 * grid.alpha:
        return Verdict("Stationary", None, (), rate, line_mass)
    return Verdict("NonstationaryOther", None,
                   detection.offsets if detection else (), rate, line_mass)


def sample_autocorrelation(series, max_lag: int) -> np.ndarray:
    """Biased sample ACF at lags 0..max_lag; errors on constant series."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("series must be 1-d with at least two samples")
    max_lag = int(max_lag)
    if max_lag < 0 or max_lag >= x.size:
        raise ValidationError("max_lag must satisfy 0 <= max_lag < len(series)")
    x = x - x.mean()
    denom = float(x @ x)
    if denom == 0.0:
        raise ValidationError("series is constant; autocorrelation undefined")
    return np.array([float(x[:x.size - k] @ x[k:]) / denom
                     for k in range(max_lag + 1)])


def analyze_series(series, smoothing_m: int, alpha: float,
                   detrend: bool = True) -> tuple[CoherenceGrid, Verdict]:
    """Full chain: coherence grid, significance mask, classification."""
    grid = spectral_coherence(series, smoothing_m, detrend=detrend)
    mask = significance_mask(grid, alpha)
    verdict = classify(grid, mask)
    return grid, verdict
