"""Continuous-time ARMA(p, q) state-space models and their simulation.

The state X solves dX = AX dt + e dS with A the companion matrix of the
autoregressive polynomial a(z) = z^p + a_1 z^{p-1} + ... + a_p and e the
last standard basis vector; the observed output is Y = b'X with the moving
average vector b = (b_0, ..., b_{p-1}), normalized so b_q = 1 and b_j = 0
for q < j < p.  Between driving events the flow is linear, so simulation
is exact: matrix exponentials advance the state and each jump J at time tau
contributes e^{A(t-tau)} e J downstream.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConvergenceError, NumericalError, ValidationError
from .measure import SubordinatorPath, SubordinatorSpec, simulate_subordinator


class EulerStabilityWarning(UserWarning):
    """The explicit Euler step amplifies the linear flow (spectral radius >= 1)."""


# ---------------------------------------------------------------------------
# polynomial utilities


def polynomial_roots(monic_coeffs, tol=1e-12, max_iter=200) -> np.ndarray:
    """All complex roots of a monic polynomial by simultaneous iteration.

    Coefficients are ordered highest degree first with leading 1.  Iterates
    every root at once (Weierstrass correction), stopping when the largest
    step falls under `tol` relative to the root magnitudes or when every
    residual reaches the coefficient-conditioning floor; raises
    ConvergenceError after `max_iter` sweeps otherwise.
    """
    c = np.asarray(monic_coeffs, dtype=complex)
    if c.ndim != 1 or c.size < 1 or c[0] != 1.0:
        raise ValidationError("expected monic coefficients, highest degree first")
    if not np.all(np.isfinite(c)):
        raise ValidationError("polynomial coefficients must be finite")
    p = c.size - 1
    if p == 0:
        return np.empty(0, dtype=complex)
    radius = 1.0 + np.max(np.abs(c[1:]))
    z = radius * np.exp(2j * np.pi * (np.arange(p) + 0.25) / p)
    abs_c = np.abs(c)
    for _ in range(max_iter):
        values = np.polyval(c, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        denom = np.prod(diff, axis=1)
        step = values / denom
        # collided iterates give denom ~ 0; shove them apart and go on
        bad = ~np.isfinite(step)
        if np.any(bad):
            z = z + bad * (tol + 1e-6 * radius) * (1 + 1j)
            continue
        z = z - step
        scale = max(1.0, float(np.max(np.abs(z))))
        if np.max(np.abs(step)) < tol * scale:
            return z
        floor = 64.0 * np.finfo(float).eps * np.polyval(abs_c, np.abs(z))
        if np.all(np.abs(np.polyval(c, z)) <= floor):
            return z
    raise ConvergenceError(
        f"root iteration did not converge in {max_iter} sweeps")


def coefficients_from_roots(roots) -> np.ndarray:
    """Expand prod (z - z_i) into real coefficients (a_1, ..., a_p).

    The root multiset must be closed under conjugation; any imaginary
    residue of the expanded coefficients above 1e-10 is an error, smaller
    residue is truncated.
    """
    roots = np.atleast_1d(np.asarray(roots, dtype=complex))
    if roots.size == 0:
        raise ValidationError("need at least one root")
    if not np.all(np.isfinite(roots)):
        raise ValidationError("roots must be finite")
    scale = max(1.0, float(np.max(np.abs(roots))))
    unmatched = [r for r in roots if abs(r.imag) > 1e-12 * scale]
    while unmatched:
        r = unmatched.pop()
        partner = [i for i, w in enumerate(unmatched)
                   if abs(w - np.conj(r)) <= 1e-9 * scale]
        if not partner:
            raise ValidationError(
                f"roots are not closed under conjugation (no partner for {r})")
        unmatched.pop(partner[0])
    coeffs = np.array([1.0 + 0j])
    for r in roots:
        coeffs = np.convolve(coeffs, np.array([1.0, -r]))
    residue = float(np.max(np.abs(coeffs.imag)))
    if residue > 1e-10:
        raise ValidationError(f"imaginary residue {residue:.3e} after expansion")
    return coeffs.real[1:].copy()


# ---------------------------------------------------------------------------
# matrix exponential


def matrix_exp(A, t=1.0) -> np.ndarray:
    """e^{A t} by scaling and squaring with a truncated power series.

    The scaled block B = A t / 2^s is kept at norm <= 1/2, the series is
    summed until terms vanish relative to machine precision, and the result
    is squared back up.  Raises NumericalError when t*||A|| is too large to
    exponentiate meaningfully.
    """
    M = np.asarray(A, dtype=float) * float(t)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("matrix_exp needs a square matrix")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix entries must be finite")
    n = M.shape[0]
    norm = float(np.linalg.norm(M, 1))
    if norm > 1e8:
        raise NumericalError(f"t*||A|| = {norm:.3e} too large for matrix_exp")
    squarings = 0 if norm <= 0.5 else int(math.ceil(math.log2(norm / 0.5)))
    B = M / (2.0 ** squarings)
    out = np.eye(n)
    term = np.eye(n)
    for k in range(1, 40):
        term = term @ B / k
        out = out + term
        if np.linalg.norm(term, 1) <= np.finfo(float).eps * np.linalg.norm(out, 1):
            break
    for _ in range(squarings):
        out = out @ out
    if not np.all(np.isfinite(out)):
        raise NumericalError("matrix exponential overflowed")
    return out


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    roots: np.ndarray
    offending: np.ndarray


@dataclass(frozen=True, eq=False)
class CarmaModel:
    """CARMA(p, q) model given by AR coefficients a and MA vector b.

    a = (a_1, ..., a_p) are the monic AR coefficients.  b has length p with
    b_q = 1 the highest active MA weight and structural zeros above it.
    Construction expands the companion matrix, locates the AR roots, and
    rejects AR/MA polynomials sharing a root.
    """

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or a.size == 0 or not np.all(np.isfinite(a)):
            raise ValidationError("a must be a nonempty finite 1-d array")
        p = a.size
        if b.shape != (p,) or not np.all(np.isfinite(b)):
            raise ValidationError("b must be a finite array of length p")
        nz = np.nonzero(b)[0]
        if nz.size == 0:
            raise ValidationError("b must have a nonzero entry")
        q = int(nz[-1])
        if b[q] != 1.0:
            raise ValidationError(f"highest active MA weight b_{q} must equal 1")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "_q", q)
        companion = np.zeros((p, p))
        if p > 1:
            companion[:-1, 1:] = np.eye(p - 1)
        companion[-1, :] = -a[::-1]
        companion.flags.writeable = False
        object.__setattr__(self, "_A", companion)
        ar_roots = polynomial_roots(np.concatenate(([1.0], a)))
        object.__setattr__(self, "_ar_roots", ar_roots)
        if q > 0:
            ma_roots = polynomial_roots(np.concatenate(([1.0], b[:q][::-1])))
            scale = max(1.0, float(np.max(np.abs(ar_roots))))
            gap = np.min(np.abs(ar_roots[:, None] - ma_roots[None, :]))
            if gap < 1e-8 * scale:
                raise ValidationError("AR and MA polynomials share a root")

    @property
    def p(self) -> int:
        return int(self.a.size)

    @property
    def q(self) -> int:
        return self._q

    @property
    def A(self) -> np.ndarray:
        """Companion matrix: identity superdiagonal, last row -a_p ... -a_1."""
        return self._A

    @property
    def e(self) -> np.ndarray:
        vec = np.zeros(self.p)
        vec[-1] = 1.0
        return vec

    @property
    def ar_roots(self) -> np.ndarray:
        return self._ar_roots

    def assert_stable(self):
        report = stability_check(self)
        if not report.stable:
            raise ValidationError(
                f"model is not stable; offending roots {report.offending}")

    @classmethod
    def from_roots(cls, roots, b) -> "CarmaModel":
        return cls(a=coefficients_from_roots(roots), b=b)

    @classmethod
    def from_dict(cls, doc: dict) -> "CarmaModel":
        if not isinstance(doc, dict):
            raise ValidationError("carma must be an object")
        if "b" not in doc:
            raise ValidationError("carma.b is required")
        has_roots = "roots" in doc
        has_a = "a" in doc
        if has_roots == has_a:
            raise ValidationError("carma needs exactly one of 'roots' or 'a'")
        if has_a:
            return cls(a=doc["a"], b=doc["b"])
        raw = doc["roots"]
        try:
            roots = np.array([complex(re, im) for re, im in raw])
        except (TypeError, ValueError) as exc:
            raise ValidationError("carma.roots must be [re, im] pairs") from exc
        return cls.from_roots(roots, doc["b"])

    def to_dict(self) -> dict:
        return {"a": self.a.tolist(), "b": self.b.tolist()}


def stability_check(model: CarmaModel) -> StabilityReport:
    """Locate the AR roots and report whether all real parts are negative."""
    roots = model.ar_roots
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]
    offending = roots[roots.real >= 0]
    return StabilityReport(stable=offending.size == 0, roots=roots,
                           offending=offending)


def kernel(model: CarmaModel, t):
    """Impulse response h(t) = b' e^{A t} e for t >= 0, zero for t < 0."""
    model.assert_stable()
    t_arr = np.asarray(t, dtype=float)
    prop = _Propagator(model)
    flat = np.atleast_1d(t_arr).ravel()
    out = np.zeros(flat.shape)
    pos = flat >= 0
    if np.any(pos):
        out[pos] = prop.jump_responses(flat[pos]) @ model.b
    out = out.reshape(np.atleast_1d(t_arr).shape)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out[0])
    return out


# ---------------------------------------------------------------------------
# propagation machinery shared by the simulators


class _Propagator:
    """Cached flows of dX = AX dt: matrices e^{A dt}, jump responses
    e^{A d} e, and drift responses int_0^dt e^{A v} e dv.

    Uses the eigendecomposition when A is comfortably diagonalizable and
    falls back to direct matrix exponentials otherwise.
    """

    def __init__(self, model: CarmaModel):
        self.A = model.A
        self.e = model.e
        self.p = model.p
        self._exp_cache: dict = {}
        self._drift_cache: dict = {}
        self.drift_mode = "closed_form"
        self._diag = False
        try:
            w, V = np.linalg.eig(self.A)
            cond = np.linalg.cond(V)
            if np.isfinite(cond) and cond < 1e8:
                self._diag = True
                self._w = w
                self._V = V
                self._ce = np.linalg.solve(V, self.e.astype(complex))
        except np.linalg.LinAlgError:
            pass

    def state_matrix(self, dt: float) -> np.ndarray:
        got = self._exp_cache.get(dt)
        if got is None:
            if self._diag:
                got = (self._V * np.exp(self._w * dt)) @ np.linalg.inv(self._V)
                got = got.real
            else:
                got = matrix_exp(self.A, dt)
            self._exp_cache[dt] = got
        return got

    def jump_responses(self, deltas: np.ndarray) -> np.ndarray:
        """Rows e^{A d} e for each nonnegative delay d; shape (len, p)."""
        deltas = np.asarray(deltas, dtype=float)
        if self._diag:
            growth = np.exp(np.multiply.outer(deltas, self._w))
            return ((growth * self._ce) @ self._V.T).real
        return np.stack([matrix_exp(self.A, d) @ self.e for d in deltas])

    def drift_response(self, dt: float) -> np.ndarray:
        """int_0^dt e^{A v} e dv, solved through A when invertible."""
        got = self._drift_cache.get(dt)
        if got is None:
            E = self.state_matrix(dt)
            try:
                got = np.linalg.solve(self.A, (E - np.eye(self.p)) @ self.e)
            except np.linalg.LinAlgError:
                self.drift_mode = "quadrature"
                got, _ = quad_vec(lambda v: self.jump_responses(np.array([v]))[0],
                                  0.0, dt, epsabs=1e-13, epsrel=1e-12)
            self._drift_cache[dt] = got
        return got


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    """Sampled state path: times, p-dimensional states, output Y = b'X."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    provenance: dict = field(default_factory=dict)


def _combined_events(model, path, burn_in_periods, spec, seed):
    """Path events plus a fresh backward extension over the burn-in window."""
    if burn_in_periods < 0 or int(burn_in_periods) != burn_in_periods:
        raise ValidationError("burn_in_periods must be a nonnegative integer")
    if burn_in_periods == 0:
        return path.event_times, path.jump_sizes, 0.0
    if spec is None:
        raise ValidationError("burn-in extension needs the subordinator spec")
    if spec.gamma != path.gamma:
        raise ValidationError("spec.gamma disagrees with the path drift")
    ext = simulate_subordinator(spec.with_horizon(int(burn_in_periods)), seed)
    t0 = -ext.horizon
    events = np.concatenate((ext.event_times + t0, path.event_times))
    jumps = np.concatenate((ext.jump_sizes, path.jump_sizes))
    return events, jumps, t0


def _checked_sample_times(sample_times, t0, horizon):
    ts = np.asarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValidationError("sample_times must be a nonempty 1-d array")
    if np.any(np.diff(ts) <= 0):
        raise ValidationError("sample_times must be strictly increasing")
    if ts[0] <= t0 or ts[-1] > horizon:
        raise ValidationError("sample_times must lie inside the simulated window")
    return ts


def simulate_exact(model: CarmaModel, path: SubordinatorPath, sample_times,
                   burn_in_periods: int = 0, spec: SubordinatorSpec | None = None,
                   seed=0, check_stability: bool = True) -> StateTrajectory:
    """Exact trajectory driven by a realized path.

    Starts from X = 0 at the left edge of the (optional) burn-in window and
    advances through each inter-sample interval with the closed-form flow:
    matrix exponential on the state, drift response for gamma, and one
    e^{A(t - tau)} e J term per jump in the interval.  No discretization
    error; jumps take effect at their exact times.
    """
    if check_stability:
        model.assert_stable()
    events, jumps, t0 = _combined_events(model, path, burn_in_periods, spec, seed)
    ts = _checked_sample_times(sample_times, t0, path.horizon)
    prop = _Propagator(model)
    X = np.zeros(model.p)
    states = np.empty((ts.size, model.p))
    prev = t0
    lo = 0
    for i, t in enumerate(ts):
        dt = t - prev
        if dt > 0:
            X = prop.state_matrix(dt) @ X
            if path.gamma != 0.0:
                X = X + path.gamma * prop.drift_response(dt)
        hi = int(np.searchsorted(events, t, side="right"))
        if hi > lo:
            resp = prop.jump_responses(t - events[lo:hi])
            X = X + resp.T @ jumps[lo:hi]
        states[i] = X
        prev = t
        lo = hi
    outputs = states @ model.b
    return StateTrajectory(
        times=ts, states=states, outputs=outputs,
        provenance={"method": "exact", "drift": prop.drift_mode,
                    "burn_in_periods": int(burn_in_periods),
                    "source": path.label})


def simulate_euler(model: CarmaModel, path: SubordinatorPath, h: float,
                   sample_times, burn_in_periods: int = 0,
                   spec: SubordinatorSpec | None = None, seed=0,
                   check_stability: bool = True) -> StateTrajectory:
    """First-order Euler trajectory on a fixed grid of step h.

    X_{k+1} = X_k + A X_k h + e * dS_k with dS_k the driving increment over
    (t_k, t_{k+1}]; jumps land at the end of their containing step, which is
    the order-1 error source.  Sample times must sit on the grid.
    """
    if check_stability:
        model.assert_stable()
    h = float(h)
    if not np.isfinite(h) or h <= 0:
        raise ValidationError("h must be positive")
    events, jumps, t0 = _combined_events(model, path, burn_in_periods, spec, seed)
    ts = _checked_sample_times(sample_times, t0, path.horizon)
    n_steps = int(math.ceil((path.horizon - t0) / h - 1e-9))
    grid = t0 + h * np.arange(n_steps + 1)
    sample_idx = np.rint((ts - t0) / h).astype(int)
    if np.any(sample_idx < 1) or np.any(sample_idx > n_steps) \
            or np.any(np.abs(t0 + sample_idx * h - ts) > 1e-9 * np.maximum(1.0, np.abs(ts))):
        raise ValidationError("sample_times must lie on the Euler grid")
    step_matrix = np.eye(model.p) + model.A * h
    if np.max(np.abs(np.linalg.eigvals(step_matrix))) >= 1.0:
        warnings.warn(f"Euler step h={h} amplifies the flow; shrink h",
                      EulerStabilityWarning, stacklevel=2)
    dS = np.zeros(n_steps)
    if events.size:
        # jump at tau in (grid[k], grid[k+1]] lands in step k
        bins = np.searchsorted(grid, events, side="left") - 1
        np.add.at(dS, np.clip(bins, 0, n_steps - 1), jumps)
    dS += path.gamma * h
    want = np.zeros(n_steps + 1, dtype=bool)
    want[sample_idx] = True
    X = np.zeros(model.p)
    states = np.empty((ts.size, model.p))
    out_i = 0
    for k in range(n_steps):
        X = step_matrix @ X
        X[-1] += dS[k]
        if want[k + 1]:
            states[out_i] = X
            out_i += 1
    outputs = states @ model.b
    return StateTrajectory(
        times=ts, states=states, outputs=outputs,
        provenance={"method": "euler", "h": h,
                    "burn_in_periods": int(burn_in_periods),
                    "source": path.label})


# ---------------------------------------------------------------------------
# ensembles


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """States and outputs of many independent paths on a shared time grid."""

    times: np.ndarray
    states: np.ndarray   # (n_paths, n_times, p)
    outputs: np.ndarray  # (n_paths, n_times)


def _env_threads() -> int:
    raw = os.environ.get("SLCARMA_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _ensemble_chunk(model, spec, ts, burn_in_periods, child_seeds):
    part_T = spec.partition.period
    t0 = -burn_in_periods * part_T
    total = spec.with_horizon(burn_in_periods + spec.horizon_periods)
    n = len(child_seeds)
    ev_t, ev_j, ev_pid = [], [], []
    for j, child in enumerate(child_seeds):
        pth = simulate_subordinator(total, child)
        ev_t.append(pth.event_times + t0)
        ev_j.append(pth.jump_sizes)
        ev_pid.append(np.full(pth.n_events, j, dtype=np.int64))
    tau = np.concatenate(ev_t) if ev_t else np.empty(0)
    J = np.concatenate(ev_j) if ev_j else np.empty(0)
    pid = np.concatenate(ev_pid) if ev_pid else np.empty(0, dtype=np.int64)
    order = np.argsort(tau, kind="stable")
    tau, J, pid = tau[order], J[order], pid[order]
    prop = _Propagator(model)
    p = model.p
    X = np.zeros((n, p))
    states = np.empty((n, ts.size, p))
    prev = t0
    lo = 0
    block = 500_000  # caps the (events, p) scratch array
    for i, t in enumerate(ts):
        dt = t - prev
        if dt > 0:
            X = X @ prop.state_matrix(dt).T
            if spec.gamma != 0.0:
                X = X + spec.gamma * prop.drift_response(dt)
        hi = int(np.searchsorted(tau, t, side="right"))
        for a in range(lo, hi, block):
            bnd = min(a + block, hi)
            resp = prop.jump_responses(t - tau[a:bnd]) * J[a:bnd, None]
            for c in range(p):
                X[:, c] += np.bincount(pid[a:bnd], weights=resp[:, c], minlength=n)
        states[:, i, :] = X
        prev = t
        lo = hi
    return states


def simulate_ensemble(model: CarmaModel, spec: SubordinatorSpec, sample_times,
                      n_paths: int, burn_in_periods: int = 0, seed=0,
                      threads: int | None = None) -> EnsembleResult:
    """Exact simulation of many independent paths on one sample grid.

    Each path gets a child substream of `seed`, so results are reproducible
    and independent of chunking or thread count.  `threads` defaults to the
    SLCARMA_THREADS environment variable (1 when unset).
    """
    model.assert_stable()
    if n_paths <= 0 or int(n_paths) != n_paths:
        raise ValidationError("n_paths must be a positive integer")
    if burn_in_periods < 0 or int(burn_in_periods) != burn_in_periods:
        raise ValidationError("burn_in_periods must be a nonnegative integer")
    t0 = -burn_in_periods * spec.partition.period
    ts = _checked_sample_times(sample_times, t0, spec.horizon)
    children = np.random.SeedSequence(seed).spawn(int(n_paths))
    threads = _env_threads() if threads is None else max(1, int(threads))
    chunk = max(64, math.ceil(n_paths / max(threads, 1) / 4))
    spans = [(a, min(a + chunk, n_paths)) for a in range(0, n_paths, chunk)]
    args = [(model, spec, ts, int(burn_in_periods), children[a:b]) for a, b in spans]
    if threads == 1 or len(spans) == 1:
        parts = [_ensemble_chunk(*arg) for arg in args]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda arg: _ensemble_chunk(*arg), args))
    states = np.concatenate(parts, axis=0)
    outputs = states @ model.b
    return EnsembleResult(times=ts, states=states, outputs=outputs)
