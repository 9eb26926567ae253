"""Finite-buffer queueing model of a sequential decoder, as a Markov chain.

Branches arrive at a fixed line rate while the decoder consumes one codeword
(frame_length branches) per decode.  Observed at decode completions, the
buffer occupancy (in branches) is a Markov chain on Omega = B * frame_length
states: state index i (0-based) means i branches are waiting.  Each decode
moves the occupancy by

    delta = nearest_int(T_s / mu - frame_length)

with mu the speed factor (decoder clock cycles per arriving branch) and
nearest_int rounding half away from zero.  Negative excursions pin at the
empty state; a move past the top state is a buffer overflow, which erases
the codeword in service and leaves the chain in the saturated top state.

The steady state is found by power iteration from the empty-buffer start
vector.  For large chains the multiply never materialises the transition
matrix: one step is a convolution of the occupancy vector with the delta
PMF plus two boundary absorptions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from .errors import DimensionError, NonConvergenceError, UnattainableError
from .montecarlo import TsDistribution

# Dense transition matrices are refused above this many states unless the
# caller raises the limit; 20,600 states is already a 3.4 GB allocation.
DEFAULT_MAX_STATES = 20_600

PF_SCHEMA = "pf-curve/1"
RD_SCHEMA = "rd-curve/1"

_FFT_THRESHOLD = 4_000_000  # direct-convolve work limit before switching to FFT


def round_half_away(x: float) -> int:
    """Nearest integer, with .5 rounded away from zero.

    Comparing the exact fractional part against 0.5 avoids the classic
    floor(x + 0.5) carry on values one ulp below a half.
    """
    a = abs(x)
    f = math.floor(a)
    if a - f >= 0.5:
        f += 1
    return int(math.copysign(f, x))


def _round_half_away_array(x: np.ndarray) -> np.ndarray:
    a = np.abs(x)
    f = np.floor(a)
    f = np.where(a - f >= 0.5, f + 1.0, f)
    return (np.sign(x) * f).astype(np.int64)


@dataclass(frozen=True)
class QueueSpec:
    """Buffer size, frame geometry, decoder speed, and the clock."""

    buffer_codewords: int
    frame_length: int
    speed_factor: float
    clock_hz: float = 1e9

    def __post_init__(self) -> None:
        if self.buffer_codewords < 1:
            raise ValueError("buffer_codewords must be at least 1")
        if self.frame_length < 2:
            raise ValueError("frame_length must be at least 2")
        if not self.speed_factor > 0:
            raise ValueError("speed_factor must be positive")
        if not self.clock_hz > 0:
            raise ValueError("clock_hz must be positive")

    @property
    def states(self) -> int:
        return self.buffer_codewords * self.frame_length

    @property
    def data_rate(self) -> float:
        """Line rate (branches per second) implied by clock and speed factor."""
        return self.clock_hz / self.speed_factor

    def to_json_dict(self) -> dict:
        return {
            "buffer_codewords": self.buffer_codewords,
            "frame_length": self.frame_length,
            "speed_factor": self.speed_factor,
            "clock_hz": self.clock_hz,
        }


@dataclass
class DeltaPmf:
    """Integer-valued PMF of per-decode occupancy increments."""

    pmf: Dict[int, float]
    values: np.ndarray = field(init=False, repr=False)
    probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not self.pmf:
            raise ValueError("delta PMF is empty")
        items = sorted(self.pmf.items())
        self.values = np.array([k for k, _ in items], dtype=np.int64)
        self.probs = np.array([p for _, p in items], dtype=np.float64)
        if np.any(self.probs <= 0):
            raise ValueError("delta PMF probabilities must be positive")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError("delta PMF must sum to 1")

    @property
    def delta_min(self) -> int:
        return int(self.values[0])

    @property
    def delta_max(self) -> int:
        return int(self.values[-1])

    def survival(self, w: int) -> float:
        """P(delta > w)."""
        idx = np.searchsorted(self.values, w, side="right")
        return float(self.probs[idx:].sum())

    def survival_array(self, ws: np.ndarray) -> np.ndarray:
        """P(delta > w) for each w, vectorised."""
        suffix = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])
        idx = np.searchsorted(self.values, ws, side="right")
        return suffix[idx]


def delta_pmf(dist: TsDistribution, queue: QueueSpec) -> DeltaPmf:
    """Map a decoding-time distribution to occupancy increments."""
    if queue.frame_length != dist.frame_length:
        raise ValueError(
            f"queue frame_length {queue.frame_length} does not match "
            f"distribution frame_length {dist.frame_length}"
        )
    ts = np.array(sorted(dist.counts), dtype=np.float64)
    probs = np.array([dist.counts[int(t)] for t in ts], dtype=np.float64) / dist.samples
    deltas = _round_half_away_array(ts / queue.speed_factor - queue.frame_length)
    out: Dict[int, float] = {}
    for d, p in zip(deltas.tolist(), probs.tolist()):
        out[d] = out.get(d, 0.0) + p
    return DeltaPmf(pmf=out)


def build_transition(
    delta: DeltaPmf, queue: QueueSpec, max_states: int = DEFAULT_MAX_STATES
) -> np.ndarray:
    """Dense one-step transition matrix with floor and ceiling absorption.

    Row i sends mass p(w) to state i + w; everything at or below the empty
    state piles into column 0 and the top column is set to the exact
    complement of the rest of its row.
    """
    omega = queue.states
    if omega > max_states:
        raise DimensionError(
            f"chain has {omega} states, above the dense-matrix limit {max_states}"
        )
    P = np.zeros((omega, omega), dtype=np.float64)
    rows = np.arange(omega)
    for w, p in zip(delta.values.tolist(), delta.probs.tolist()):
        cols = np.clip(rows + w, 0, omega - 1)
        P[rows, cols] += p
    P[:, omega - 1] = np.maximum(1.0 - P[:, : omega - 1].sum(axis=1), 0.0)
    return P


def _folded_delta_array(delta: DeltaPmf, omega: int) -> Tuple[np.ndarray, int]:
    """Dense delta PMF over [delta_min, omega-1], far tail folded into the top.

    Folding is exact for the chain: any jump of omega-1 or more lands in the
    saturated state from every start, so where the mass sits past that point
    cannot matter.
    """
    a = min(delta.delta_min, omega - 1)
    b = min(delta.delta_max, omega - 1)
    q = np.zeros(b - a + 1, dtype=np.float64)
    for w, p in zip(delta.values.tolist(), delta.probs.tolist()):
        q[min(w, b) - a] += p
    return q, a


def _chain_step(pi: np.ndarray, q: np.ndarray, a: int, omega: int) -> np.ndarray:
    """One multiply by the (never materialised) transition matrix."""
    if pi.shape[0] * q.shape[0] <= _FFT_THRESHOLD:
        c = np.convolve(pi, q)
    else:
        c = fftconvolve(pi, q)
        np.clip(c, 0.0, None, out=c)
    # c[m] is mass headed for state a + m.
    new = np.zeros(omega, dtype=np.float64)
    m_floor = min(max(1 - a, 0), c.shape[0])          # first m with state >= 1
    m_ceil = min(max((omega - 1) - a, 0), c.shape[0])  # first m with state >= omega-1
    new[0] = c[:m_floor].sum()
    new[omega - 1] = c[m_ceil:].sum()
    if m_ceil > m_floor:
        new[a + m_floor : a + m_ceil] = c[m_floor:m_ceil]
    s = new.sum()
    if s > 0:
        new /= s
    return new


def _iterate_to_fixpoint(step, omega: int, tol: float, max_iter: int) -> np.ndarray:
    pi = np.zeros(omega, dtype=np.float64)
    pi[0] = 1.0  # empty buffer at time zero
    resid = math.inf
    for _ in range(max_iter):
        nxt = step(pi)
        resid = float(np.max(np.abs(nxt - pi)))
        pi = nxt
        if resid < tol:
            return pi
    raise NonConvergenceError(
        f"power iteration still at residual {resid:.3e} after {max_iter} steps; "
        f"the chain may be periodic or reducible"
    )


def steady_state(
    transition: np.ndarray, tol: float = 1e-12, max_iter: int = 200_000
) -> np.ndarray:
    """Stationary distribution by power iteration from the empty state."""
    P = np.asarray(transition, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DimensionError(f"transition matrix must be square, got {P.shape}")

    def step(pi: np.ndarray) -> np.ndarray:
        nxt = pi @ P
        s = nxt.sum()
        return nxt / s if s > 0 else nxt

    return _iterate_to_fixpoint(step, P.shape[0], tol, max_iter)


def steady_state_from_delta(
    delta: DeltaPmf,
    queue: QueueSpec,
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> np.ndarray:
    """Stationary distribution without building the matrix.

    Identical semantics to steady_state(build_transition(...)), but each
    step costs O(states * support) or an FFT instead of O(states^2), so it
    scales to the buffer sizes the speed-factor search needs.
    """
    omega = queue.states
    q, a = _folded_delta_array(delta, omega)
    return _iterate_to_fixpoint(
        lambda pi: _chain_step(pi, q, a, omega), omega, tol, max_iter
    )


def failure_probability(steady: np.ndarray, delta: DeltaPmf) -> float:
    """Per-codeword erasure probability: chance the next jump clears the top."""
    omega = steady.shape[0]
    thresholds = (omega - 1) - np.arange(omega)
    return float(np.dot(steady, delta.survival_array(thresholds)))


@dataclass(frozen=True)
class OccupancyStats:
    """Steady-state occupancy folded into per-codeword buffer slots."""

    bucket_pmf: np.ndarray
    mean_pct: float


def occupancy_stats(steady: np.ndarray, queue: QueueSpec) -> OccupancyStats:
    """Aggregate the state vector into B slot-occupancy buckets.

    Bucket i (1-based) collects the frame_length states whose occupancy
    rounds up to i codewords; the mean occupancy is the bucket-index average
    as a percentage of the buffer.
    """
    if steady.shape[0] != queue.states:
        raise DimensionError(
            f"state vector has {steady.shape[0]} entries, queue expects {queue.states}"
        )
    buckets = steady.reshape(queue.buffer_codewords, queue.frame_length).sum(axis=1)
    idx = np.arange(1, queue.buffer_codewords + 1)
    mean_pct = float(np.dot(idx, buckets) / queue.buffer_codewords * 100.0)
    return OccupancyStats(bucket_pmf=buckets, mean_pct=mean_pct)


@dataclass
class DtmcModel:
    """A solved chain: inputs, optional dense matrix, and derived figures."""

    queue: QueueSpec
    delta: DeltaPmf
    steady_state: np.ndarray
    failure_probability: float
    occupancy: OccupancyStats
    transition: Optional[np.ndarray] = None

    @property
    def states(self) -> int:
        return self.queue.states

    @classmethod
    def build(
        cls,
        dist: TsDistribution,
        queue: QueueSpec,
        materialize: bool = False,
        tol: float = 1e-12,
        max_iter: int = 200_000,
        max_states: int = DEFAULT_MAX_STATES,
    ) -> "DtmcModel":
        delta = delta_pmf(dist, queue)
        if materialize:
            transition = build_transition(delta, queue, max_states=max_states)
            steady = steady_state(transition, tol=tol, max_iter=max_iter)
        else:
            transition = None
            steady = steady_state_from_delta(delta, queue, tol=tol, max_iter=max_iter)
        return cls(
            queue=queue,
            delta=delta,
            steady_state=steady,
            failure_probability=failure_probability(steady, delta),
            occupancy=occupancy_stats(steady, queue),
            transition=transition,
        )


def _geometric_grid(lo: float, hi: float, resolution: float) -> List[float]:
    if not lo > 0 or not hi >= lo:
        raise ValueError("need 0 < lo <= hi for the speed-factor grid")
    if not resolution > 0:
        raise ValueError("grid resolution must be positive")
    grid = [lo]
    ratio = 1.0 + resolution
    while grid[-1] < hi:
        grid.append(min(grid[-1] * ratio, hi))
    return grid


def solve_speed_factor(
    dist: TsDistribution,
    buffer_codewords: int,
    target_pf: float,
    mu_lo: float = 1.0,
    mu_hi: float = 100.0,
    resolution: float = 0.01,
    clock_hz: float = 1e9,
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> float:
    """Smallest speed factor on a geometric grid meeting the failure target.

    Failure probability is nonincreasing in mu, so a bisection over the grid
    finds the boundary; the coarsest answer is mu_lo, and if even mu_hi
    misses the target the search raises UnattainableError.
    """
    if not 0.0 < target_pf <= 1.0:
        raise ValueError("target_pf must lie in (0, 1]")
    grid = _geometric_grid(mu_lo, mu_hi, resolution)

    def pf_at(mu: float) -> float:
        queue = QueueSpec(
            buffer_codewords=buffer_codewords,
            frame_length=dist.frame_length,
            speed_factor=mu,
            clock_hz=clock_hz,
        )
        delta = delta_pmf(dist, queue)
        steady = steady_state_from_delta(delta, queue, tol=tol, max_iter=max_iter)
        return failure_probability(steady, delta)

    if pf_at(grid[-1]) > target_pf:
        raise UnattainableError(
            f"failure probability stays above {target_pf:g} even at speed factor "
            f"{grid[-1]:g}; enlarge the grid or the buffer"
        )
    lo, hi = 0, len(grid) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if pf_at(grid[mid]) <= target_pf:
            hi = mid
        else:
            lo = mid + 1
    return grid[hi]


def rate_vs_buffer(
    dist: TsDistribution,
    buffer_sizes: Sequence[int],
    target_pf: float,
    clock_hz: float = 1e9,
    **solver_kwargs,
) -> List[Tuple[int, float]]:
    """Supportable line rate (branches/s) for each buffer size."""
    out = []
    for b in buffer_sizes:
        mu = solve_speed_factor(
            dist, b, target_pf, clock_hz=clock_hz, **solver_kwargs
        )
        out.append((int(b), clock_hz / mu))
    return out


def write_pf_curve(
    csv_path: str | Path,
    rows: Sequence[Tuple[float, float, Optional[float]]],
    meta: dict,
) -> None:
    """(mu, P_f) curve as CSV; the simulated column may be empty."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu", "pf_dtmc", "pf_sim"])
        for mu, pf_d, pf_s in rows:
            writer.writerow([mu, pf_d, "" if pf_s is None else pf_s])
    sidecar = {"schema": PF_SCHEMA}
    sidecar.update(meta)
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_rd_curve(
    csv_path: str | Path, rows: Sequence[Tuple[int, float]], meta: dict
) -> None:
    """(buffer size, line rate) curve as CSV, planner-compatible."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["buffer_codewords", "data_rate_bps"])
        for b, rd in rows:
            writer.writerow([b, rd])
    sidecar = {"schema": RD_SCHEMA}
    sidecar.update(meta)
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
