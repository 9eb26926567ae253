"""Decoding-time measurement campaigns and Pareto tail fitting.

A campaign runs n independent frames through encode -> BSC -> decode and
histograms the per-frame decode duration in clock cycles.  Frames whose
decoded bits mismatch the transmitted reference are counted as frame errors
but their durations stay in the histogram; cycle-cap hits are kept too (at
the cap value) and reported in their own bucket.

Randomness is split per block of BLOCK_FRAMES codewords: block b of a
campaign seeded s draws from ``default_rng(SeedSequence((s, b)))``, first
the block's info bits and then its channel noise, and frame i lives at row
i % BLOCK_FRAMES of block i // BLOCK_FRAMES.  Any sharding of the frame
range therefore reproduces exactly the frames of one long run, and shards
merge into the same distribution.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from . import _kernels
from .codec import ChannelCondition, CodeSpec, branch_tables
from .errors import InsufficientTailError, SchemaError
from .fano import FanoConfig, _metric_tables, min_cycles

TS_SCHEMA = "ts-dist/1"

# Frames per random-stream block; part of the campaign seeding contract.
BLOCK_FRAMES = 4096

# The tail fit ignores CCDF points supported by fewer than this many samples.
MIN_TAIL_SUPPORT = 20
# And refuses to run at all when the window holds fewer samples than this.
MIN_TAIL_SAMPLES = 100


@dataclass
class TsDistribution:
    """Empirical decoding-time distribution for one (decoder, channel) pair."""

    counts: Dict[int, int]
    samples: int
    condition: ChannelCondition
    decoder_kind: str
    frame_errors: int
    cap_hits: int
    frame_length: int
    t_min: int

    def __post_init__(self) -> None:
        if self.decoder_kind not in ("ufa", "bfa"):
            raise ValueError(f"unknown decoder kind {self.decoder_kind!r}")
        if self.samples != sum(self.counts.values()):
            raise ValueError("samples must equal the sum of counts")
        if self.samples > 0 and min(self.counts) < self.t_min:
            raise ValueError(
                f"observed {min(self.counts)} cycles, below the decoder floor {self.t_min}"
            )
        if any(c <= 0 for c in self.counts.values()):
            raise ValueError("counts must be positive")
        if not 0 <= self.frame_errors <= self.samples:
            raise ValueError("frame_errors out of range")
        if not 0 <= self.cap_hits <= self.samples:
            raise ValueError("cap_hits out of range")

    @property
    def pmf(self) -> Dict[int, float]:
        return {t: c / self.samples for t, c in self.counts.items()}

    @property
    def frame_error_rate(self) -> float:
        return self.frame_errors / self.samples if self.samples else 0.0

    def ccdf(self) -> Tuple[np.ndarray, np.ndarray]:
        """(sorted cycle values, P(T_s > value)) as parallel arrays."""
        ts = np.array(sorted(self.counts), dtype=np.int64)
        cnt = np.array([self.counts[t] for t in ts], dtype=np.int64)
        above = self.samples - np.cumsum(cnt)
        return ts, above / self.samples

    def mean_cycles(self) -> float:
        return sum(t * c for t, c in self.counts.items()) / self.samples


def merge_distributions(a: TsDistribution, b: TsDistribution) -> TsDistribution:
    """Pool two campaigns of the same (decoder, channel) configuration."""
    if a.decoder_kind != b.decoder_kind:
        raise ValueError("cannot merge different decoder kinds")
    if a.frame_length != b.frame_length or a.t_min != b.t_min:
        raise ValueError("cannot merge different frame geometries")
    if a.condition != b.condition:
        raise ValueError("cannot merge different channel conditions")
    counts = dict(a.counts)
    for t, c in b.counts.items():
        counts[t] = counts.get(t, 0) + c
    return TsDistribution(
        counts=counts,
        samples=a.samples + b.samples,
        condition=a.condition,
        decoder_kind=a.decoder_kind,
        frame_errors=a.frame_errors + b.frame_errors,
        cap_hits=a.cap_hits + b.cap_hits,
        frame_length=a.frame_length,
        t_min=a.t_min,
    )


def _encode_block(info: np.ndarray, spec: CodeSpec) -> np.ndarray:
    """Vectorised zero-terminated encoding of a block of frames.

    Returns packed branch symbols, shape (frames, frame_length).  Matches
    encode() + pack_branch_symbols() bit for bit; the equivalence is pinned
    by tests.
    """
    m = info.shape[0]
    k = spec.constraint_length
    lf = spec.frame_length
    frames = np.zeros((m, lf), dtype=np.uint8)
    frames[:, : spec.info_length] = info
    syms = np.zeros((m, lf), dtype=np.uint8)
    for c, g in enumerate(spec.generators):
        stream = np.zeros((m, lf), dtype=np.uint8)
        for j in range(k):
            if (g >> j) & 1:
                if j == 0:
                    stream ^= frames
                else:
                    stream[:, j:] ^= frames[:, :-j]
        syms |= stream << (spec.rate_den - 1 - c)
    return syms


def _corrupt_block(
    syms: np.ndarray, uniforms: np.ndarray, p: float, spec: CodeSpec
) -> np.ndarray:
    """Apply BSC flips drawn as (frames, coded bits) uniforms to packed symbols."""
    if p == 0.0:
        return syms
    n = spec.rate_den
    flips = (uniforms < p).astype(np.uint8)
    flip_syms = np.zeros_like(syms)
    for c in range(n):
        flip_syms |= flips[:, c::n] << (n - 1 - c)
    return syms ^ flip_syms


def run_campaign(
    decoder_kind: str,
    spec: CodeSpec,
    condition: ChannelCondition,
    config: FanoConfig,
    n_frames: int,
    seed: int,
    frame_offset: int = 0,
) -> TsDistribution:
    """Measure the decoding-time distribution over n_frames random frames.

    ``frame_offset`` shifts the frame indices so that shards [0, a) and
    [a, n) of the same seed reproduce exactly the frames of one long run;
    merging shard results equals the single-run distribution.
    """
    if decoder_kind not in ("ufa", "bfa"):
        raise ValueError(f"unknown decoder kind {decoder_kind!r}")
    if n_frames < 1:
        raise ValueError("n_frames must be positive")
    bo_f, ns_f = branch_tables(spec)
    bo_b, ns_b = branch_tables(spec, reverse=True)
    dist_metric, pc = _metric_tables(spec, config.match_fp, config.mismatch_fp)
    n_info = spec.info_length
    k = spec.constraint_length
    delta_fp = config.delta_fp
    cap = config.max_cycles
    p = condition.crossover_p
    counts_arr = np.zeros(cap + 1, dtype=np.int64)
    frame_errors = 0
    cap_hits = 0
    lo, hi = frame_offset, frame_offset + n_frames
    for block in range(lo // BLOCK_FRAMES, (hi - 1) // BLOCK_FRAMES + 1):
        rng = np.random.default_rng(np.random.SeedSequence((seed, block)))
        info_block = rng.integers(0, 2, size=(BLOCK_FRAMES, n_info), dtype=np.uint8)
        uni_block = rng.random(size=(BLOCK_FRAMES, spec.n_coded_bits))
        rows = range(
            max(lo, block * BLOCK_FRAMES) - block * BLOCK_FRAMES,
            min(hi, (block + 1) * BLOCK_FRAMES) - block * BLOCK_FRAMES,
        )
        sym_block = _corrupt_block(
            _encode_block(info_block, spec), uni_block, p, spec
        )
        for row in rows:
            syms = sym_block[row]
            if decoder_kind == "ufa":
                cycles, code, chosen = _kernels.run_ufa(
                    syms, bo_f, ns_f, dist_metric, pc, n_info, delta_fp, cap, False
                )
            else:
                cycles, code, chosen = _kernels.run_bfa(
                    syms, syms[::-1].copy(), bo_f, ns_f, bo_b, ns_b,
                    dist_metric, pc, n_info, k, delta_fp, cap, False,
                )
            counts_arr[cycles] += 1
            if code == 1:
                cap_hits += 1
            elif not np.array_equal(chosen[:n_info], info_block[row]):
                frame_errors += 1
    observed = np.nonzero(counts_arr)[0]
    counts = {int(t): int(counts_arr[t]) for t in observed}
    return TsDistribution(
        counts=counts,
        samples=n_frames,
        condition=condition,
        decoder_kind=decoder_kind,
        frame_errors=frame_errors,
        cap_hits=cap_hits,
        frame_length=spec.frame_length,
        t_min=min_cycles(decoder_kind, spec),
    )


@dataclass(frozen=True)
class ParetoFit:
    """Straight-line fit of the decoding-time CCDF on log-log axes.

    Models P(T_s > T) ~ amplitude * (T / T_min)^-exponent over the window;
    residual is the RMS misfit of the decimal-log CCDF inside the window.
    """

    amplitude: float
    exponent: float
    fit_window: Tuple[int, int]
    residual: float
    n_points: int = field(default=0)

    def __post_init__(self) -> None:
        if not self.exponent > 0:
            raise ValueError("exponent must be positive")
        if self.fit_window[0] > self.fit_window[1]:
            raise ValueError("fit window is inverted")

    def ccdf_model(self, t: np.ndarray, t_min: int) -> np.ndarray:
        return self.amplitude * (np.asarray(t, dtype=float) / t_min) ** (-self.exponent)


def fit_pareto(dist: TsDistribution) -> ParetoFit:
    """Fit the Pareto tail over [2*T_min, the last point with solid support].

    The upper edge is the largest duration whose CCDF still rests on at
    least MIN_TAIL_SUPPORT samples; beyond that the empirical CCDF is too
    grainy to constrain a slope.
    """
    t_min = dist.t_min
    t_lo = 2 * t_min
    tail_samples = sum(c for t, c in dist.counts.items() if t > t_lo)
    if tail_samples < MIN_TAIL_SAMPLES:
        raise InsufficientTailError(
            f"only {tail_samples} samples beyond {t_lo} cycles; need {MIN_TAIL_SAMPLES}"
        )
    ts, ccdf = dist.ccdf()
    floor = MIN_TAIL_SUPPORT / dist.samples
    eligible = ccdf >= floor
    in_window = (ts >= t_lo) & eligible
    if not np.any(in_window):
        raise InsufficientTailError("no CCDF points inside the fit window")
    t_hi = int(ts[in_window][-1])
    sel = (ts >= t_lo) & (ts <= t_hi)
    x = np.log10(ts[sel] / t_min)
    y = np.log10(ccdf[sel])
    if x.shape[0] < 2:
        raise InsufficientTailError("fewer than two distinct durations in the window")
    slope, intercept = np.polyfit(x, y, 1)
    if not -slope > 0:
        raise InsufficientTailError("tail does not decay; no Pareto exponent")
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return ParetoFit(
        amplitude=float(10.0 ** intercept),
        exponent=float(-slope),
        fit_window=(t_lo, t_hi),
        residual=resid,
        n_points=int(x.shape[0]),
    )


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def save_distribution(
    dist: TsDistribution, csv_path: str | Path, extra: Optional[dict] = None
) -> None:
    """Write the (cycles, count) table plus a JSON sidecar next to it.

    The sidecar carries everything the CSV cannot: schema tag, channel
    condition, decoder kind, totals.  ``extra`` entries are merged in as
    provenance (for example the manifest filename).
    """
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycles", "count"])
        for t in sorted(dist.counts):
            writer.writerow([t, dist.counts[t]])
    sidecar = {
        "schema": TS_SCHEMA,
        "decoder_kind": dist.decoder_kind,
        "samples": dist.samples,
        "frame_errors": dist.frame_errors,
        "frame_error_rate": dist.frame_error_rate,
        "cap_hits": dist.cap_hits,
        "frame_length": dist.frame_length,
        "t_min": dist.t_min,
        "condition": dist.condition.to_json_dict(),
    }
    if extra:
        sidecar.update(extra)
    with open(_sidecar_path(csv_path), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_distribution(csv_path: str | Path) -> TsDistribution:
    """Read a distribution written by save_distribution, checking the schema."""
    csv_path = Path(csv_path)
    side = _sidecar_path(csv_path)
    if not side.exists():
        raise SchemaError(f"missing sidecar {side}")
    with open(side) as fh:
        meta = json.load(fh)
    if meta.get("schema") != TS_SCHEMA:
        raise SchemaError(
            f"expected schema {TS_SCHEMA}, found {meta.get('schema')!r} in {side}"
        )
    counts: Dict[int, int] = {}
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["cycles", "count"]:
            raise SchemaError(f"unexpected CSV header {header!r} in {csv_path}")
        for row in reader:
            counts[int(row[0])] = int(row[1])
    return TsDistribution(
        counts=counts,
        samples=int(meta["samples"]),
        condition=ChannelCondition.from_json_dict(meta["condition"]),
        decoder_kind=meta["decoder_kind"],
        frame_errors=int(meta["frame_errors"]),
        cap_hits=int(meta["cap_hits"]),
        frame_length=int(meta["frame_length"]),
        t_min=int(meta["t_min"]),
    )
