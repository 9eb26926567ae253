"""Sequential decoding with the Fano algorithm, one- and two-sided.

The per-bit metric is the bias-adjusted log likelihood for a BSC:
log2(2(1-p)) - R on a match and log2(2p) - R on a mismatch.  Decoders run
on fixed-point metrics with 8 fractional bits; the threshold step delta
lives on the unscaled metric axis and is quantised the same way, so the
default delta = 2 becomes 512 metric ticks.

A decode takes one iteration of the search loop per clock cycle, and each
iteration moves forward one branch, back one branch, or stays put while the
threshold loosens.  ``cycles`` in the outcome counts those iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .codec import (
    MIN_CROSSOVER,
    ChannelCondition,
    CodeSpec,
    branch_tables,
    pack_branch_symbols,
)
from .errors import InputShapeError

# Fixed-point scale: 8 fractional bits.
METRIC_SCALE = 256

DECODED = "decoded"
FRAME_ERROR = "frame_error"
CYCLE_CAP_HIT = "cycle_cap_hit"

# Default decode budget as a multiple of the frame length.
DEFAULT_CYCLE_CAP_FACTOR = 2000


@dataclass(frozen=True)
class FanoConfig:
    """Decoder tuning: per-bit metrics, threshold step, and cycle budget."""

    metric_match: float
    metric_mismatch: float
    delta: float = 2.0
    max_cycles: int = DEFAULT_CYCLE_CAP_FACTOR * 206

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not (self.metric_match > 0 > self.metric_mismatch):
            raise ValueError("metrics must satisfy match > 0 > mismatch")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be positive")

    @classmethod
    def for_channel(
        cls,
        condition: ChannelCondition,
        spec: CodeSpec,
        delta: float = 2.0,
        max_cycles: Optional[int] = None,
    ) -> "FanoConfig":
        """Metrics from the channel crossover and code rate.

        The crossover is floored at MIN_CROSSOVER so a noiseless channel
        still produces a finite (very negative) mismatch metric.
        """
        p = max(condition.crossover_p, MIN_CROSSOVER)
        r = spec.rate
        return cls(
            metric_match=math.log2(2.0 * (1.0 - p)) - r,
            metric_mismatch=math.log2(2.0 * p) - r,
            delta=delta,
            max_cycles=(
                max_cycles
                if max_cycles is not None
                else DEFAULT_CYCLE_CAP_FACTOR * spec.frame_length
            ),
        )

    @property
    def match_fp(self) -> int:
        return round(self.metric_match * METRIC_SCALE)

    @property
    def mismatch_fp(self) -> int:
        return round(self.metric_mismatch * METRIC_SCALE)

    @property
    def delta_fp(self) -> int:
        return round(self.delta * METRIC_SCALE)


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of one frame decode.

    decoded_bits holds the info bits and is present unless the cycle cap was
    hit.  status is one of DECODED, FRAME_ERROR, CYCLE_CAP_HIT; the decoder
    itself never reports FRAME_ERROR (it cannot know the transmitted bits),
    a measurement harness rewrites the status after comparing.
    """

    decoded_bits: Optional[np.ndarray]
    cycles: int
    status: str

    def __post_init__(self) -> None:
        if self.status not in (DECODED, FRAME_ERROR, CYCLE_CAP_HIT):
            raise ValueError(f"unknown status {self.status!r}")
        has_bits = self.decoded_bits is not None
        if has_bits != (self.status in (DECODED, FRAME_ERROR)):
            raise ValueError("decoded_bits must be present iff the frame was decoded")


def fano_metric(
    received_branch: Sequence[int] | np.ndarray,
    hypothesized_branch: Sequence[int] | np.ndarray,
    config: FanoConfig,
) -> float:
    """Branch metric: sum of per-bit match/mismatch terms.

    Returned on the unscaled axis but quantised exactly as the decoders
    compute it (fixed point over METRIC_SCALE).
    """
    rx = np.asarray(received_branch)
    hyp = np.asarray(hypothesized_branch)
    if rx.shape != hyp.shape or rx.ndim != 1:
        raise InputShapeError("branch symbols must be equal-length bit vectors")
    mismatches = int(np.count_nonzero(rx != hyp))
    matches = rx.shape[0] - mismatches
    return (matches * config.match_fp + mismatches * config.mismatch_fp) / METRIC_SCALE


@lru_cache(maxsize=32)
def _metric_tables(spec: CodeSpec, match_fp: int, mismatch_fp: int):
    """Distance-indexed branch metrics and a popcount table for n-bit symbols."""
    n = spec.rate_den
    dist_metric = np.array(
        [(n - h) * match_fp + h * mismatch_fp for h in range(n + 1)], dtype=np.int64
    )
    pc = np.array([bin(x).count("1") for x in range(1 << n)], dtype=np.uint8)
    return dist_metric, pc


def _check_received(received, spec: CodeSpec) -> np.ndarray:
    rx = np.asarray(received, dtype=np.uint8)
    if rx.ndim != 1 or rx.shape[0] != spec.n_coded_bits:
        raise InputShapeError(
            f"received stream must hold {spec.n_coded_bits} hard bits, "
            f"got shape {rx.shape}"
        )
    return rx


def _outcome(cycles: int, status_code: int, chosen: np.ndarray, spec: CodeSpec) -> DecodeOutcome:
    if status_code == 2:
        raise AssertionError(
            "path metric dropped below threshold; decoder invariant broken"
        )
    if status_code == 1:
        return DecodeOutcome(decoded_bits=None, cycles=cycles, status=CYCLE_CAP_HIT)
    bits = chosen[: spec.info_length].copy()
    return DecodeOutcome(decoded_bits=bits, cycles=cycles, status=DECODED)


def decode_ufa(
    received: Sequence[int] | np.ndarray,
    spec: CodeSpec,
    config: FanoConfig,
    audit: bool = False,
) -> DecodeOutcome:
    """Decode one frame with the unidirectional Fano search.

    With ``audit`` the loop also asserts, every iteration, that the current
    path metric sits at or above the threshold.
    """
    rx = _check_received(received, spec)
    syms = pack_branch_symbols(rx, spec)
    branch_out, next_state = branch_tables(spec)
    dist_metric, pc = _metric_tables(spec, config.match_fp, config.mismatch_fp)
    cycles, code, chosen = _kernels.run_ufa(
        syms, branch_out, next_state, dist_metric, pc,
        spec.info_length, config.delta_fp, config.max_cycles, audit,
    )
    return _outcome(cycles, code, chosen, spec)


def decode_bfa(
    received: Sequence[int] | np.ndarray,
    spec: CodeSpec,
    config: FanoConfig,
    audit: bool = False,
) -> DecodeOutcome:
    """Decode one frame with forward and backward Fano searches in lockstep.

    Cycles count parallel iterations: both machines advance once per cycle,
    so a clean frame finishes in ceil(frame_length / 2) cycles.  A merge that
    stitches two locally plausible but wrong half-paths shows up downstream
    as a frame error, never as a decoder failure.
    """
    rx = _check_received(received, spec)
    syms = pack_branch_symbols(rx, spec)
    syms_rev = syms[::-1].copy()
    bo_f, ns_f = branch_tables(spec)
    bo_b, ns_b = branch_tables(spec, reverse=True)
    dist_metric, pc = _metric_tables(spec, config.match_fp, config.mismatch_fp)
    cycles, code, chosen = _kernels.run_bfa(
        syms, syms_rev, bo_f, ns_f, bo_b, ns_b, dist_metric, pc,
        spec.info_length, spec.constraint_length,
        config.delta_fp, config.max_cycles, audit,
    )
    return _outcome(cycles, code, chosen, spec)


def min_cycles(decoder_kind: str, spec: CodeSpec) -> int:
    """Fastest possible decode: the whole frame, or half of it when split."""
    if decoder_kind == "ufa":
        return spec.frame_length
    if decoder_kind == "bfa":
        return (spec.frame_length + 1) // 2
    raise ValueError(f"unknown decoder kind {decoder_kind!r}")
