"""Convolutional code, BPSK/AWGN channel collapse, and trellis tables.

Conventions used everywhere in this package:

* A generator polynomial is an integer whose bit j taps the input bit j
  steps in the past; bit 0 (the lowest octal digit's LSB) taps the current
  input bit.  The octal strings "133", "171", "165" therefore mean
  g(D) = 1 + D^2 + D^3 + D^5 + D^6 and so on.
* The encoder state after branch i packs the previous K-1 input bits with
  the most recent bit in the LSB.
* Branch symbols pack the per-generator output bits MSB-first in generator
  order, so a rate-1/3 branch is an integer in [0, 8).

Hard-decision demodulation of BPSK over AWGN is a binary symmetric channel
whose crossover is the Gaussian upper tail at sqrt(2 * R * Eb/N0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InputShapeError

# Floor applied to the crossover probability inside metric computations so a
# noiseless channel (p == 0) still yields a finite mismatch metric.
MIN_CROSSOVER = 1e-12


@dataclass(frozen=True)
class CodeSpec:
    """A zero-terminated rate-1/n convolutional code and its frame geometry."""

    rate_num: int
    rate_den: int
    constraint_length: int
    generators: tuple[int, ...]
    info_length: int
    frame_length: int

    def __post_init__(self) -> None:
        if self.rate_num != 1:
            raise ValueError("only rate 1/n codes are supported")
        if self.rate_den < 2:
            raise ValueError("rate_den must be at least 2")
        if len(self.generators) != self.rate_den:
            raise ValueError(
                f"need {self.rate_den} generators, got {len(self.generators)}"
            )
        k = self.constraint_length
        if k < 2:
            raise ValueError("constraint_length must be at least 2")
        for g in self.generators:
            if not 0 < g < (1 << k):
                raise ValueError(f"generator {g:o} does not fit in {k} bits")
            if not g & 1 or not (g >> (k - 1)) & 1:
                raise ValueError(
                    f"generator {g:o} must tap both the current bit and the "
                    f"oldest state bit"
                )
        if self.info_length < 1:
            raise ValueError("info_length must be positive")
        if self.frame_length != self.info_length + k - 1:
            raise ValueError(
                "frame_length must equal info_length + constraint_length - 1"
            )

    @property
    def rate(self) -> float:
        return self.rate_num / self.rate_den

    @property
    def n_coded_bits(self) -> int:
        return self.rate_den * self.frame_length

    @classmethod
    def default(cls) -> "CodeSpec":
        """The workbench's reference code: R=1/3, K=7, 200 info bits."""
        return cls(
            rate_num=1,
            rate_den=3,
            constraint_length=7,
            generators=(0o133, 0o171, 0o165),
            info_length=200,
            frame_length=206,
        )

    def to_json_dict(self) -> dict:
        return {
            "rate_num": self.rate_num,
            "rate_den": self.rate_den,
            "constraint_length": self.constraint_length,
            "generators": [format(g, "o") for g in self.generators],
            "info_length": self.info_length,
            "frame_length": self.frame_length,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CodeSpec":
        return cls(
            rate_num=int(d["rate_num"]),
            rate_den=int(d["rate_den"]),
            constraint_length=int(d["constraint_length"]),
            generators=tuple(int(g, 8) for g in d["generators"]),
            info_length=int(d["info_length"]),
            frame_length=int(d["frame_length"]),
        )


def bsc_crossover(ebn0_db: float, spec: CodeSpec) -> float:
    """Hard-decision crossover probability for BPSK at the given Eb/N0.

    p = Q(sqrt(2 * R * 10^(ebn0_db / 10))) with Q the standard normal upper
    tail.  Strictly decreasing in ebn0_db.
    """
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    arg = math.sqrt(2.0 * spec.rate * ebn0)
    # Q(x) = erfc(x / sqrt(2)) / 2
    return 0.5 * math.erfc(arg / math.sqrt(2.0))


@dataclass(frozen=True)
class ChannelCondition:
    """One operating point of the binary symmetric channel."""

    ebn0_db: float
    crossover_p: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.crossover_p < 0.5:
            raise ValueError("crossover_p must lie in [0, 0.5)")

    @classmethod
    def from_ebn0(cls, ebn0_db: float, spec: CodeSpec) -> "ChannelCondition":
        return cls(ebn0_db=ebn0_db, crossover_p=bsc_crossover(ebn0_db, spec))

    @classmethod
    def noiseless(cls) -> "ChannelCondition":
        return cls(ebn0_db=math.inf, crossover_p=0.0)

    def to_json_dict(self) -> dict:
        return {"ebn0_db": self.ebn0_db, "crossover_p": self.crossover_p}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChannelCondition":
        return cls(ebn0_db=float(d["ebn0_db"]), crossover_p=float(d["crossover_p"]))


def _as_bits(bits: Sequence[int] | np.ndarray, expect: int, what: str) -> np.ndarray:
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.shape[0] != expect:
        raise InputShapeError(f"{what} must be a flat sequence of {expect} bits, got shape {arr.shape}")
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise InputShapeError(f"{what} must contain only 0/1 values")
    return arr.astype(np.uint8)


def encode(info_bits: Sequence[int] | np.ndarray, spec: CodeSpec) -> np.ndarray:
    """Encode exactly info_length bits, appending K-1 zero tail branches.

    Returns the interleaved coded bit array of length rate_den * frame_length,
    branch-major in generator order.  The encoder starts and (because of the
    tail) ends in the all-zero state.
    """
    u = _as_bits(info_bits, spec.info_length, "info_bits")
    k = spec.constraint_length
    frame = np.zeros(spec.frame_length, dtype=np.uint8)
    frame[: spec.info_length] = u
    out = np.empty(spec.n_coded_bits, dtype=np.uint8)
    for c, g in enumerate(spec.generators):
        taps = np.array([(g >> j) & 1 for j in range(k)], dtype=np.uint8)
        stream = np.convolve(frame, taps)[: spec.frame_length] & 1
        out[c :: spec.rate_den] = stream.astype(np.uint8)
    return out


def transmit(
    coded_bits: Sequence[int] | np.ndarray,
    condition: ChannelCondition,
    seed,
) -> np.ndarray:
    """Pass a coded frame through the BSC, flipping bits independently.

    ``seed`` may be an int, a SeedSequence, or an existing numpy Generator;
    identical seeds give identical flip patterns.
    """
    coded = np.asarray(coded_bits, dtype=np.uint8)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if condition.crossover_p == 0.0:
        return coded.copy()
    flips = rng.random(coded.shape[0]) < condition.crossover_p
    return coded ^ flips.astype(np.uint8)


def reverse_generator(g: int, constraint_length: int) -> int:
    """Bit-reverse a generator within its constraint-length window."""
    out = 0
    for j in range(constraint_length):
        if (g >> j) & 1:
            out |= 1 << (constraint_length - 1 - j)
    return out


@lru_cache(maxsize=16)
def branch_tables(spec: CodeSpec, reverse: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Trellis lookup tables (branch_out, next_state) for a code.

    branch_out[s, b] is the packed branch symbol emitted when input bit b is
    shifted into state s; next_state[s, b] the successor state.  With
    ``reverse`` the tables describe the time-reversed code (bit-reversed
    generators), which is what the backward decoder runs on.
    """
    k = spec.constraint_length
    n = spec.rate_den
    gens = spec.generators
    if reverse:
        gens = tuple(reverse_generator(g, k) for g in gens)
    n_states = 1 << (k - 1)
    mask = n_states - 1
    branch_out = np.zeros((n_states, 2), dtype=np.uint8)
    next_state = np.zeros((n_states, 2), dtype=np.int64)
    for s in range(n_states):
        for b in (0, 1):
            window = (s << 1) | b
            sym = 0
            for c, g in enumerate(gens):
                bit = bin(window & g).count("1") & 1
                sym |= bit << (n - 1 - c)
            branch_out[s, b] = sym
            next_state[s, b] = window & mask
    return branch_out, next_state


def pack_branch_symbols(coded_bits: np.ndarray, spec: CodeSpec) -> np.ndarray:
    """Collapse an interleaved bit stream into one packed symbol per branch."""
    bits = np.asarray(coded_bits, dtype=np.uint8)
    if bits.shape[0] != spec.n_coded_bits:
        raise InputShapeError(
            f"coded stream must hold {spec.n_coded_bits} bits, got {bits.shape[0]}"
        )
    n = spec.rate_den
    syms = np.zeros(spec.frame_length, dtype=np.uint8)
    for c in range(n):
        syms |= bits[c::n] << (n - 1 - c)
    return syms
