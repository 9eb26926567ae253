"""Sizing a farm of buffered decoders against an aggregate throughput target.

Given the supportable line rate R_d(B) for a single decoder with a B-codeword
buffer, the farm needs N = ceil(T_target / R_d(B)) decoders.  Silicon cost is
counted in buffer-slot units: one decoder core costs alpha slots, its buffer
costs B, so a farm occupies N * (alpha + B) * A_B.  Per-decoder throughput
density R_d(B) / (alpha + B), normalised to its best value over the curve,
ranks buffer sizes independently of the target.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

from .errors import SchemaError

DESIGN_SCHEMA = "design/1"

# Tolerance for "the target divides the rate exactly" when sizing the farm;
# guards ceil() against float dust in rates like 250e6.
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class AreaModel:
    """Decoder core area in units of one codeword's buffer slot."""

    alpha: float
    buffer_unit: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.buffer_unit > 0:
            raise ValueError("buffer_unit must be positive")


@dataclass(frozen=True)
class DesignPoint:
    """One candidate farm design at a fixed buffer size."""

    buffer_codewords: int
    data_rate: float
    n_decoders: int
    total_area: float
    normalized_throughput: float

    def __post_init__(self) -> None:
        if self.n_decoders < 1:
            raise ValueError("n_decoders must be at least 1")
        if not 0.0 < self.normalized_throughput <= 1.0:
            raise ValueError("normalized_throughput must lie in (0, 1]")


def _ceil_ratio(target: float, rate: float) -> int:
    ratio = target / rate
    n = math.floor(ratio)
    if ratio - n > _CEIL_EPS:
        n += 1
    return max(int(n), 1)


def decoders_for_target(
    t_target: float, rd_curve: Sequence[Tuple[int, float]]
) -> List[Tuple[int, int]]:
    """Decoder count per buffer size to reach the aggregate rate."""
    if not t_target > 0:
        raise ValueError("t_target must be positive")
    out = []
    for b, rd in rd_curve:
        if not rd > 0:
            raise ValueError(f"data rate for B={b} must be positive")
        out.append((int(b), _ceil_ratio(t_target, rd)))
    return out


def farm_area(n_decoders: int, buffer_codewords: int, model: AreaModel) -> float:
    """Total silicon: N decoder cores plus N buffers of B slots each."""
    if n_decoders < 1:
        raise ValueError("n_decoders must be at least 1")
    if buffer_codewords < 1:
        raise ValueError("buffer_codewords must be at least 1")
    return (
        n_decoders * model.alpha * model.buffer_unit
        + n_decoders * buffer_codewords * model.buffer_unit
    )


def normalized_throughput_curve(
    rd_curve: Sequence[Tuple[int, float]], model: AreaModel
) -> List[Tuple[int, float]]:
    """Throughput per unit area for each B, scaled so the best point is 1."""
    if not rd_curve:
        raise ValueError("rd_curve is empty")
    raw = [(int(b), rd / (model.alpha + b)) for b, rd in rd_curve]
    best = max(v for _, v in raw)
    if not best > 0:
        raise ValueError("all throughput densities are nonpositive")
    return [(b, v / best) for b, v in raw]


def area_reduction(point_a: DesignPoint, point_b: DesignPoint) -> float:
    """How much more silicon design a needs than design b, in percent."""
    return (point_a.total_area / point_b.total_area - 1.0) * 100.0


def plan(
    rd_curve: Sequence[Tuple[int, float]],
    model: AreaModel,
    t_target: float,
) -> Tuple[List[DesignPoint], int]:
    """Size every candidate buffer and name the densest one.

    Returns the design points (in rd_curve order) and the buffer size with
    the highest normalized throughput; ties go to the smaller buffer.
    """
    counts = dict(decoders_for_target(t_target, rd_curve))
    norm = dict(normalized_throughput_curve(rd_curve, model))
    points = []
    for b, rd in rd_curve:
        b = int(b)
        n = counts[b]
        points.append(
            DesignPoint(
                buffer_codewords=b,
                data_rate=rd,
                n_decoders=n,
                total_area=farm_area(n, b, model),
                normalized_throughput=norm[b],
            )
        )
    best = max(points, key=lambda p: (p.normalized_throughput, -p.buffer_codewords))
    return points, best.buffer_codewords


def load_rd_curve(path: str | Path) -> List[Tuple[int, float]]:
    """Read a (buffer size, line rate) curve written by hand or by analyze."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["buffer_codewords", "data_rate_bps"]:
            raise SchemaError(
                f"expected header buffer_codewords,data_rate_bps in {path}, got {header!r}"
            )
        for row in reader:
            if not row:
                continue
            rows.append((int(row[0]), float(row[1])))
    if not rows:
        raise SchemaError(f"no data rows in {path}")
    return rows


def save_design(
    csv_path: str | Path,
    points: Sequence[DesignPoint],
    summary: dict,
) -> None:
    """Design table as CSV plus a JSON sidecar naming the chosen buffer."""
    csv_path = Path(csv_path)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "buffer_codewords",
                "n_decoders",
                "data_rate_bps",
                "total_area",
                "normalized_throughput",
            ]
        )
        for p in points:
            writer.writerow(
                [
                    p.buffer_codewords,
                    p.n_decoders,
                    p.data_rate,
                    p.total_area,
                    p.normalized_throughput,
                ]
            )
    doc = {"schema": DESIGN_SCHEMA}
    doc.update(summary)
    with open(csv_path.with_suffix(".json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
