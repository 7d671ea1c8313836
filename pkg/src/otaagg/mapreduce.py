"""Datasets, map outputs, partial aggregation, and the nomographic examples."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class PartitionError(ValueError):
    """The file assignment is not a partition of the file indices."""


@dataclass(frozen=True)
class IvaProfile:
    """Per-device partially aggregated intermediate values.

    ``a_agg[i-1]`` is device i's aggregate; the last entry belongs to the
    destination. ``source_vector`` excludes the destination's own entry.
    """

    a_agg: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.a_agg, dtype=complex)
        arr.flags.writeable = False
        object.__setattr__(self, "a_agg", arr)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("a_agg must be a vector with one entry per device, k >= 2")

    @property
    def k(self) -> int:
        return self.a_agg.size

    @property
    def source_vector(self) -> np.ndarray:
        return self.a_agg[:-1]

    @property
    def ground_truth(self) -> complex:
        return complex(self.a_agg.sum())


@dataclass(frozen=True)
class NomographicTask:
    """Map outputs per file, a scalar reduce function, and the file partition.

    ``file_assignment[d]`` lists the file indices stored at device d+1; the
    assignment must partition range(len(map_outputs)).
    """

    map_outputs: np.ndarray
    reduce: Callable[[complex], complex]
    file_assignment: Sequence[Iterable[int]]

    def __post_init__(self):
        arr = np.asarray(self.map_outputs, dtype=complex)
        arr.flags.writeable = False
        object.__setattr__(self, "map_outputs", arr)
        object.__setattr__(
            self, "file_assignment", tuple(tuple(sorted(g)) for g in self.file_assignment)
        )

    def validate_partition(self) -> None:
        n = self.map_outputs.size
        seen: set[int] = set()
        for group in self.file_assignment:
            for idx in group:
                if idx in seen:
                    raise PartitionError(f"file {idx} assigned to more than one device")
                if not (0 <= idx < n):
                    raise PartitionError(f"file index {idx} out of range 0..{n - 1}")
                seen.add(idx)
        if len(seen) != n:
            missing = sorted(set(range(n)) - seen)
            raise PartitionError(f"files {missing} are not assigned to any device")


def partial_aggregate(task: NomographicTask) -> IvaProfile:
    """Sum each device's local map outputs into its partial aggregate."""
    task.validate_partition()
    a = np.array(
        [complex(task.map_outputs[list(group)].sum()) for group in task.file_assignment]
    )
    return IvaProfile(a_agg=a)


def weighted_averages(
    files: Sequence[np.ndarray],
    weights: Sequence[float],
    denoiser: np.ndarray,
    file_assignment: Sequence[Iterable[int]] | None = None,
) -> tuple[float, float]:
    """Weighted arithmetic and geometric averages via the map/aggregate/reduce pipeline.

    Arithmetic uses identity reduce with map output w_n * d^T f_n; geometric
    uses exp reduce with map output w_n * log(d^T f_n).
    """
    weights = np.asarray(weights, dtype=float)
    if np.any(weights <= 0) or np.any(weights >= 1) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must lie in (0,1) and sum to 1")
    d = np.asarray(denoiser, dtype=float)
    readings = np.array([float(d @ np.asarray(f, dtype=float)) for f in files])
    if np.any(readings <= 0):
        raise ValueError("denoised readings must be positive for the geometric average")
    if file_assignment is None:
        # one device per file plus the file-less aggregating device
        file_assignment = [(n,) for n in range(len(files))] + [()]

    arith_task = NomographicTask(
        map_outputs=weights * readings, reduce=lambda x: x, file_assignment=file_assignment
    )
    geo_task = NomographicTask(
        map_outputs=weights * np.log(readings),
        reduce=lambda x: np.exp(x),
        file_assignment=file_assignment,
    )
    arith = arith_task.reduce(partial_aggregate(arith_task).ground_truth)
    geo = geo_task.reduce(partial_aggregate(geo_task).ground_truth)
    return float(np.real(arith)), float(np.real(geo))


@dataclass(frozen=True)
class UniformIva:
    """Real and imaginary parts drawn independently from U(low, high)."""

    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"need low < high, got [{self.low}, {self.high}]")


@dataclass(frozen=True)
class ComplexGaussianIva:
    """Complex Gaussian with the given complex mean and total variance."""

    mean: complex
    variance: float

    def __post_init__(self):
        if self.variance <= 0:
            raise ValueError(f"variance must be > 0, got {self.variance}")


IvaDistribution = UniformIva | ComplexGaussianIva


def parse_iva_spec(text: str) -> IvaDistribution:
    """Parse CLI specs like 'uniform:1:5' or 'cgauss:3:1.3333'."""
    parts = text.split(":")
    if parts[0] == "uniform" and len(parts) == 3:
        return UniformIva(low=float(parts[1]), high=float(parts[2]))
    if parts[0] == "cgauss" and len(parts) == 3:
        return ComplexGaussianIva(mean=complex(float(parts[1]), 0.0), variance=float(parts[2]))
    raise ValueError(f"unrecognized IVA spec: {text!r}")


def format_iva_spec(dist: IvaDistribution) -> str:
    if isinstance(dist, UniformIva):
        return f"uniform:{dist.low:g}:{dist.high:g}"
    return f"cgauss:{dist.mean.real:g}:{dist.variance:g}"


def sample_ivas(dist: IvaDistribution, k: int, seed: int) -> IvaProfile:
    """Seeded draw of one partial aggregate per device."""
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x17A)))
    if isinstance(dist, UniformIva):
        re = rng.uniform(dist.low, dist.high, k)
        im = rng.uniform(dist.low, dist.high, k)
    else:
        scale = np.sqrt(dist.variance / 2.0)
        re = dist.mean.real + rng.normal(0.0, scale, k)
        im = dist.mean.imag + rng.normal(0.0, scale, k)
    return IvaProfile(a_agg=re + 1j * im)
