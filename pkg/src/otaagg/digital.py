"""Digital baseline: dithered uniform quantization plus uncoded QAM relaying.

Each source quantizes the real and imaginary parts of its aggregate onto the
lattice {0, step, ..., range_max}, maps the two bit groups onto square QAM
symbols, and sends them hop by hop along its tree path; every relay detects
and re-modulates. The destination sums the decoded messages as-is (no error
detection exists in the uncoded pipeline) and adds its own local aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .channel import NoiseProfile

if TYPE_CHECKING:
    from .mapreduce import IvaProfile
    from .topology import AggregationTree

_LATTICE_SNAP = 1e-9  # treat values this close to a level (relative to step) as exact


@dataclass(frozen=True)
class QuantizerConfig:
    """Uniform quantizer over [0, range_max] with 2^q_bits levels."""

    q_bits: int
    range_max: float
    randomized: bool = True

    def __post_init__(self):
        if self.q_bits < 1:
            raise ValueError(f"q_bits must be >= 1, got {self.q_bits}")
        if self.range_max <= 0:
            raise ValueError(f"range_max must be > 0, got {self.range_max}")

    @property
    def step(self) -> float:
        return self.range_max / (2**self.q_bits - 1)


@dataclass(frozen=True)
class QuantizedValue:
    bits_re: tuple[int, ...]
    bits_im: tuple[int, ...]
    message: complex
    clamped: int  # number of components clamped into [0, range_max]


def _bits_from_level(level: int, q: int) -> tuple[int, ...]:
    return tuple((level >> (q - 1 - b)) & 1 for b in range(q))


def _level_from_bits(bits: tuple[int, ...]) -> int:
    level = 0
    for b in bits:
        level = (level << 1) | b
    return level


def _quantize_component(value: float, config: QuantizerConfig, rng) -> tuple[int, int]:
    clamped = 0
    top = 2**config.q_bits - 1
    if value < 0.0:
        value, clamped = 0.0, 1
    elif value > config.range_max:
        value, clamped = config.range_max, 1
    t = value / config.step
    lower = min(int(np.floor(t)), top)
    frac = t - lower
    if frac < _LATTICE_SNAP:
        return lower, clamped
    if frac > 1.0 - _LATTICE_SNAP:
        return min(lower + 1, top), clamped
    if config.randomized:
        level = lower + 1 if rng.random() < frac else lower
    else:
        level = lower + 1 if frac >= 0.5 else lower
    return min(level, top), clamped


def quantize(
    value: complex,
    config: QuantizerConfig,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> QuantizedValue:
    """Quantize one complex value; randomized mode dithers so the output is unbiased."""
    if rng is None:
        rng = np.random.default_rng(seed)
    level_re, clamp_re = _quantize_component(float(value.real), config, rng)
    level_im, clamp_im = _quantize_component(float(value.imag), config, rng)
    return QuantizedValue(
        bits_re=_bits_from_level(level_re, config.q_bits),
        bits_im=_bits_from_level(level_im, config.q_bits),
        message=complex(level_re * config.step, level_im * config.step),
        clamped=clamp_re + clamp_im,
    )


class QamConstellation:
    """Square 2^q-QAM with unit average symbol energy and per-axis Gray labels."""

    def __init__(self, q_bits: int):
        if q_bits == 1:
            self.q_bits = 1
            self.side = 2
            self._axis_levels = np.array([-1.0, 1.0])
            self._scale = 1.0
        else:
            if q_bits % 2 != 0:
                raise ValueError(f"square QAM needs an even bit count, got {q_bits}")
            self.q_bits = q_bits
            self.side = 2 ** (q_bits // 2)
            raw = np.arange(-self.side + 1, self.side, 2, dtype=float)
            self._scale = float(np.sqrt(np.mean(raw**2) * 2.0))
            self._axis_levels = raw / self._scale
        side = self.side
        self._gray = np.array([i ^ (i >> 1) for i in range(side)])
        self._gray_inverse = np.argsort(self._gray)

        points = np.empty(2**self.q_bits, dtype=complex)
        for label in range(2**self.q_bits):
            points[label] = self._point_for_label(label)
        self.points = points

    def _split_label(self, label: int) -> tuple[int, int]:
        if self.q_bits == 1:
            return label, 0
        half = self.q_bits // 2
        return label >> half, label & ((1 << half) - 1)

    def _point_for_label(self, label: int) -> complex:
        gi, gq = self._split_label(label)
        i_idx = int(self._gray_inverse[gi])
        if self.q_bits == 1:
            return complex(self._axis_levels[i_idx], 0.0)
        q_idx = int(self._gray_inverse[gq])
        return complex(self._axis_levels[i_idx], self._axis_levels[q_idx])

    def modulate(self, bits: tuple[int, ...]) -> complex:
        return complex(self.points[_level_from_bits(bits)])

    def _axis_index(self, coord: np.ndarray) -> np.ndarray:
        if self.q_bits == 1:
            return (coord >= 0).astype(int)
        idx = np.rint((coord * self._scale + self.side - 1) / 2.0).astype(int)
        return np.clip(idx, 0, self.side - 1)

    def detect_labels(self, received: np.ndarray, channel_scale: complex) -> np.ndarray:
        """Nearest-symbol detection after channel compensation; vectorized."""
        z = np.asarray(received, dtype=complex) / channel_scale
        i_idx = self._axis_index(z.real)
        if self.q_bits == 1:
            return self._gray[i_idx]
        q_idx = self._axis_index(z.imag)
        half = self.q_bits // 2
        return (self._gray[i_idx] << half) | self._gray[q_idx]

    def detect(self, received: complex, channel_scale: complex) -> tuple[int, ...]:
        label = int(self.detect_labels(np.array([received]), channel_scale)[0])
        return _bits_from_level(label, self.q_bits)


def transmit_symbols(
    labels: np.ndarray,
    constellation: QamConstellation,
    channel: complex,
    power: float,
    sigma_sq: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """One hop for an array of symbol labels: scale, add noise, ML-detect."""
    labels = np.asarray(labels, dtype=int)
    scale = channel * np.sqrt(power)
    sent = constellation.points[labels] * scale
    noise_scale = np.sqrt(sigma_sq / 2.0)
    noise = rng.normal(0.0, noise_scale, labels.size) + 1j * rng.normal(
        0.0, noise_scale, labels.size
    )
    return constellation.detect_labels(sent + noise, scale)


def relay_transmit(
    bits: tuple[int, ...],
    path: list[tuple[int, int, complex]],
    powers: dict[int, float],
    noise: NoiseProfile,
    rng: np.random.Generator,
    constellation: QamConstellation | None = None,
) -> tuple[tuple[int, ...], int]:
    """Decode-and-forward one bit group along (tx, rx, channel) hops.

    Returns the bits delivered at the final receiver and the number of hops
    whose detected symbol differed from the transmitted one.
    """
    if not path:
        raise ValueError("relay path must contain at least one hop")
    if constellation is None:
        constellation = QamConstellation(len(bits))
    label = _level_from_bits(bits)
    hop_errors = 0
    for tx, rx, h in path:
        detected = int(
            transmit_symbols(
                np.array([label]), constellation, h, powers[tx], noise.at(rx), rng
            )[0]
        )
        if detected != label:
            hop_errors += 1
        label = detected
    return _bits_from_level(label, constellation.q_bits), hop_errors


@dataclass(frozen=True)
class DigitalShuffleResult:
    normalized_mse: float
    resource_blocks: int
    clamp_rate: float
    hop_error_rate: float


def resource_block_count(tree: "AggregationTree") -> int:
    """Dedicated blocks for the digital shuffle: two per hop per source path."""
    return sum(2 * tree.level[i] for i in tree.sources)


def digital_shuffle_mse(
    tree: "AggregationTree",
    ivas: "IvaProfile",
    config: QuantizerConfig,
    powers: dict[int, float],
    noise: NoiseProfile,
    trials: int,
    seed: int,
    shift: float = 0.0,
) -> DigitalShuffleResult:
    """Monte Carlo normalized MSE of the quantize/relay/sum pipeline.

    ``shift`` is subtracted from both components before quantization and added
    back after decoding (used to map an IVA range [lo, hi] onto [0, hi - lo]).
    """
    constellation = QamConstellation(config.q_bits)
    truth = ivas.ground_truth
    truth_sq = abs(truth) ** 2
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xD16)))
    err_sq = 0.0
    clamped = 0
    hop_errors = 0
    hops_total = 0
    for _ in range(trials):
        total = complex(ivas.a_agg[tree.root - 1])
        for i in tree.sources:
            value = complex(ivas.a_agg[i - 1]) - complex(shift, shift)
            quantized = quantize(value, config, rng=rng)
            clamped += quantized.clamped
            path = [(tx, rx, tree.graph.coefficient(tx, rx)) for tx, rx in tree.path_to_root(i)]
            bits_re, err_re = relay_transmit(
                quantized.bits_re, path, powers, noise, rng, constellation
            )
            bits_im, err_im = relay_transmit(
                quantized.bits_im, path, powers, noise, rng, constellation
            )
            hop_errors += err_re + err_im
            hops_total += 2 * len(path)
            decoded = complex(
                _level_from_bits(bits_re) * config.step + shift,
                _level_from_bits(bits_im) * config.step + shift,
            )
            total += decoded
        err_sq += abs(total - truth) ** 2
    return DigitalShuffleResult(
        normalized_mse=err_sq / (trials * truth_sq),
        resource_blocks=resource_block_count(tree),
        clamp_rate=clamped / (2 * len(tree.sources) * trials),
        hop_error_rate=hop_errors / hops_total if hops_total else 0.0,
    )
