"""Fading draws, noise profiles, effective power budgets, and transmit caps.

The effective budget of an intermediate relay subtracts the noise power it
forwards for its subtree from its raw cap. The per-source cap on the transmit
coefficient follows from the subtree aggregate each source actually emits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .mapreduce import IvaProfile
    from .topology import AggregationTree

MIN_CHANNEL_MAGNITUDE = 1e-12


class InfeasiblePowerError(ValueError):
    """One or more relays cannot cover their forwarded-noise power."""

    def __init__(self, devices: list[int]):
        self.devices = list(devices)
        super().__init__(f"effective power budget is non-positive at devices {self.devices}")


class DegenerateIvaError(ValueError):
    """A subtree aggregate is zero, so the transmit cap would be infinite."""


class DegenerateChannelError(ValueError):
    """A channel magnitude below the invertibility floor was produced."""


@dataclass(frozen=True)
class FadingConfig:
    """Channel draw configuration.

    ``rayleigh`` draws circularly symmetric complex Gaussians with variance
    reference_gain * distance^-pathloss_exponent; ``fixed`` returns the
    deterministic real coefficient with that squared magnitude.
    """

    model: str = "rayleigh"
    pathloss_exponent: float = 2.0
    reference_gain: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.model not in ("rayleigh", "fixed"):
            raise ValueError(f"unknown fading model: {self.model!r}")
        if self.pathloss_exponent < 0:
            raise ValueError("pathloss_exponent must be >= 0")
        if self.reference_gain <= 0:
            raise ValueError("reference_gain must be > 0")


def draw_channels(
    positions: np.ndarray,
    pairs: list[tuple[int, int]],
    fading: FadingConfig,
    rng: np.random.Generator | None = None,
) -> dict[tuple[int, int], complex]:
    """Draw one complex coefficient per device pair; deterministic given the seed."""
    if rng is None:
        rng = np.random.default_rng(fading.seed)
    positions = np.asarray(positions, dtype=float)
    out: dict[tuple[int, int], complex] = {}
    for (i, j) in pairs:
        d = positions[i - 1] - positions[j - 1]
        dist = float(np.hypot(d[0], d[1]))
        if dist == 0.0:
            raise ValueError(f"devices {i} and {j} share a position")
        var = fading.reference_gain * dist ** (-fading.pathloss_exponent)
        if fading.model == "fixed":
            h = complex(np.sqrt(var), 0.0)
            if abs(h) < MIN_CHANNEL_MAGNITUDE:
                raise DegenerateChannelError(
                    f"fixed channel magnitude {abs(h):g} below {MIN_CHANNEL_MAGNITUDE:g}"
                )
        else:
            scale = np.sqrt(var / 2.0)
            for _ in range(100):
                h = complex(rng.normal(0.0, scale), rng.normal(0.0, scale))
                if abs(h) >= MIN_CHANNEL_MAGNITUDE:
                    break
            else:
                raise DegenerateChannelError(
                    f"could not draw an invertible coefficient for pair ({i},{j})"
                )
        out[(i, j) if i < j else (j, i)] = h
    return out


@dataclass(frozen=True)
class NoiseProfile:
    """Receiver noise variance per device (strictly positive)."""

    sigma_sq: dict[int, float]

    def __post_init__(self):
        for dev, v in self.sigma_sq.items():
            if v <= 0:
                raise ValueError(f"noise variance at device {dev} must be > 0, got {v}")

    @classmethod
    def uniform(cls, k: int, value: float) -> "NoiseProfile":
        return cls({i: value for i in range(1, k + 1)})

    def at(self, device: int) -> float:
        return self.sigma_sq[device]


def aggregate_noise_variance(tree: "AggregationTree", noise: NoiseProfile) -> float:
    """Variance of the total noise reaching the destination through the tree."""
    total = noise.at(tree.root)
    for j in tree.inter_set:
        h = tree.effective_channel[j]
        total += (h.real**2 + h.imag**2) * noise.at(j)
    return total


@dataclass(frozen=True)
class PowerBudget:
    """Raw transmit caps p and effective budgets p_bar per source device."""

    p: dict[int, float]
    p_bar: dict[int, float]


def effective_power_budgets(
    tree: "AggregationTree", noise: NoiseProfile, p: dict[int, float]
) -> PowerBudget:
    """Effective budgets: p for leaves, p minus forwarded-noise power for relays.

    Raises InfeasiblePowerError listing every source whose budget is
    non-positive; callers record the trial as infeasible instead of clamping.
    """
    p_bar: dict[int, float] = {}
    infeasible: list[int] = []
    for i in tree.sources:
        cap = p[i]
        if cap <= 0:
            raise ValueError(f"transmit cap at device {i} must be > 0, got {cap}")
        if i in tree.leaf_set:
            p_bar[i] = cap
        else:
            forwarded = noise.at(i)
            for j in tree.descendants[i] & tree.inter_set:
                forwarded += tree.hop_gain_sq(j, i) * noise.at(j)
            p_bar[i] = cap - forwarded
        if p_bar[i] <= 0:
            infeasible.append(i)
    if infeasible:
        raise InfeasiblePowerError(sorted(infeasible))
    return PowerBudget(p=dict(p), p_bar=p_bar)


@dataclass(frozen=True)
class ConstraintSet:
    """Per-source squared-magnitude caps c_i on the transmit coefficients.

    ``b_vectors[i]`` holds the subtree aggregate vector of source i: entry j-1
    is device j's own partial aggregate for j in descendants(i) plus i itself,
    zero elsewhere.
    """

    caps: dict[int, float]
    b_vectors: dict[int, np.ndarray]

    @property
    def p_min(self) -> float:
        return min(self.caps.values())

    def caps_array(self) -> np.ndarray:
        return np.array([self.caps[i] for i in sorted(self.caps)], dtype=float)


def constraint_set(
    tree: "AggregationTree", budget: PowerBudget, ivas: "IvaProfile"
) -> ConstraintSet:
    """Caps c_i = |h_{i->K}|^2 p_bar_i / |sum of subtree aggregates|^2."""
    k = tree.k
    caps: dict[int, float] = {}
    b_vectors: dict[int, np.ndarray] = {}
    degenerate: list[int] = []
    for i in tree.sources:
        b = np.zeros(k - 1, dtype=complex)
        b[i - 1] = ivas.a_agg[i - 1]
        for j in tree.descendants[i]:
            b[j - 1] = ivas.a_agg[j - 1]
        b.flags.writeable = False
        b_vectors[i] = b
        subtree_sum = complex(b.sum())
        denom = subtree_sum.real**2 + subtree_sum.imag**2
        if denom == 0.0:
            degenerate.append(i)
            continue
        h = tree.effective_channel[i]
        caps[i] = (h.real**2 + h.imag**2) * budget.p_bar[i] / denom
    if degenerate:
        raise DegenerateIvaError(
            f"subtree aggregate is zero at devices {sorted(degenerate)}; cap would be infinite"
        )
    return ConstraintSet(caps=caps, b_vectors=b_vectors)
