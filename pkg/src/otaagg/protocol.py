"""Slot-by-slot simulation of multi-level over-the-air aggregation.

The block has L slots. In slot s every device at tree level L - s + 1
transmits to its parent; parents at the same level receive simultaneously
over the shared band, so their inputs superpose. Leaves send their channel-
inverted scaled aggregate, relays add their own term to what they received,
and the destination divides by the receive filtering factor and adds its own
local aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .channel import NoiseProfile

if TYPE_CHECKING:
    from .mapreduce import IvaProfile
    from .topology import AggregationTree


@dataclass(frozen=True)
class TransceiverDesign:
    """Per-source complex transmit coefficients and the receive filtering factor."""

    eta: np.ndarray
    gamma: float

    def __post_init__(self):
        arr = np.asarray(self.eta, dtype=complex)
        arr.flags.writeable = False
        object.__setattr__(self, "eta", arr)
        if not np.all(np.isfinite(arr)):
            raise ValueError("transmit coefficients must be finite")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and > 0, got {self.gamma}")

    def eta_of(self, device: int) -> complex:
        return complex(self.eta[device - 1])


@dataclass(frozen=True)
class PowerReport:
    device: int
    expected: float
    instantaneous: float
    cap: float | None
    margin: float | None


@dataclass(frozen=True)
class ProtocolTrace:
    """One simulated block: all signals, the estimate, and its error."""

    a_hat: complex
    error: complex
    transmit: dict[int, complex]
    received: dict[int, complex]
    noise_draws: dict[int, complex]
    instantaneous_power: dict[int, float]
    slots_used: int
    design: TransceiverDesign
    ivas: "IvaProfile"
    noise: NoiseProfile
    slot_log: tuple[tuple[int, int, str, complex], ...] | None = None


def simulate_aggregation(
    tree: "AggregationTree",
    ivas: "IvaProfile",
    design: TransceiverDesign,
    noise: NoiseProfile,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
    record_slots: bool = False,
) -> ProtocolTrace:
    """Run one block of the aggregation protocol with fresh noise draws."""
    if rng is None:
        rng = np.random.default_rng(seed)
    L = tree.levels
    transmit: dict[int, complex] = {}
    received: dict[int, complex] = {}
    noise_draws: dict[int, complex] = {}
    log: list[tuple[int, int, str, complex]] = []

    def own_term(i: int) -> complex:
        h = tree.effective_channel[i]
        inv = h.conjugate() / (h.real**2 + h.imag**2)
        return inv * design.eta_of(i) * complex(ivas.a_agg[i - 1])

    def draw_noise(j: int) -> complex:
        scale = np.sqrt(noise.at(j) / 2.0)
        n = complex(rng.normal(0.0, scale), rng.normal(0.0, scale))
        noise_draws[j] = n
        return n

    for slot in range(1, L + 1):
        senders = tree.distance_set(L - slot + 1)
        for i in senders:
            x = own_term(i)
            if i in tree.inter_set:
                x += received[i]
            transmit[i] = x
            if record_slots:
                log.append((slot, i, "tx", x))
        receivers = sorted({tree.parent[i] for i in senders})
        for j in receivers:
            y = draw_noise(j)
            for i in tree.children[j]:
                y += tree.graph.coefficient(j, i) * transmit[i]
            received[j] = y
            if record_slots:
                log.append((slot, j, "rx", y))

    a_hat = received[tree.root] / design.gamma + complex(ivas.a_agg[tree.root - 1])
    return ProtocolTrace(
        a_hat=a_hat,
        error=a_hat - ivas.ground_truth,
        transmit=transmit,
        received=received,
        noise_draws=noise_draws,
        instantaneous_power={i: abs(x) ** 2 for i, x in transmit.items()},
        slots_used=L,
        design=design,
        ivas=ivas,
        noise=noise,
        slot_log=tuple(log) if record_slots else None,
    )


def analytic_mse(design: TransceiverDesign, ivas: "IvaProfile", sigma_sq: float) -> float:
    """Computation MSE: squared misalignment of the weighted sum plus filtered noise power."""
    if design.gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {design.gamma}")
    a = ivas.source_vector
    mis = complex(design.eta @ a) / design.gamma - complex(a.sum())
    return abs(mis) ** 2 + sigma_sq / design.gamma**2


def expected_source_power(
    tree: "AggregationTree", ivas: "IvaProfile", design: TransceiverDesign, noise: NoiseProfile
) -> dict[int, float]:
    """Per-source expected transmit power over the noise distribution."""
    out: dict[int, float] = {}
    for i in tree.sources:
        h = tree.effective_channel[i]
        gain = h.real**2 + h.imag**2
        if i in tree.leaf_set:
            out[i] = abs(design.eta_of(i)) ** 2 * abs(ivas.a_agg[i - 1]) ** 2 / gain
        else:
            members = sorted(tree.descendants[i] | {i})
            signal = sum(design.eta_of(j) * complex(ivas.a_agg[j - 1]) for j in members)
            power = abs(signal) ** 2 / gain + noise.at(i)
            for j in tree.descendants[i] & tree.inter_set:
                power += tree.hop_gain_sq(j, i) * noise.at(j)
            out[i] = power
    return out


def measure_power(
    trace: ProtocolTrace, tree: "AggregationTree", caps: dict[int, float] | None = None
) -> list[PowerReport]:
    """Expected and instantaneous transmit power per source, with cap margins."""
    expected = expected_source_power(tree, trace.ivas, trace.design, trace.noise)
    reports = []
    for i in tree.sources:
        cap = caps.get(i) if caps else None
        reports.append(
            PowerReport(
                device=i,
                expected=expected[i],
                instantaneous=trace.instantaneous_power[i],
                cap=cap,
                margin=None if cap is None else cap - expected[i],
            )
        )
    return reports


def export_trace(trace: ProtocolTrace, path) -> None:
    """Write the per-slot signal log as text; requires record_slots=True."""
    if trace.slot_log is None:
        raise ValueError("trace was recorded without slot logging")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("slot device role re im\n")
        for slot, device, role, signal in trace.slot_log:
            fh.write(f"{slot} {device} {role} {signal.real:.17g} {signal.imag:.17g}\n")
