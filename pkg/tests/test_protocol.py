import numpy as np
import pytest

from otaagg.channel import NoiseProfile, aggregate_noise_variance
from otaagg.mapreduce import IvaProfile
from otaagg.protocol import (
    TransceiverDesign,
    analytic_mse,
    export_trace,
    measure_power,
    simulate_aggregation,
)
from otaagg.topology import ChannelGraph, build_mst_prim

from conftest import build_fixed_noise_instance, build_tree

TINY_NOISE = 1e-300  # numerically zero but satisfies the positivity contract


def chain_tree(k, coefficients=None):
    coefficients = coefficients or [1.0] * (k - 1)
    edges = {(i, i + 1): complex(coefficients[i - 1]) for i in range(1, k)}
    return build_mst_prim(ChannelGraph(k=k, destination=k, edges=edges))


def unit_design(m):
    return TransceiverDesign(eta=np.ones(m, dtype=complex), gamma=1.0)


class TestSimulateAggregation:
    def test_zero_noise_identity(self):
        tree, ivas = build_tree(6, seed=1)
        noise = NoiseProfile.uniform(6, TINY_NOISE)
        trace = simulate_aggregation(tree, ivas, unit_design(5), noise, seed=0)
        assert trace.a_hat == pytest.approx(ivas.ground_truth, rel=1e-12)

    def test_two_device_hand_expansion(self):
        tree = chain_tree(2)
        ivas = IvaProfile(np.array([2 + 1j, 0.5]))
        design = TransceiverDesign(eta=np.array([0.8 + 0.3j]), gamma=1.7)
        noise = NoiseProfile.uniform(2, 0.4)
        trace = simulate_aggregation(tree, ivas, design, noise, seed=5)
        n_k = trace.noise_draws[2]
        expected = (0.8 + 0.3j) / 1.7 * (2 + 1j) + 0.5 + n_k / 1.7
        assert trace.a_hat == pytest.approx(expected, rel=1e-14)

    def test_chain_zero_noise_channel_independent(self):
        ivas = IvaProfile(np.array([1 + 2j, -0.5, 3.0]))
        design = TransceiverDesign(eta=np.array([0.5, 1.5 + 0.2j]), gamma=2.0)
        noise = NoiseProfile.uniform(3, TINY_NOISE)
        results = []
        for coeffs in ([1.0, 1.0], [0.3, 2.7], [5.0, 0.01]):
            tree = chain_tree(3, coeffs)
            trace = simulate_aggregation(tree, ivas, design, noise, seed=0)
            results.append(trace.a_hat)
        expected = (0.5 * (1 + 2j) + (1.5 + 0.2j) * (-0.5)) / 2.0 + 3.0
        for value in results:
            assert value == pytest.approx(expected, rel=1e-12)

    def test_noisy_closed_form_decomposition(self):
        """The estimate equals the weighted aggregate plus the effective noise
        built from the recorded draws, to machine precision."""
        tree, ivas = build_tree(8, seed=3)
        noise = NoiseProfile.uniform(8, 0.2)
        rng = np.random.default_rng(17)
        design = TransceiverDesign(
            eta=rng.normal(size=7) + 1j * rng.normal(size=7), gamma=1.3
        )
        trace = simulate_aggregation(tree, ivas, design, noise, seed=11)
        effective = sum(
            tree.effective_channel[j] * trace.noise_draws[j] for j in tree.inter_set
        ) + trace.noise_draws[tree.root]
        a = ivas.source_vector
        expected = complex(design.eta @ a) / 1.3 + ivas.a_agg[-1] + effective / 1.3
        assert trace.a_hat == pytest.approx(expected, rel=1e-12)

    def test_slot_schedule(self):
        tree, ivas = build_tree(9, seed=6)
        noise = NoiseProfile.uniform(9, 0.1)
        trace = simulate_aggregation(
            tree, ivas, unit_design(8), noise, seed=2, record_slots=True
        )
        assert trace.slots_used == tree.levels
        tx_slots = {}
        rx_slots = {}
        for slot, device, role, _ in trace.slot_log:
            if role == "tx":
                tx_slots[device] = slot
            else:
                rx_slots.setdefault(device, slot)
        for i in tree.sources:
            assert tx_slots[i] == tree.levels - tree.level[i] + 1
        for j in tree.inter_set:
            assert rx_slots[j] == tx_slots[j] - 1  # half duplex: receive, then send
        assert rx_slots[tree.root] == tree.levels

    def test_seeded_reproducibility(self):
        tree, ivas = build_tree(6, seed=8)
        noise = NoiseProfile.uniform(6, 0.3)
        a = simulate_aggregation(tree, ivas, unit_design(5), noise, seed=42)
        b = simulate_aggregation(tree, ivas, unit_design(5), noise, seed=42)
        assert a.a_hat == b.a_hat and a.noise_draws == b.noise_draws


class TestAnalyticMse:
    def test_aligned_design_leaves_noise_term(self):
        ivas = IvaProfile(np.array([1 + 1j, 2.0, 0.5]))
        design = TransceiverDesign(eta=np.full(2, 1.5, dtype=complex), gamma=1.5)
        assert analytic_mse(design, ivas, 0.9) == pytest.approx(0.9 / 1.5**2, rel=1e-14)

    def test_large_gamma_limit(self):
        ivas = IvaProfile(np.array([1.0, 2.0, 0.0]))
        design = TransceiverDesign(eta=np.ones(2, dtype=complex), gamma=1e9)
        assert analytic_mse(design, ivas, 1.0) == pytest.approx(9.0, rel=1e-6)

    def test_hand_value(self):
        ivas = IvaProfile(np.array([1.0, 0.0]))
        design = TransceiverDesign(eta=np.array([1.0 + 0j]), gamma=2.0)
        assert analytic_mse(design, ivas, 1.0) == pytest.approx(0.5, rel=1e-15)

    def test_gamma_domain_guard(self):
        ivas = IvaProfile(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            TransceiverDesign(eta=np.array([1.0 + 0j]), gamma=0.0)


class TestEmpiricalAgreement:
    def test_empirical_mse_matches_analytic(self):
        tree, ivas = build_tree(5, seed=12)
        noise = NoiseProfile.uniform(5, 0.05)
        sigma_agg = aggregate_noise_variance(tree, noise)
        design = TransceiverDesign(eta=np.full(4, 0.7 + 0.1j), gamma=0.9)
        analytic = analytic_mse(design, ivas, sigma_agg)
        draws = 10_000
        rng = np.random.default_rng(31)
        errs = np.empty(draws)
        for d in range(draws):
            errs[d] = abs(simulate_aggregation(tree, ivas, design, noise, rng=rng).error) ** 2
        assert errs.mean() == pytest.approx(analytic, rel=4.0 / np.sqrt(draws))

    def test_noise_only_variance(self):
        # unit coefficients, zero aggregates: the estimate is pure filtered noise
        tree, _ = build_tree(5, seed=13)
        noise = NoiseProfile.uniform(5, 0.2)
        ivas = IvaProfile(np.zeros(5))
        sigma_agg = aggregate_noise_variance(tree, noise)
        design = TransceiverDesign(eta=np.ones(4, dtype=complex), gamma=1.4)
        draws = 20_000
        rng = np.random.default_rng(77)
        values = np.empty(draws, dtype=complex)
        for d in range(draws):
            values[d] = simulate_aggregation(tree, ivas, design, noise, rng=rng).a_hat
        self_var = np.mean(np.abs(values) ** 2)
        assert self_var == pytest.approx(sigma_agg / 1.4**2, rel=4.0 / np.sqrt(draws))


class TestMeasurePower:
    def test_leaf_expected_power(self):
        tree = chain_tree(2, [2.0])
        ivas = IvaProfile(np.array([3.0 + 4j, 0.0]))
        design = TransceiverDesign(eta=np.array([0.5 + 0j]), gamma=1.0)
        noise = NoiseProfile.uniform(2, 0.1)
        trace = simulate_aggregation(tree, ivas, design, noise, seed=0)
        report = measure_power(trace, tree, caps={1: 2.0})[0]
        assert report.expected == pytest.approx(0.25 * 25.0 / 4.0, rel=1e-12)
        assert report.margin == pytest.approx(2.0 - report.expected, rel=1e-12)

    def test_zero_noise_intermediate_matches_trace(self):
        tree, ivas = build_tree(7, seed=14)
        noise = NoiseProfile.uniform(7, TINY_NOISE)
        design = TransceiverDesign(
            eta=np.linspace(0.5, 1.5, 6) + 0.2j, gamma=1.0
        )
        trace = simulate_aggregation(tree, ivas, design, noise, seed=1)
        for report in measure_power(trace, tree):
            assert report.instantaneous == pytest.approx(report.expected, rel=1e-12)

    def test_monte_carlo_power_agreement(self):
        tree, ivas = build_tree(6, seed=15)
        noise = NoiseProfile.uniform(6, 0.3)
        design = TransceiverDesign(eta=np.full(5, 0.4 + 0.2j), gamma=1.0)
        draws = 10_000
        rng = np.random.default_rng(5)
        inst = {i: np.empty(draws) for i in tree.sources}
        for d in range(draws):
            trace = simulate_aggregation(tree, ivas, design, noise, rng=rng)
            for i in tree.sources:
                inst[i][d] = trace.instantaneous_power[i]
        reports = measure_power(trace, tree)
        for report in reports:
            arr = inst[report.device]
            se = arr.std(ddof=1) / np.sqrt(draws)
            assert abs(arr.mean() - report.expected) <= 3.0 * se + 1e-12


def test_trace_export(tmp_path):
    tree, ivas = build_tree(5, seed=20)
    noise = NoiseProfile.uniform(5, 0.1)
    design = TransceiverDesign(eta=np.ones(4, dtype=complex), gamma=1.0)
    trace = simulate_aggregation(tree, ivas, design, noise, seed=3, record_slots=True)
    path = tmp_path / "trace.txt"
    export_trace(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "slot device role re im"
    assert len(lines) == 1 + len(trace.slot_log)
    bare = simulate_aggregation(tree, ivas, design, noise, seed=3)
    with pytest.raises(ValueError):
        export_trace(bare, path)
