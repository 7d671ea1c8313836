"""Shared builders for randomized test instances."""

import numpy as np
import pytest

from otaagg.channel import (
    DegenerateIvaError,
    FadingConfig,
    InfeasiblePowerError,
    NoiseProfile,
    aggregate_noise_variance,
    constraint_set,
    effective_power_budgets,
)
from otaagg.experiments import calibrate_noise_variance
from otaagg.mapreduce import parse_iva_spec, sample_ivas
from otaagg.topology import build_mst_prim, random_geometric_graph


def build_instance(k, seed, iva="uniform:1:5", snr_db=5.0, radius=0.9, pathloss=0.0):
    """One connected instance with noise calibrated to the requested SNR.

    Returns (tree, ivas, constraints, sigma_aggregate); the calibration keeps
    every effective budget positive, so the instance is always feasible.
    """
    fading = FadingConfig(pathloss_exponent=pathloss, reference_gain=1.0)
    graph = random_geometric_graph(k, radius, seed=seed, fading=fading)
    tree = build_mst_prim(graph)
    ivas = sample_ivas(parse_iva_spec(iva), k, seed=seed + 7919)
    powers = {i: 1.0 for i in tree.sources}
    level = calibrate_noise_variance(tree, ivas, powers, 10.0 ** (snr_db / 10.0))
    noise = NoiseProfile.uniform(k, level)
    budget = effective_power_budgets(tree, noise, powers)
    constraints = constraint_set(tree, budget, ivas)
    return tree, ivas, constraints, aggregate_noise_variance(tree, noise)


def build_tree(k, seed, iva="uniform:1:5", radius=0.9, pathloss=0.0):
    """Connected tree plus sampled aggregates, without power bookkeeping."""
    fading = FadingConfig(pathloss_exponent=pathloss, reference_gain=1.0)
    graph = random_geometric_graph(k, radius, seed=seed, fading=fading)
    tree = build_mst_prim(graph)
    ivas = sample_ivas(parse_iva_spec(iva), k, seed=seed + 7919)
    return tree, ivas


def build_fixed_noise_instance(k, seed, sigma_sq, iva="uniform:1:5", radius=0.9, power=1.0):
    """Instance with a fixed uniform noise level; may raise on infeasibility."""
    fading = FadingConfig(pathloss_exponent=0.0, reference_gain=1.0)
    graph = random_geometric_graph(k, radius, seed=seed, fading=fading)
    tree = build_mst_prim(graph)
    ivas = sample_ivas(parse_iva_spec(iva), k, seed=seed + 7919)
    noise = NoiseProfile.uniform(k, sigma_sq)
    budget = effective_power_budgets(tree, noise, {i: power for i in tree.sources})
    constraints = constraint_set(tree, budget, ivas)
    return tree, ivas, constraints, aggregate_noise_variance(tree, noise), noise


def aligned_optimum_mse(constraints, ivas, sigma_sq):
    """Independent optimum of the per-source MSE problem by direct reduction.

    The objective depends on eta only through u = eta^T a, and u ranges over
    the disk of radius R = sum_i sqrt(c_i) |a_i| (a Minkowski sum of disks).
    For fixed |u| the best phase zeroes the rotated imaginary part, leaving
    sigma^2 / (|u|^2 + sigma^2), minimized at |u| = R.
    """
    a = ivas.source_vector
    caps = constraints.caps_array()
    radius = float(np.sum(np.sqrt(caps) * np.abs(a)))
    s_abs_sq = abs(complex(a.sum())) ** 2
    return s_abs_sq * sigma_sq / (radius * radius + sigma_sq)


@pytest.fixture
def rng():
    return np.random.default_rng(0xA55)
