"""Seeded Monte Carlo harness sweeping SNR or network size across schemes.

Every trial derives independent substreams from (master_seed, sweep index,
trial index), so all schemes see identical channel and IVA draws (paired
comparison) and reruns are bit-identical regardless of worker count.

The sweep axis "received SNR" is interpreted per scheme family, because the
two families have received-SNR notions separated by a structural 30..200 dB
gap (the smallest transmit cap involves minima of multihop channel products,
the per-link symbol SNR a typical single hop; no shared noise level puts both
in their meaningful regime):

- analog aggregation schemes run at p_min / sigma^2 == axis, where p_min is
  the smallest transmit-coefficient cap and sigma^2 the aggregate noise
  variance at the destination; each trial solves the (piecewise-linear,
  closed-form) calibration for the device noise level realizing the axis
  value exactly;
- the digital baselines run at a mean per-hop received symbol SNR of axis
  over the aggregation tree's links, i.e. device noise p * mean(|h_edge|^2)
  / snr; this self-normalizes against the tree's link-selection gain.

Topology, channels, IVAs, and transmit caps are shared by all schemes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (
    ConstraintSet,
    DegenerateIvaError,
    FadingConfig,
    InfeasiblePowerError,
    NoiseProfile,
    aggregate_noise_variance,
    constraint_set,
    effective_power_budgets,
)
from .digital import QuantizerConfig, digital_shuffle_mse
from .mapreduce import (
    ComplexGaussianIva,
    IvaDistribution,
    UniformIva,
    sample_ivas,
)
from .topology import AggregationTree, build_mst_prim, random_geometric_graph
from .transceivers import (
    DinkelbachOptions,
    solve_common_coefficient,
    solve_dinkelbach,
    solve_rayleigh_quotient,
    solve_unbiased,
)

OTA_SCHEMES = ("common", "unbiased", "dinkelbach", "rayleigh")
DIGITAL_SCHEMES = ("qam4", "qam16")
ALL_SCHEMES = OTA_SCHEMES + DIGITAL_SCHEMES

_SCHEME_STREAM = {name: 16 + idx for idx, name in enumerate(ALL_SCHEMES)}
_GRAPH_STREAM = 1
_IVA_STREAM = 2

CSV_HEADER = "sweep,scheme,nmse_mean,nmse_se,resources,infeasible_rate,iters,seed"


@dataclass(frozen=True)
class ExperimentConfig:
    schemes: tuple[str, ...]
    k: int = 20
    radius: float = 0.35
    pathloss_exponent: float = 2.0
    reference_gain: float = 1.0
    snr_db: tuple[float, ...] | None = None
    k_sweep: tuple[int, ...] | None = None
    fixed_snr_db: float = 5.0
    iva: IvaDistribution = UniformIva(1.0, 5.0)
    trials: int = 1000
    master_seed: int = 0
    quantizer_randomized: bool = True
    dinkelbach: DinkelbachOptions = DinkelbachOptions()
    power_default: float = 1.0
    power_overrides: dict[int, float] = field(default_factory=dict)
    sigma_sq_default: float | None = None
    sigma_sq_overrides: dict[int, float] = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.schemes:
            raise ValueError("at least one scheme is required")
        unknown = [s for s in self.schemes if s not in ALL_SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; choose from {ALL_SCHEMES}")
        if (self.snr_db is None) == (self.k_sweep is None):
            raise ValueError("exactly one of snr_db or k_sweep must be given")
        if self.snr_db is not None and not self.snr_db:
            raise ValueError("snr_db sweep is empty")
        if self.k_sweep is not None and not self.k_sweep:
            raise ValueError("k_sweep is empty")

    @property
    def sweep_values(self) -> tuple[float, ...]:
        if self.snr_db is not None:
            return tuple(float(v) for v in self.snr_db)
        return tuple(float(v) for v in self.k_sweep)


@dataclass(frozen=True)
class ResultRow:
    sweep: float
    scheme: str
    nmse_mean: float
    nmse_se: float
    resources: float
    infeasible_rate: float
    iters: float
    seed: int


@dataclass(frozen=True)
class TrialRecord:
    feasible: bool
    truth_sq: float
    # scheme -> (mse, resource count, solver iterations)
    outcomes: dict[str, tuple[float, float, float]]


def quantizer_range(dist: IvaDistribution) -> tuple[float, float]:
    """(shift, range_max) mapping the IVA components onto the quantizer range.

    Uniform IVAs shift by the lower endpoint; Gaussian IVAs use a symmetric
    three-sigma window around the per-component mean (values outside are
    clamped and the clamp rate reported by the digital pipeline). The window
    must be mean-centered, not anchored at zero, or low-mean distributions
    would clamp a large fraction of their mass.
    """
    if isinstance(dist, UniformIva):
        return dist.low, dist.high - dist.low
    assert isinstance(dist, ComplexGaussianIva)
    half_width = 3.0 * math.sqrt(dist.variance / 2.0)
    return dist.mean.real - half_width, 2.0 * half_width


def calibrate_noise_variance(
    tree: AggregationTree, ivas, powers: dict[int, float], snr_linear: float
) -> float:
    """Device noise variance realizing p_min / sigma_aggregate^2 == snr_linear.

    With a uniform device variance v, every cap is affine in v and the
    aggregate variance is linear in v, so the calibration reduces to a minimum
    of per-source closed forms. The result is always feasible (all effective
    budgets stay positive).
    """
    if snr_linear <= 0:
        raise ValueError(f"snr must be positive, got {snr_linear}")
    w_agg = 1.0
    for j in tree.inter_set:
        h = tree.effective_channel[j]
        w_agg += h.real**2 + h.imag**2
    best = math.inf
    for i in tree.sources:
        subtree_sum = complex(ivas.a_agg[i - 1])
        for j in tree.descendants[i]:
            subtree_sum += complex(ivas.a_agg[j - 1])
        denom = subtree_sum.real**2 + subtree_sum.imag**2
        if denom == 0.0:
            raise DegenerateIvaError(f"subtree aggregate is zero at device {i}")
        h = tree.effective_channel[i]
        gain = h.real**2 + h.imag**2
        a_i = gain * powers[i] / denom
        if i in tree.leaf_set:
            w_i = 0.0
        else:
            w_i = 1.0
            for j in tree.descendants[i] & tree.inter_set:
                w_i += tree.hop_gain_sq(j, i)
        b_i = gain * w_i / denom
        best = min(best, a_i / (snr_linear * w_agg + b_i))
    return best


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(tuple(parts)).generate_state(1)[0])


def _fixed_noise_profile(config: ExperimentConfig, k: int) -> NoiseProfile:
    sigma = {i: config.sigma_sq_default for i in range(1, k + 1)}
    sigma.update({d: v for d, v in config.sigma_sq_overrides.items() if d <= k})
    return NoiseProfile(sigma)


def _ota_noise_profile(config: ExperimentConfig, tree, ivas, powers, snr_db: float) -> NoiseProfile:
    if config.sigma_sq_default is not None:
        return _fixed_noise_profile(config, tree.k)
    level = calibrate_noise_variance(tree, ivas, powers, 10.0 ** (snr_db / 10.0))
    return NoiseProfile.uniform(tree.k, level)


def _digital_noise_profile(
    config: ExperimentConfig, tree: AggregationTree, snr_db: float
) -> NoiseProfile:
    if config.sigma_sq_default is not None:
        return _fixed_noise_profile(config, tree.k)
    gains = [abs(tree.hop_channel(i)) ** 2 for i in tree.sources]
    level = config.power_default * float(np.mean(gains)) / 10.0 ** (snr_db / 10.0)
    return NoiseProfile.uniform(tree.k, level)


def run_trial(config: ExperimentConfig, sweep_index: int, trial: int) -> TrialRecord:
    """One seeded trial: draw topology, channels, IVAs, then score every scheme."""
    if config.snr_db is not None:
        k = config.k
        snr_db = config.snr_db[sweep_index]
    else:
        k = int(config.k_sweep[sweep_index])
        snr_db = config.fixed_snr_db

    # Substreams are keyed by trial (not sweep position), so sweep points are
    # paired: every point sees the same topologies, IVAs, and noise substreams,
    # which makes per-curve trends directly comparable.
    fading = FadingConfig(
        model="rayleigh",
        pathloss_exponent=config.pathloss_exponent,
        reference_gain=config.reference_gain,
    )
    graph = random_geometric_graph(
        k,
        config.radius,
        seed=_derived_seed(config.master_seed, trial, k, _GRAPH_STREAM),
        fading=fading,
    )
    tree = build_mst_prim(graph)
    ivas = sample_ivas(
        config.iva, k, seed=_derived_seed(config.master_seed, trial, k, _IVA_STREAM)
    )
    powers = {i: config.power_default for i in tree.sources}
    powers.update({d: v for d, v in config.power_overrides.items() if d in powers})

    truth_sq = abs(ivas.ground_truth) ** 2
    try:
        noise = _ota_noise_profile(config, tree, ivas, powers, snr_db)
        budget = effective_power_budgets(tree, noise, powers)
        constraints = constraint_set(tree, budget, ivas)
    except (InfeasiblePowerError, DegenerateIvaError):
        return TrialRecord(feasible=False, truth_sq=truth_sq, outcomes={})

    sigma_agg = aggregate_noise_variance(tree, noise)
    digital_noise = _digital_noise_profile(config, tree, snr_db)
    outcomes: dict[str, tuple[float, float, float]] = {}
    for scheme in config.schemes:
        scheme_seed = _derived_seed(config.master_seed, trial, k, _SCHEME_STREAM[scheme])
        iters = 0.0
        if scheme == "common":
            mse = solve_common_coefficient(constraints, ivas, sigma_agg).predicted_mse
            resources = float(tree.levels)
        elif scheme == "unbiased":
            mse = solve_unbiased(constraints, sigma_agg).predicted_mse
            resources = float(tree.levels)
        elif scheme == "rayleigh":
            mse = solve_rayleigh_quotient(constraints, ivas, sigma_agg).predicted_mse
            resources = float(tree.levels)
        elif scheme == "dinkelbach":
            solution = solve_dinkelbach(
                constraints, ivas, sigma_agg, replace(config.dinkelbach, seed=scheme_seed)
            )
            mse = solution.predicted_mse
            resources = float(tree.levels)
            iters = float(solution.iterations)
        else:
            shift, range_max = quantizer_range(config.iva)
            quant = QuantizerConfig(
                q_bits=2 if scheme == "qam4" else 4,
                range_max=range_max,
                randomized=config.quantizer_randomized,
            )
            result = digital_shuffle_mse(
                tree, ivas, quant, powers, digital_noise, trials=1, seed=scheme_seed, shift=shift
            )
            mse = result.normalized_mse * truth_sq
            resources = float(result.resource_blocks)
        outcomes[scheme] = (mse, resources, iters)
    return TrialRecord(feasible=True, truth_sq=truth_sq, outcomes=outcomes)


def _run_trial_star(job: tuple[ExperimentConfig, int, int]) -> TrialRecord:
    return run_trial(*job)


def run_sweep(config: ExperimentConfig) -> list[ResultRow]:
    """All trials for all sweep points, aggregated into one row per (point, scheme)."""
    jobs = [
        (config, sweep_index, trial)
        for sweep_index in range(len(config.sweep_values))
        for trial in range(config.trials)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_trial_star, jobs, chunksize=8))
    else:
        records = [_run_trial_star(job) for job in jobs]

    rows: list[ResultRow] = []
    for sweep_index, sweep_value in enumerate(config.sweep_values):
        chunk = records[sweep_index * config.trials : (sweep_index + 1) * config.trials]
        feasible = [r for r in chunk if r.feasible]
        truth_sq = np.array([r.truth_sq for r in feasible])
        for scheme in config.schemes:
            mses = np.array([r.outcomes[scheme][0] for r in feasible])
            resources = np.array([r.outcomes[scheme][1] for r in feasible])
            iters = np.array([r.outcomes[scheme][2] for r in feasible])
            n = mses.size
            # Normalized MSE is the ratio of expectations E|x-xhat|^2 / E|x|^2;
            # the standard error propagates the numerator's against the
            # (well-estimated) denominator mean.
            denom = float(truth_sq.mean()) if n else math.nan
            rows.append(
                ResultRow(
                    sweep=float(sweep_value),
                    scheme=scheme,
                    nmse_mean=float(mses.mean()) / denom if n else math.nan,
                    nmse_se=(
                        float(mses.std(ddof=1) / math.sqrt(n)) / denom if n >= 2 else 0.0
                    ),
                    resources=float(resources.mean()) if n else math.nan,
                    infeasible_rate=1.0 - n / config.trials,
                    iters=float(iters.mean()) if n else math.nan,
                    seed=config.master_seed,
                )
            )
    return rows


def rows_to_csv(rows: list[ResultRow]) -> str:
    if not rows:
        raise ValueError("no result rows to emit")
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.sweep!r},{r.scheme},{r.nmse_mean!r},{r.nmse_se!r},"
            f"{r.resources!r},{r.infeasible_rate!r},{r.iters!r},{r.seed}"
        )
    return "\n".join(lines) + "\n"


def emit_csv(rows: list[ResultRow], path) -> None:
    text = rows_to_csv(rows)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def parse_csv(path) -> list[ResultRow]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    rows = []
    for ln in lines[1:]:
        sweep, scheme, nmse_mean, nmse_se, resources, infeasible, iters, seed = ln.split(",")
        rows.append(
            ResultRow(
                sweep=float(sweep),
                scheme=scheme,
                nmse_mean=float(nmse_mean),
                nmse_se=float(nmse_se),
                resources=float(resources),
                infeasible_rate=float(infeasible),
                iters=float(iters),
                seed=int(seed),
            )
        )
    return rows


def emit_plot_data(rows: list[ResultRow], path) -> None:
    """Gnuplot-ready blocks, one per scheme, columns sweep/nmse/se/resources."""
    if not rows:
        raise ValueError("no result rows to emit")
    schemes = []
    for r in rows:
        if r.scheme not in schemes:
            schemes.append(r.scheme)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for idx, scheme in enumerate(schemes):
            if idx:
                fh.write("\n\n")
            fh.write(f"# scheme: {scheme}\n")
            fh.write("# sweep nmse_mean nmse_se resources\n")
            for r in rows:
                if r.scheme == scheme:
                    fh.write(f"{r.sweep!r} {r.nmse_mean!r} {r.nmse_se!r} {r.resources!r}\n")


def gamma_tradeoff_curve(
    pmin_over_sigma_db: list[float], sum_abs_sq: float
) -> list[tuple[float, float, float, float]]:
    """Closed-form biased vs unbiased MSE trade-off over a p_min/sigma^2 grid.

    With unit noise variance the biased optimum gives 1/(rho + 1/|sum a|^2),
    the unbiased baseline 1/rho, and their ratio rho/(rho + 1/|sum a|^2).
    """
    rows = []
    for db in pmin_over_sigma_db:
        rho = 10.0 ** (db / 10.0)
        biased = 1.0 / (rho + 1.0 / sum_abs_sq)
        unbiased = 1.0 / rho
        rows.append((float(db), biased, unbiased, biased / unbiased))
    return rows
