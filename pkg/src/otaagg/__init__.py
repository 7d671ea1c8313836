"""Multi-level over-the-air aggregation over multihop D2D wireless networks."""

from .channel import (
    ConstraintSet,
    DegenerateChannelError,
    DegenerateIvaError,
    FadingConfig,
    InfeasiblePowerError,
    NoiseProfile,
    PowerBudget,
    aggregate_noise_variance,
    constraint_set,
    draw_channels,
    effective_power_budgets,
)
from .digital import (
    DigitalShuffleResult,
    QamConstellation,
    QuantizerConfig,
    digital_shuffle_mse,
    quantize,
    relay_transmit,
    resource_block_count,
)
from .experiments import (
    ExperimentConfig,
    ResultRow,
    emit_csv,
    emit_plot_data,
    gamma_tradeoff_curve,
    parse_csv,
    run_sweep,
    run_trial,
)
from .mapreduce import (
    ComplexGaussianIva,
    IvaProfile,
    NomographicTask,
    PartitionError,
    UniformIva,
    parse_iva_spec,
    partial_aggregate,
    sample_ivas,
    weighted_averages,
)
from .protocol import (
    ProtocolTrace,
    TransceiverDesign,
    analytic_mse,
    export_trace,
    measure_power,
    simulate_aggregation,
)
from .sdr import SdrProblem, SdrSolution, SdrSolverError, recover_rank1, solve_sdr
from .topology import (
    AggregationTree,
    ChannelGraph,
    DisconnectedGraphError,
    TopologyGenerationError,
    build_mst_kruskal,
    build_mst_prim,
    random_geometric_graph,
    read_graph,
    write_graph,
)
from .transceivers import (
    DinkelbachConvergenceError,
    DinkelbachOptions,
    DinkelbachSolution,
    OrientationError,
    RealifiedProblem,
    SchemeSolution,
    mse_at_optimal_gamma,
    optimal_gamma_scalar,
    optimal_gamma_vector,
    realify_problem,
    solve_common_coefficient,
    solve_dinkelbach,
    solve_rayleigh_quotient,
    solve_unbiased,
)

__version__ = "0.1.0"
