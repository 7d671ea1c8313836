"""Transceiver designs minimizing the aggregation MSE under per-source caps.

Four designs are provided: the closed-form common-coefficient optimum, the
unbiased baseline, the general per-source solver built on a parametric
fractional-programming iteration with an SDP inner step, and a generalized
Rayleigh-quotient baseline.

All of them work on a realified problem: stacking real and imaginary parts of
the coefficient vector turns the MSE at the optimal receive factor into a
ratio of quadratics. The rotation applied to the aggregate direction is
conj(sum(a))/|sum(a)|, which makes the misalignment term the squared imaginary
part of the rotated inner product for arbitrary complex aggregates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from .channel import ConstraintSet, DegenerateIvaError
from .protocol import TransceiverDesign
from .sdr import SdrProblem, max_feasible_scale, recover_rank1, solve_sdr

if TYPE_CHECKING:
    from .mapreduce import IvaProfile


class OrientationError(ValueError):
    """The coefficient vector points against the aggregate; negate and retry."""


class DinkelbachConvergenceError(RuntimeError):
    def __init__(self, message: str, xi_trace: list[float]):
        super().__init__(message)
        self.xi_trace = list(xi_trace)


@dataclass(frozen=True)
class RealifiedProblem:
    """Stacked-real form of the MSE-at-optimal-gamma ratio.

    a1 and a2 read off the real and imaginary parts of the inner product with
    the source aggregates; a3 reads off the imaginary part after rotating by
    ``rotation`` = conj(sum(a))/|sum(a)|.
    """

    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    caps: np.ndarray
    sigma_sq: float
    rotation: complex
    source_sum: complex
    source: np.ndarray

    @property
    def m(self) -> int:
        return self.caps.size

    @property
    def sum_abs_sq(self) -> float:
        return self.source_sum.real**2 + self.source_sum.imag**2


@dataclass(frozen=True)
class SchemeSolution:
    design: TransceiverDesign
    predicted_mse: float


@dataclass(frozen=True)
class DinkelbachOptions:
    tolerance: float = 1e-6
    max_iter: int = 50
    randomization_rounds: int = 100
    seed: int = 0
    sdr_tol: float = 1e-8


@dataclass(frozen=True)
class DinkelbachSolution:
    design: TransceiverDesign
    predicted_mse: float
    xi_trace: tuple[float, ...]
    iterations: int
    converged: bool
    history: tuple[tuple[float, float], ...] = field(default=())


def ext_from_complex(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=complex)
    return np.concatenate([eta.real, eta.imag])


def complex_from_ext(eta_ext: np.ndarray) -> np.ndarray:
    m = eta_ext.size // 2
    return eta_ext[:m] + 1j * eta_ext[m:]


def realify_problem(
    constraints: ConstraintSet, ivas: "IvaProfile", sigma_sq: float
) -> RealifiedProblem:
    a = ivas.source_vector
    s = complex(a.sum())
    if abs(s) == 0.0:
        raise DegenerateIvaError("source aggregates sum to zero; rotation undefined")
    rotation = s.conjugate() / abs(s)
    rotated = rotation * a
    return RealifiedProblem(
        a1=np.concatenate([a.real, -a.imag]),
        a2=np.concatenate([a.imag, a.real]),
        a3=np.concatenate([rotated.imag, rotated.real]),
        caps=constraints.caps_array(),
        sigma_sq=float(sigma_sq),
        rotation=rotation,
        source_sum=s,
        source=a,
    )


def mse_ratio(eta_ext: np.ndarray, problem: RealifiedProblem) -> float:
    """The quadratic-over-quadratic objective of the realified problem."""
    num = float(problem.a3 @ eta_ext) ** 2 + problem.sigma_sq
    den = (
        float(problem.a1 @ eta_ext) ** 2
        + float(problem.a2 @ eta_ext) ** 2
        + problem.sigma_sq
    )
    return num / den


def mse_at_optimal_gamma(eta_ext: np.ndarray, problem: RealifiedProblem) -> float:
    """MSE achieved by eta with its own optimal receive factor."""
    return problem.sum_abs_sq * mse_ratio(eta_ext, problem)


def optimal_gamma_scalar(eta: float, ivas: "IvaProfile", sigma_sq: float) -> float:
    """Optimal receive factor for a common positive transmit coefficient."""
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    s = complex(ivas.source_vector.sum())
    s_abs_sq = abs(s) ** 2
    if s_abs_sq == 0.0:
        raise DegenerateIvaError("source aggregates sum to zero")
    return eta + sigma_sq / (eta * s_abs_sq)


def optimal_gamma_vector(eta: np.ndarray, ivas: "IvaProfile", sigma_sq: float) -> float:
    """Optimal receive factor under a general coefficient vector.

    Requires the inner product with the aggregates to point along the total
    aggregate; callers negate eta on an OrientationError (the MSE at the
    optimal factor is invariant under the sign flip).
    """
    a = ivas.source_vector
    u = complex(np.asarray(eta, dtype=complex) @ a)
    s = complex(a.sum())
    denom = (u * s.conjugate()).real
    if denom <= 0:
        raise OrientationError(
            f"Re(eta^T a * conj(sum a)) = {denom:g} is not positive; negate eta"
        )
    return (abs(u) ** 2 + sigma_sq) / denom


def solve_common_coefficient(
    constraints: ConstraintSet, ivas: "IvaProfile", sigma_sq: float
) -> SchemeSolution:
    """Closed-form optimum when every source uses the same real coefficient.

    The common coefficient is the root of the smallest per-source cap; the
    receive factor trades misalignment against noise amplification.
    """
    p_min = constraints.p_min
    eta = float(np.sqrt(p_min))
    gamma = optimal_gamma_scalar(eta, ivas, sigma_sq)
    m = len(constraints.caps)
    s_abs_sq = abs(complex(ivas.source_vector.sum())) ** 2
    predicted = sigma_sq / (p_min + sigma_sq / s_abs_sq)
    design = TransceiverDesign(eta=np.full(m, eta, dtype=complex), gamma=gamma)
    return SchemeSolution(design=design, predicted_mse=predicted)


def solve_unbiased(constraints: ConstraintSet, sigma_sq: float) -> SchemeSolution:
    """Unbiased baseline: transmit coefficient equals the receive factor."""
    p_min = constraints.p_min
    eta = float(np.sqrt(p_min))
    m = len(constraints.caps)
    design = TransceiverDesign(eta=np.full(m, eta, dtype=complex), gamma=eta)
    return SchemeSolution(design=design, predicted_mse=sigma_sq / p_min)


def _aligned_full_power(problem: RealifiedProblem) -> TransceiverDesign:
    """Phase-aligned full-power design; exact optimum when sigma_sq == 0."""
    a = problem.source
    caps = problem.caps
    eta = np.zeros(problem.m, dtype=complex)
    radius = 0.0
    unit_sum = problem.source_sum / abs(problem.source_sum)
    for i in range(problem.m):
        mag = abs(a[i])
        if mag == 0.0:
            continue
        eta[i] = np.sqrt(caps[i]) * (a[i].conjugate() / mag) * unit_sum
        radius += np.sqrt(caps[i]) * mag
    gamma = radius / abs(problem.source_sum)
    return TransceiverDesign(eta=eta, gamma=gamma)


def _oriented_design(
    eta_ext: np.ndarray, problem: RealifiedProblem, ivas: "IvaProfile"
) -> TransceiverDesign:
    eta = complex_from_ext(eta_ext)
    try:
        gamma = optimal_gamma_vector(eta, ivas, problem.sigma_sq)
    except OrientationError:
        eta = -eta
        gamma = optimal_gamma_vector(eta, ivas, problem.sigma_sq)
    return TransceiverDesign(eta=eta, gamma=gamma)


def _derived_seed(seed: int, t: int) -> int:
    return int(np.random.SeedSequence((seed, t)).generate_state(1)[0])


def solve_dinkelbach(
    constraints: ConstraintSet,
    ivas: "IvaProfile",
    sigma_sq: float,
    options: DinkelbachOptions = DinkelbachOptions(),
) -> DinkelbachSolution:
    """General per-source solver via parametric reformulation of the MSE ratio.

    Each iteration fixes the level parameter xi at the current ratio, solves
    the indefinite quadratic minimization over the cap set through its SDP
    relaxation plus rank-1 recovery, and keeps the incumbent when recovery
    does not improve the quadratic form, which makes the xi sequence
    non-increasing by construction. Stops when the decrease falls below the
    tolerance.
    """
    problem = realify_problem(constraints, ivas, sigma_sq)
    if sigma_sq == 0.0:
        design = _aligned_full_power(problem)
        return DinkelbachSolution(
            design=design,
            predicted_mse=0.0,
            xi_trace=(0.0,),
            iterations=0,
            converged=True,
        )

    gram = np.outer(problem.a1, problem.a1) + np.outer(problem.a2, problem.a2)
    eta_ext = ext_from_complex(solve_common_coefficient(constraints, ivas, sigma_sq).design.eta)
    xi = mse_ratio(eta_ext, problem)
    xi_trace = [xi]
    history: list[tuple[float, float]] = []
    converged = False
    iterations = 0

    for t in range(options.max_iter):
        iterations = t + 1
        b = np.outer(problem.a3, problem.a3) - xi * gram
        sdr_problem = SdrProblem(b_matrix=b, caps=problem.caps)
        solution = solve_sdr(sdr_problem, tol=options.sdr_tol)
        candidate = recover_rank1(
            solution,
            sdr_problem,
            rounds=options.randomization_rounds,
            seed=_derived_seed(options.seed, t),
        )
        # The incumbent's quadratic value is -(1 - xi) * sigma^2 by the
        # definition of xi; using the identity instead of the rounded float
        # form keeps the xi sequence non-increasing on badly scaled instances.
        incumbent_val = -(1.0 - xi) * sigma_sq
        candidate_val = float(candidate @ b @ candidate)
        if candidate_val < incumbent_val:
            eta_ext = candidate
        new_xi = mse_ratio(eta_ext, problem)
        history.append((new_xi, min(candidate_val, incumbent_val)))
        xi_trace.append(new_xi)
        if xi - new_xi < options.tolerance:
            xi = new_xi
            converged = True
            break
        xi = new_xi

    if not converged:
        raise DinkelbachConvergenceError(
            f"no convergence within {options.max_iter} iterations", xi_trace
        )

    design = _oriented_design(eta_ext, problem, ivas)
    from .protocol import analytic_mse

    return DinkelbachSolution(
        design=design,
        predicted_mse=analytic_mse(design, ivas, sigma_sq),
        xi_trace=tuple(xi_trace),
        iterations=iterations,
        converged=True,
        history=tuple(history),
    )


def solve_rayleigh_quotient(
    constraints: ConstraintSet, ivas: "IvaProfile", sigma_sq: float
) -> SchemeSolution:
    """Per-source baseline from a generalized eigenproblem at a fixed norm.

    The direction is the smallest generalized eigenvector of the
    ridge-regularized numerator/denominator pair with the norm presumed to be
    (K-1) times the smallest cap; the vector is then rescaled by the largest
    factor that keeps every per-source cap satisfied.
    """
    problem = realify_problem(constraints, ivas, sigma_sq)
    from .protocol import analytic_mse

    if sigma_sq == 0.0:
        design = _aligned_full_power(problem)
        return SchemeSolution(design=design, predicted_mse=0.0)

    ridge = sigma_sq / (problem.m * constraints.p_min)
    eye = np.eye(2 * problem.m)
    num = np.outer(problem.a3, problem.a3) + ridge * eye
    den = (
        np.outer(problem.a1, problem.a1)
        + np.outer(problem.a2, problem.a2)
        + ridge * eye
    )
    _, vectors = scipy.linalg.eigh(num, den)
    direction = vectors[:, 0]
    direction = direction / np.linalg.norm(direction)
    beta = max_feasible_scale(direction, problem.caps)
    eta_ext = beta * direction
    design = _oriented_design(eta_ext, problem, ivas)
    return SchemeSolution(design=design, predicted_mse=analytic_mse(design, ivas, sigma_sq))
