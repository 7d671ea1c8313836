"""Dense semidefinite relaxation solver with rank-1 recovery.

Solves min tr(B X) over PSD X subject to paired-diagonal caps
X[i,i] + X[i+m,i+m] <= c_i. The solver is a feasible primal-dual
path-following interior-point method: the primal iterate (X, slacks) and the
dual iterate (lam, S = B + diag([lam; lam])) start strictly feasible and every
step preserves feasibility exactly, so the duality gap is driven below the
tolerance directly. Rank-1 solutions are extracted by eigendecomposition or,
for higher rank, Gaussian randomization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

_FEAS_SHRINK = 1.0 - 1e-12  # guards cap feasibility against rounding


class SdrSolverError(RuntimeError):
    """The interior-point iteration could not reach the requested gap."""

    def __init__(self, message: str, relative_gap: float | None = None):
        super().__init__(message)
        self.relative_gap = relative_gap


@dataclass(frozen=True)
class SdrProblem:
    """Symmetric objective matrix and positive paired-diagonal caps."""

    b_matrix: np.ndarray
    caps: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b_matrix, dtype=float)
        c = np.asarray(self.caps, dtype=float)
        m = c.size
        if b.shape != (2 * m, 2 * m):
            raise ValueError(f"b_matrix must be {2 * m}x{2 * m} for {m} caps, got {b.shape}")
        if not np.allclose(b, b.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(b).max()))):
            raise ValueError("b_matrix must be symmetric")
        if np.any(c <= 0):
            raise ValueError("all caps must be positive")
        b = 0.5 * (b + b.T)
        b.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "b_matrix", b)
        object.__setattr__(self, "caps", c)

    @property
    def m(self) -> int:
        return self.caps.size

    @property
    def dim(self) -> int:
        return 2 * self.m


@dataclass(frozen=True)
class SdrSolution:
    x_matrix: np.ndarray
    objective: float
    dual_objective: float
    relative_gap: float
    dual_variables: np.ndarray
    iterations: int


def pair_loads(x: np.ndarray, m: int) -> np.ndarray:
    d = np.diag(x)
    return d[:m] + d[m:]


def _pair_collapse(z: np.ndarray, m: int) -> np.ndarray:
    """Collapse an n x n matrix onto the m x m pair structure by block sums."""
    return z[:m, :m] + z[:m, m:] + z[m:, :m] + z[m:, m:]


def _max_psd_step(z: np.ndarray, dz: np.ndarray) -> float:
    """Largest alpha keeping z + alpha*dz PSD, for z strictly PSD."""
    chol = np.linalg.cholesky(z)
    w = scipy.linalg.solve_triangular(chol, dz, lower=True)
    w = scipy.linalg.solve_triangular(chol, w.T, lower=True)
    wmin = float(np.linalg.eigvalsh(0.5 * (w + w.T))[0])
    return math.inf if wmin >= 0.0 else 1.0 / (-wmin)


def _max_pos_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-v[neg] / dv[neg]))


def solve_sdr(problem: SdrProblem, tol: float = 1e-8, max_iter: int = 300) -> SdrSolution:
    """Primal-feasible solution with relative duality gap at most ``tol``."""
    m, n = problem.m, problem.dim
    # Absorb the caps into the coordinates so every cap is 1; heavily skewed
    # caps (multihop channel products) would otherwise stall the Newton steps.
    diag_scale = np.sqrt(np.concatenate([problem.caps, problem.caps]))
    b_scaled = problem.b_matrix * diag_scale[:, None] * diag_scale[None, :]
    beta = float(np.linalg.norm(b_scaled, 2))
    beta = beta if beta > 0 else 1.0
    b = b_scaled / beta
    c = np.ones(m)

    # Strictly feasible start on both sides: pair loads of tau*I are 2*tau.
    tau = 0.4
    x = tau * np.eye(n)
    s = c - 2.0 * tau
    lam = np.full(m, 2.0)  # S = b + diag >= I since ||b||_2 = 1

    sigma = 0.2
    gap_rel = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        s_mat = b.copy()
        idx = np.arange(n)
        s_mat[idx, idx] += np.concatenate([lam, lam])
        primal = float(np.sum(b * x))
        dual = -float(c @ lam)
        gap = primal - dual
        gap_rel = gap / (1.0 + abs(primal) + abs(dual))
        if gap_rel <= 0.5 * tol:
            break

        chol = np.linalg.cholesky(s_mat)
        s_inv = scipy.linalg.cho_solve((chol, True), np.eye(n))
        s_inv = 0.5 * (s_inv + s_inv.T)
        mu = sigma * gap / (n + m)

        coeff = _pair_collapse(x * s_inv, m) + np.diag(s / lam)
        rhs = mu * (pair_loads(s_inv, m) + 1.0 / lam) - c
        try:
            dlam = np.linalg.solve(coeff, rhs)
        except np.linalg.LinAlgError as exc:
            raise SdrSolverError(f"Newton system singular at iteration {iterations}") from exc
        dvec = np.concatenate([dlam, dlam])
        m_raw = mu * s_inv - x - (x * dvec[None, :]) @ s_inv
        dx = 0.5 * (m_raw + m_raw.T)
        ds = (mu - s * lam - s * dlam) / lam

        alpha_p = 0.98 * min(1.0 / 0.98, _max_psd_step(x, dx), _max_pos_step(s, ds))
        d_smat = np.diag(dvec)
        alpha_d = 0.98 * min(1.0 / 0.98, _max_psd_step(s_mat, d_smat), _max_pos_step(lam, dlam))
        x = x + alpha_p * dx
        s = s + alpha_p * ds
        lam = lam + alpha_d * dlam
        # Kill feasibility drift; the cone steps keep the slacks positive.
        s = np.maximum(c - pair_loads(x, m), 1e-300)

    loads = pair_loads(x, m)
    shrink = min(1.0, _FEAS_SHRINK * float(np.min(c / loads)))
    if shrink < 1.0:
        x = x * shrink
    primal = float(np.sum(b * x))
    dual = -float(c @ lam)
    gap_rel = (primal - dual) / (1.0 + abs(primal) + abs(dual))
    if gap_rel > tol:
        raise SdrSolverError(
            f"no convergence to relative gap {tol:g} within {max_iter} iterations "
            f"(reached {gap_rel:g})",
            relative_gap=gap_rel,
        )
    return SdrSolution(
        x_matrix=x * diag_scale[:, None] * diag_scale[None, :],
        objective=beta * primal,
        dual_objective=beta * dual,
        relative_gap=gap_rel,
        dual_variables=beta * lam / problem.caps,
        iterations=iterations,
    )


def max_feasible_scale(x: np.ndarray, caps: np.ndarray) -> float:
    """Largest d such that d*x satisfies every paired cap; 0 for the zero vector."""
    m = caps.size
    pairs = x[:m] ** 2 + x[m:] ** 2
    active = pairs > 0
    if not np.any(active):
        return 0.0
    return _FEAS_SHRINK * float(np.sqrt(np.min(caps[active] / pairs[active])))


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot] < 0 else v


def recover_rank1(
    solution: SdrSolution,
    problem: SdrProblem,
    rounds: int = 100,
    seed: int = 0,
    rank1_ratio: float = 1e-6,
) -> np.ndarray:
    """Feasible vector approximating the SDR optimum.

    Numerically rank-1 iterates yield the scaled top eigenvector directly;
    otherwise ``rounds`` Gaussian samples with covariance X are scaled to the
    cap boundary and the best of {0, +dx, -dx} per sample is kept.
    """
    x = solution.x_matrix
    b = problem.b_matrix
    caps = problem.caps
    n = problem.dim
    w, u = np.linalg.eigh(x)
    lead = float(w[-1])
    if lead <= 0:
        return np.zeros(n)
    second = float(w[-2]) if n >= 2 else 0.0
    if second <= rank1_ratio * lead:
        v = _canonical_sign(np.sqrt(lead) * u[:, -1])
        scale = max_feasible_scale(v, caps)
        return v * min(1.0, scale) if scale > 0 else np.zeros(n)

    clipped = np.clip(w, 0.0, None)
    clip_mass = float(np.sum(w[w < 0]))
    if clip_mass < 0:
        logger.debug("clipped negative eigenvalue mass %.3e during sampling", clip_mass)
    sqrt_x = u * np.sqrt(clipped)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5D12)))
    best = np.zeros(n)
    best_val = 0.0
    for _ in range(rounds):
        sample = sqrt_x @ rng.standard_normal(n)
        d = max_feasible_scale(sample, caps)
        if d == 0.0:
            continue
        for cand in (d * sample, -d * sample):
            val = float(cand @ b @ cand)
            if val < best_val:
                best = cand
                best_val = val
    return best
