"""Constant-rank elimination problems (CREPs) and their condition numbers.

A CREP is a smooth system ``F(x, y, z) = c`` solved for the output ``y``
given the input ``x``, with a latent variable ``z`` that is needed for
feasibility but is not part of the reported solution.  The class is
characterised by two constant-rank hypotheses: the rank of the full
Jacobian equals the rank of the partial Jacobian with respect to ``(y, z)``
everywhere, and the partial Jacobian with respect to ``z`` has constant
rank.  Under these hypotheses a canonical local solution map ``H`` exists
(it returns the feasible ``y`` nearest to the reference output), and the
condition number of ``y`` is the operator norm of its derivative ``DH``.

This module provides:

* runtime rank certificates for the constant-rank hypotheses, checked at a
  reference solution and at sampled nearby solutions;
* ``DH`` via an orthogonal elimination pipeline (:func:`solution_map_derivative`)
  and via an independent minimum-norm characterisation
  (:func:`solution_map_derivative_minnorm`), which agree on every certified
  instance;
* the special case without latent variables (:func:`fcre_solution_derivative`),
  where ``DH`` is a pseudoinverse formula;
* the three condition numbers kappa_y, kappa_z and kappa_yz, where solving
  for the pair ``(y, z)`` is always at least as ill-conditioned as solving
  for either variable alone.

All Jacobians are expressed in tangent-chart coordinates: orthonormal bases
of the tangent spaces of the input and output manifolds (so chart norms are
the ambient Frobenius norms), and a basis of the latent tangent space that
defaults to orthonormal but whose choice provably does not affect ``DH``.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import (
    as_matrix,
    complement_basis,
    default_rtol,
    kernel_basis,
    min_norm_solve,
    numerical_rank,
    orthonormalize,
    spectral_norm,
)

__all__ = [
    "CertificationError",
    "ConditionReport",
    "CrepDims",
    "CrepPoint",
    "CrepProblem",
    "JacobianBlocks",
    "RankCertificate",
    "RankHypothesisError",
    "TangentChart",
    "certify_crep",
    "chart_blocks",
    "condition_numbers",
    "condition_numbers_from_blocks",
    "defining_equation_residuals",
    "evaluate_blocks",
    "fcre_solution_derivative",
    "inject_rhs_sign_fault",
    "make_crep_point",
    "solution_map_derivative",
    "solution_map_derivative_minnorm",
]


class RankHypothesisError(ValueError):
    """A constant-rank hypothesis required by the computation is violated."""


class CertificationError(RuntimeError):
    """A computation that requires a certified point got a failed certificate."""


@dataclass(frozen=True)
class TangentChart:
    """An orthonormal basis of a tangent space, in ambient coordinates.

    ``basis`` is ``ambient_dim x intrinsic_dim`` with orthonormal columns;
    chart coordinates of an ambient tangent vector ``v`` are ``basis.T @ v``.
    """

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis, "basis")
        if b.shape[0] != self.ambient_dim:
            raise ValueError(f"basis has {b.shape[0]} rows, ambient dimension is {self.ambient_dim}")
        if b.size and np.linalg.norm(b.T @ b - np.eye(b.shape[1]), 2) > 1e-10:
            raise ValueError("chart basis does not have orthonormal columns")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def full(cls, dim: int) -> "TangentChart":
        """Identity chart of a flat space."""
        return cls(ambient_dim=dim, basis=np.eye(dim))


class CrepDims(tuple):
    """Intrinsic dimensions ``(dim_x, dim_y, dim_z, n_residual)``."""

    def __new__(cls, dim_x: int, dim_y: int, dim_z: int, n_residual: int):
        return super().__new__(cls, (int(dim_x), int(dim_y), int(dim_z), int(n_residual)))

    dim_x = property(lambda self: self[0])
    dim_y = property(lambda self: self[1])
    dim_z = property(lambda self: self[2])
    n_residual = property(lambda self: self[3])


def _flat_retract(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    return p + v


@dataclass
class CrepProblem:
    """An equation system ``F(x, y, z) = c`` with evaluators and charts.

    ``residual(x, y, z)`` returns ``F(x, y, z) - c`` as a vector of length
    ``dims.n_residual``; ``jacobian(x, y, z)`` returns the three ambient
    partial-derivative matrices.  The chart providers return a
    :class:`TangentChart` of the respective manifold at the given point.
    Retractions map an ambient tangent displacement back to the manifold
    and default to flat addition.

    Evaluators must be pure (safe for concurrent invocation); ``scale`` is
    a characteristic magnitude of the reference data used to set default
    solver and sampling tolerances.
    """

    name: str
    dims: CrepDims
    residual: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
    x_chart: Callable[[np.ndarray, np.ndarray, np.ndarray], TangentChart]
    y_chart: Callable[[np.ndarray, np.ndarray, np.ndarray], TangentChart]
    z_chart: Callable[[np.ndarray, np.ndarray, np.ndarray], TangentChart]
    x_retract: Callable[[np.ndarray, np.ndarray], np.ndarray] = _flat_retract
    y_retract: Callable[[np.ndarray, np.ndarray], np.ndarray] = _flat_retract
    z_retract: Callable[[np.ndarray, np.ndarray], np.ndarray] = _flat_retract
    scale: float = 1.0


@dataclass(frozen=True)
class CrepPoint:
    """A particular solution ``(x0, y0, z0)`` in ambient coordinates.

    ``feas_tol`` is the recorded feasibility tolerance; ``residual_norm``
    is the achieved residual at construction time.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    feas_tol: float
    residual_norm: float = 0.0


def make_crep_point(problem: CrepProblem, x, y, z, feas_tol: float | None = None) -> CrepPoint:
    """Validate feasibility of ``(x, y, z)`` and record it as a :class:`CrepPoint`."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    if feas_tol is None:
        feas_tol = 1e-9 * problem.scale
    rnorm = float(np.linalg.norm(problem.residual(x, y, z)))
    if rnorm > feas_tol:
        raise ValueError(f"point is not feasible: residual {rnorm:.3e} exceeds feas_tol {feas_tol:.3e}")
    return CrepPoint(x=x, y=y, z=z, feas_tol=feas_tol, residual_norm=rnorm)


@dataclass(frozen=True)
class JacobianBlocks:
    """Partial derivatives of ``F`` at a solution, in chart coordinates."""

    j_x: np.ndarray
    j_y: np.ndarray
    j_z: np.ndarray

    def __post_init__(self):
        j_x = as_matrix(self.j_x, "j_x")
        j_y = as_matrix(self.j_y, "j_y")
        j_z = as_matrix(self.j_z, "j_z")
        if not (j_x.shape[0] == j_y.shape[0] == j_z.shape[0]):
            raise ValueError("blocks must share the residual dimension")
        object.__setattr__(self, "j_x", j_x)
        object.__setattr__(self, "j_y", j_y)
        object.__setattr__(self, "j_z", j_z)

    @property
    def n_residual(self) -> int:
        return self.j_x.shape[0]

    def swap_outputs(self) -> "JacobianBlocks":
        """Blocks for the problem with the roles of output and latent reversed."""
        return JacobianBlocks(j_x=self.j_x, j_y=self.j_z, j_z=self.j_y)


def chart_blocks(problem: CrepProblem, x, y, z) -> JacobianBlocks:
    """Ambient Jacobians at ``(x, y, z)`` projected into chart coordinates."""
    ambient = problem.jacobian(x, y, z)
    cx = problem.x_chart(x, y, z)
    cy = problem.y_chart(x, y, z)
    cz = problem.z_chart(x, y, z)
    projected = []
    for mat, chart, label in zip(ambient, (cx, cy, cz), "xyz"):
        mat = as_matrix(mat, f"ambient jacobian ({label})")
        if mat.shape != (problem.dims.n_residual, chart.ambient_dim):
            raise ValueError(
                f"ambient jacobian ({label}) has shape {mat.shape}, expected "
                f"({problem.dims.n_residual}, {chart.ambient_dim})"
            )
        projected.append(mat @ chart.basis)
    blocks = JacobianBlocks(j_x=projected[0], j_y=projected[1], j_z=projected[2])
    expect = (problem.dims.dim_x, problem.dims.dim_y, problem.dims.dim_z)
    got = (blocks.j_x.shape[1], blocks.j_y.shape[1], blocks.j_z.shape[1])
    if got != expect:
        raise ValueError(f"chart dimensions {got} do not match declared dims {expect}")
    return blocks


def evaluate_blocks(problem: CrepProblem, point: CrepPoint) -> JacobianBlocks:
    """Chart-coordinate Jacobian blocks at a feasible point."""
    rnorm = float(np.linalg.norm(problem.residual(point.x, point.y, point.z)))
    if rnorm > point.feas_tol:
        raise ValueError(f"point is not feasible: residual {rnorm:.3e} exceeds feas_tol {point.feas_tol:.3e}")
    return chart_blocks(problem, point.x, point.y, point.z)


# ---------------------------------------------------------------------------
# Solution-map derivative.

# Self-test hook: when enabled, the sign of the right-hand side of the
# elimination system is flipped, which corrupts DH while preserving its
# norm.  The verification suite uses this to confirm that the defining
# equation residuals actually catch a miscomputed derivative.
_FAULT_FLIP_RHS = False


@contextlib.contextmanager
def inject_rhs_sign_fault():
    """Context manager that deliberately corrupts :func:`solution_map_derivative`."""
    global _FAULT_FLIP_RHS
    _FAULT_FLIP_RHS = True
    try:
        yield
    finally:
        _FAULT_FLIP_RHS = False


def solution_map_derivative(blocks: JacobianBlocks, rtol: float | None = None) -> np.ndarray:
    """Derivative ``DH`` of the canonical solution map, by orthogonal elimination.

    The latent block is eliminated by restricting the linearised system to
    the orthogonal complement of its column span, and the solution is made
    unique by requiring it to be orthogonal to the output-projection of the
    kernel of ``[j_y  j_z]``:

        q  = orthonormal basis of span(j_z)-perp
        u_y = output rows of an orthonormal kernel basis of [j_y  j_z]
        [q.T j_y; u_y.T] @ DH = [-q.T j_x; 0]

    The stacked coefficient matrix always has full column rank when the
    constant-rank hypotheses hold, so any left inverse gives the same DH;
    a rank-deficient stack signals a violated hypothesis and raises
    :class:`RankHypothesisError`.

    Conditioning caveat: the elimination splits span(j_z) from the joint
    span, so when a direction of j_z lies within distance delta of the
    span of j_y the stacked system has a singular value of order delta
    even though DH itself may be perfectly conditioned.  For delta near
    roundoff the consistency check then fails with
    :class:`crepcond.linalg.InconsistentSystemError`; the min-norm route
    (:func:`solution_map_derivative_minnorm`) does not involve this split
    and stays robust on such instances.
    """
    j_x, j_y, j_z = blocks.j_x, blocks.j_y, blocks.j_z
    dim_x, dim_y = j_x.shape[1], j_y.shape[1]
    if dim_y == 0:
        return np.zeros((0, dim_x))
    q = complement_basis(j_z, rtol)
    kern = kernel_basis(np.hstack([j_y, j_z]), rtol)
    u_y = kern[:dim_y, :]
    a = np.vstack([q.T @ j_y, u_y.T])
    decision = numerical_rank(a, rtol)
    if decision.rank < dim_y:
        raise RankHypothesisError(
            f"elimination system is rank deficient ({decision.rank} < {dim_y}); "
            "the constant-rank hypotheses do not hold at this point"
        )
    rhs_top = -(q.T @ j_x)
    if _FAULT_FLIP_RHS:
        rhs_top = -rhs_top
    rhs = np.vstack([rhs_top, np.zeros((u_y.shape[1], dim_x))])
    scale = spectral_norm(j_x) + spectral_norm(j_y) + spectral_norm(j_z)
    return min_norm_solve(a, rhs, rtol, scale=scale)


def solution_map_derivative_minnorm(blocks: JacobianBlocks, rtol: float | None = None) -> np.ndarray:
    """``DH`` via its minimum-norm characterisation; an independent oracle.

    For each input direction, ``DH`` maps to the solution component of
    minimum output norm among all ``(dy, dz)`` with
    ``j_y dy + j_z dz = -j_x dx`` (the norm is taken over ``dy`` only).
    The affine solution set is parameterised by a particular minimum-norm
    solution plus the kernel of ``[j_y  j_z]``; the minimiser is obtained
    by projecting the particular solution's output component onto the
    orthogonal complement of the output-projection of that kernel.
    """
    j_x, j_y, j_z = blocks.j_x, blocks.j_y, blocks.j_z
    dim_x, dim_y = j_x.shape[1], j_y.shape[1]
    if dim_y == 0:
        return np.zeros((0, dim_x))
    j_yz = np.hstack([j_y, j_z])
    scale = spectral_norm(j_x) + spectral_norm(j_yz)
    try:
        particular = min_norm_solve(j_yz, -j_x, rtol, scale=scale)
    except ValueError as exc:
        raise RankHypothesisError(f"linearised system is inconsistent: {exc}") from exc
    y_part = particular[:dim_y, :]
    kern = kernel_basis(j_yz, rtol)
    k_y = kern[:dim_y, :]
    b = orthonormalize(k_y, rtol)
    return y_part - b @ (b.T @ y_part)


def fcre_solution_derivative(j_x, j_y, rtol: float | None = None) -> np.ndarray:
    """Solution-map derivative for a problem without latent variables.

    Requires the feasibility rank condition ``rank [j_x j_y] = rank j_y``
    and returns ``-pinv(j_y) @ j_x``, the minimum-norm solution of
    ``j_y @ DH = -j_x``.
    """
    j_x = as_matrix(j_x, "j_x")
    j_y = as_matrix(j_y, "j_y")
    if j_x.shape[0] != j_y.shape[0]:
        raise ValueError("j_x and j_y must share the residual dimension")
    rank_y = numerical_rank(j_y, rtol).rank
    rank_all = numerical_rank(np.hstack([j_x, j_y]), rtol).rank
    if rank_all != rank_y:
        raise RankHypothesisError(
            f"rank [j_x j_y] = {rank_all} differs from rank j_y = {rank_y}; "
            "the system is not feasible for all input directions"
        )
    scale = spectral_norm(j_x) + spectral_norm(j_y)
    return min_norm_solve(j_y, -j_x, rtol, scale=scale)


def defining_equation_residuals(blocks: JacobianBlocks, dh, rtol: float | None = None) -> tuple[float, float, float]:
    """Residuals of the two defining equations of ``DH`` plus their scale.

    Returns ``(feasibility, orthogonality, scale)`` where feasibility is
    ``||q.T (j_x + j_y dh)||``, orthogonality is ``||u_y.T dh||`` and
    ``scale = ||j_x|| + ||j_y|| ||dh||``.  Both residuals vanish for the
    true solution-map derivative.
    """
    dh = as_matrix(dh, "dh")
    q = complement_basis(blocks.j_z, rtol)
    kern = kernel_basis(np.hstack([blocks.j_y, blocks.j_z]), rtol)
    u_y = kern[: blocks.j_y.shape[1], :]
    feas = spectral_norm(q.T @ (blocks.j_x + blocks.j_y @ dh))
    orth = spectral_norm(u_y.T @ dh)
    scale = spectral_norm(blocks.j_x) + spectral_norm(blocks.j_y) * spectral_norm(dh)
    return feas, orth, scale


# ---------------------------------------------------------------------------
# Rank certificates.


@dataclass(frozen=True)
class RankCertificate:
    """Result of checking the constant-rank hypotheses at sampled solutions.

    ``r`` is the common rank of the full Jacobian and of ``[j_y j_z]``;
    ``k`` the rank of ``j_z``.  ``fragile`` flags a singular-value gap
    around some rank cut below 10x the tolerance, meaning the certificate
    is sensitive to the tolerance choice.
    """

    r: int
    k: int
    rank_df: int
    nullity_yz: int
    samples_checked: int
    resolve_failures: int
    tolerance: float
    passed: bool
    fragile: bool
    min_gap: float
    messages: tuple[str, ...] = ()


def _rank_checks(blocks: JacobianBlocks, dims: CrepDims, rtol: float):
    df = np.hstack([blocks.j_x, blocks.j_y, blocks.j_z])
    j_yz = np.hstack([blocks.j_y, blocks.j_z])
    d_df = numerical_rank(df, rtol)
    d_yz = numerical_rank(j_yz, rtol)
    d_z = numerical_rank(blocks.j_z, rtol)
    r = d_yz.rank
    k = d_z.rank
    nullity_yz = dims.dim_y + dims.dim_z - r
    nullity_df = dims.dim_x + dims.dim_y + dims.dim_z - d_df.rank
    problems = []
    if d_df.rank != r:
        problems.append(f"rank DF = {d_df.rank} differs from rank [j_y j_z] = {r}")
    if nullity_df != dims.dim_x + nullity_yz:
        problems.append(
            f"nullity DF = {nullity_df} differs from dim_x + nullity [j_y j_z] = {dims.dim_x + nullity_yz}"
        )
    gap = min(d.gap_at_cut() for d in (d_df, d_yz, d_z))
    return r, k, d_df.rank, nullity_yz, gap, problems


def certify_crep(
    problem: CrepProblem,
    point: CrepPoint,
    n_samples: int = 4,
    radius: float | None = None,
    seed: int = 0,
    rtol: float | None = None,
    solver_tol: float | None = None,
) -> RankCertificate:
    """Certify the constant-rank hypotheses at ``point`` and nearby solutions.

    Nearby solutions are produced by perturbing the input inside its
    tangent chart (radius defaults to ``1e-4 * problem.scale``), retracting,
    and re-solving for ``(y, z)`` with the constrained resolver.  The
    certificate fails if any rank check fails, if the ranks vary across
    samples, or if no perturbed sample could be re-solved.  Re-solve
    failures are counted and the sample is skipped.
    """
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    if radius is None:
        radius = 1e-4 * problem.scale
    dims = problem.dims
    if rtol is None:
        rtol = default_rtol((dims.n_residual, dims.dim_x + dims.dim_y + dims.dim_z))

    blocks0 = evaluate_blocks(problem, point)
    r0, k0, rank_df0, nullity0, gap0, messages = _rank_checks(blocks0, dims, rtol)
    min_gap = gap0
    tolerance_abs = rtol * max(
        spectral_norm(np.hstack([blocks0.j_x, blocks0.j_y, blocks0.j_z])), 1e-300
    )

    from . import empirical  # deferred: empirical builds on this module

    cx = problem.x_chart(point.x, point.y, point.z)
    samples_checked = 0
    resolve_failures = 0
    for i in range(n_samples):
        rng = np.random.default_rng((seed, i))
        direction = rng.standard_normal(dims.dim_x)
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            direction = np.ones(dims.dim_x)
            norm = float(np.linalg.norm(direction))
        x_pert = problem.x_retract(point.x, cx.basis @ (radius * direction / norm))
        result = empirical.constrained_nearest_solution(
            problem, point, x_pert, solver_tol=solver_tol
        )
        if not result.converged:
            resolve_failures += 1
            messages.append(f"sample {i}: re-solve failed ({result.message})")
            continue
        blocks_i = chart_blocks(problem, x_pert, result.y, result.z)
        r_i, k_i, rank_df_i, _, gap_i, problems_i = _rank_checks(blocks_i, dims, rtol)
        min_gap = min(min_gap, gap_i)
        samples_checked += 1
        for msg in problems_i:
            messages.append(f"sample {i}: {msg}")
        if (r_i, k_i) != (r0, k0):
            messages.append(f"sample {i}: ranks (r={r_i}, k={k_i}) differ from reference (r={r0}, k={k0})")

    if n_samples > 0 and samples_checked == 0:
        messages.append("no perturbed sample could be re-solved; constancy not verifiable")
    passed = not messages
    return RankCertificate(
        r=r0,
        k=k0,
        rank_df=rank_df0,
        nullity_yz=nullity0,
        samples_checked=samples_checked,
        resolve_failures=resolve_failures,
        tolerance=tolerance_abs,
        passed=passed,
        fragile=bool(min_gap < 10.0 * tolerance_abs),
        min_gap=float(min_gap),
        messages=tuple(messages),
    )


# ---------------------------------------------------------------------------
# Condition numbers.


@dataclass(frozen=True)
class ConditionReport:
    """Condition numbers of a CREP at a certified solution.

    ``kappa_y`` is the spectral norm of ``dh``; ``kappa_z`` swaps the roles
    of output and latent variable; ``kappa_yz`` treats the pair ``(y, z)``
    as the output with a trivial latent space.  When the certificate
    failed, the kappa values and ``dh`` are ``None`` (the condition number
    is undefined without the constant-rank hypotheses).
    """

    kappa_y: float | None
    kappa_z: float | None
    kappa_yz: float | None
    dh: np.ndarray | None
    certificate: RankCertificate


def condition_numbers_from_blocks(
    blocks: JacobianBlocks, rtol: float | None = None
) -> tuple[float, float, float, np.ndarray]:
    """``(kappa_y, kappa_z, kappa_yz, dh)`` from chart-coordinate blocks."""
    dh = solution_map_derivative(blocks, rtol)
    kappa_y = spectral_norm(dh)
    dh_z = solution_map_derivative(blocks.swap_outputs(), rtol)
    kappa_z = spectral_norm(dh_z)
    dh_yz = fcre_solution_derivative(blocks.j_x, np.hstack([blocks.j_y, blocks.j_z]), rtol)
    kappa_yz = spectral_norm(dh_yz)
    return kappa_y, kappa_z, kappa_yz, dh


def condition_numbers(
    problem: CrepProblem,
    point: CrepPoint,
    rtol: float | None = None,
    *,
    certificate: RankCertificate | None = None,
    n_samples: int = 4,
    radius: float | None = None,
    seed: int = 0,
) -> ConditionReport:
    """Certify ``point`` and compute the condition numbers of the problem.

    A pre-computed certificate can be passed to skip re-certification.
    When certification fails the report carries the failed certificate and
    ``None`` condition numbers instead of numeric sentinels.
    """
    if certificate is None:
        certificate = certify_crep(problem, point, n_samples=n_samples, radius=radius, seed=seed, rtol=rtol)
    if not certificate.passed:
        return ConditionReport(kappa_y=None, kappa_z=None, kappa_yz=None, dh=None, certificate=certificate)
    blocks = evaluate_blocks(problem, point)
    kappa_y, kappa_z, kappa_yz, dh = condition_numbers_from_blocks(blocks, rtol)
    return ConditionReport(
        kappa_y=kappa_y, kappa_z=kappa_z, kappa_yz=kappa_yz, dh=dh, certificate=certificate
    )
