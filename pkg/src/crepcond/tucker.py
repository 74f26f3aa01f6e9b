"""Tucker decomposition as a constant-rank elimination problem.

Finding an orthogonal Tucker decomposition ``X = (U_1, ..., U_D) . C`` of a
tensor of known multilinear rank fits the elimination framework: the input
is ``X`` (restricted to the fixed-multilinear-rank manifold), the output is
one chosen variable (a factor or the core) and the latent variable collects
the remaining ones.  The decomposition is unique only up to orthogonal
rotations of core and factors, which is exactly the kind of gauge freedom
the framework quotients out.

Closed forms exist for every variable: the condition number of factor
``U_d`` is zero when ``U_d`` is square and otherwise the reciprocal of the
smallest singular value of the mode-``d`` core flattening, and the
condition number of the core is exactly one.  :func:`cross_validate` checks
these against the general pipeline on any instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crep import (
    CertificationError,
    CrepDims,
    CrepPoint,
    CrepProblem,
    RankHypothesisError,
    TangentChart,
    condition_numbers,
    make_crep_point,
)
from .linalg import default_rtol
from .tensor import (
    TuckerPoint,
    _kron_chain,
    flatten,
    hosvd,
    mlrank_tangent_basis,
    mlrank_tangent_dim,
    multilinear_multiply,
    stiefel_tangent_basis,
    stiefel_tangent_dim,
)

__all__ = [
    "CrossValidation",
    "TuckerCrepConfig",
    "VariableComparison",
    "build_tucker_crep",
    "closed_form_kappa_core",
    "closed_form_kappa_factor",
    "cross_validate",
    "random_orthogonal",
    "random_stiefel",
    "random_tucker_point",
    "regauge",
    "variable_label",
]


@dataclass(frozen=True)
class TuckerCrepConfig:
    """Choice of decomposition point and output variable.

    ``output_variable`` is either a 0-based mode index (solve for that
    factor) or the string ``"core"``.
    """

    point: TuckerPoint
    output_variable: int | str
    rtol: float | None = None

    def __post_init__(self):
        out = self.output_variable
        if out != "core" and not (isinstance(out, (int, np.integer)) and 0 <= out < self.point.order):
            raise ValueError(f"output_variable must be 'core' or a mode in [0, {self.point.order}), got {out!r}")


def variable_label(var: int | str) -> str:
    """Human-readable variable name: ``core`` or ``U1`` .. ``UD`` (1-based)."""
    return "core" if var == "core" else f"U{int(var) + 1}"


def _polar_retract(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m, full_matrices=False)
    return u @ vh


def _block_diag(blocks: list[np.ndarray]) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r : r + b.shape[0], c : c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def build_tucker_crep(config: TuckerCrepConfig) -> tuple[CrepProblem, CrepPoint]:
    """Assemble the decomposition problem for one output variable.

    The residual is ``x - (U_1, ..., U_D) . C`` over the ambient tensor
    space.  Charts: the input chart is the fixed-multilinear-rank tangent
    basis at the current decomposition; factor charts are full Stiefel
    tangent bases (the gauge rotations must remain available to the latent
    variable); the core chart is the full core space.  The input retraction
    re-truncates via the higher-order SVD at the same ranks; factor
    retractions are polar.
    """
    p = config.point
    rtol = config.rtol
    shape, ranks, order = p.shape, p.ranks, p.order
    n_res = p.product.size
    out = "core" if config.output_variable == "core" else int(config.output_variable)
    canonical: list[int | str] = ["core"] + list(range(order))
    z_comps = [c for c in canonical if c != out]

    def comp_shape(c):
        return ranks if c == "core" else (shape[c], ranks[c])

    def comp_size(c):
        return int(np.prod(comp_shape(c), dtype=int))

    z_sizes = [comp_size(c) for c in z_comps]
    z_offsets = np.concatenate([[0], np.cumsum(z_sizes)]).astype(int)

    def unpack(y_vec, z_vec):
        vals = {out: np.asarray(y_vec, dtype=float).reshape(comp_shape(out))}
        z_vec = np.asarray(z_vec, dtype=float)
        for c, lo, hi in zip(z_comps, z_offsets[:-1], z_offsets[1:]):
            vals[c] = z_vec[lo:hi].reshape(comp_shape(c))
        core = vals["core"]
        factors = [vals[d] for d in range(order)]
        return core, factors

    def residual(x, y_vec, z_vec):
        core, factors = unpack(y_vec, z_vec)
        return np.asarray(x, dtype=float) - multilinear_multiply(factors, core).ravel()

    def jacobian(x, y_vec, z_vec):
        core, factors = unpack(y_vec, z_vec)
        parts = {"core": -_kron_chain(factors)}
        for d in range(order):
            n_d, m_d = factors[d].shape
            cols = np.empty((n_res, n_d * m_d))
            e = np.zeros((n_d, m_d))
            for idx in range(n_d * m_d):
                e.flat[idx] = 1.0
                mats = list(factors)
                mats[d] = e
                cols[:, idx] = -multilinear_multiply(mats, core).ravel()
                e.flat[idx] = 0.0
            parts[d] = cols
        j_y = parts[out]
        j_z = np.hstack([parts[c] for c in z_comps])
        return np.eye(n_res), j_y, j_z

    def comp_basis(c, core, factors):
        if c == "core":
            return np.eye(core.size)
        return stiefel_tangent_basis(factors[c])

    def x_chart(x, y_vec, z_vec):
        core, factors = unpack(y_vec, z_vec)
        tp = TuckerPoint(core=core, factors=tuple(factors), product=np.asarray(x, dtype=float).reshape(shape))
        return TangentChart(n_res, mlrank_tangent_basis(tp, rtol))

    def y_chart(x, y_vec, z_vec):
        core, factors = unpack(y_vec, z_vec)
        return TangentChart(comp_size(out), comp_basis(out, core, factors))

    def z_chart(x, y_vec, z_vec):
        core, factors = unpack(y_vec, z_vec)
        return TangentChart(int(z_offsets[-1]), _block_diag([comp_basis(c, core, factors) for c in z_comps]))

    def x_retract(x, dx):
        return hosvd((np.asarray(x) + dx).reshape(shape), ranks, rtol).product.ravel()

    def retract_comp(c, value, delta):
        moved = value + delta
        if c == "core":
            return moved
        return _polar_retract(moved.reshape(comp_shape(c))).ravel()

    def y_retract(y_vec, dy):
        return retract_comp(out, y_vec, dy)

    def z_retract(z_vec, dz):
        moved = []
        w = np.asarray(z_vec, dtype=float)
        dz = np.asarray(dz, dtype=float)
        for c, lo, hi in zip(z_comps, z_offsets[:-1], z_offsets[1:]):
            moved.append(retract_comp(c, w[lo:hi], dz[lo:hi]))
        return np.concatenate(moved) if moved else w

    dim_x = mlrank_tangent_dim(shape, ranks)
    dim_of = {c: (int(np.prod(ranks, dtype=int)) if c == "core" else stiefel_tangent_dim(shape[c], ranks[c])) for c in canonical}
    dims = CrepDims(dim_x, dim_of[out], sum(dim_of[c] for c in z_comps), n_res)

    x0 = p.product.ravel()
    pack = {c: (p.core if c == "core" else p.factors[c]).ravel() for c in canonical}
    scale = max(1.0, float(np.linalg.norm(x0)))
    problem = CrepProblem(
        name=f"tucker-{'x'.join(map(str, shape))}-rank-{'x'.join(map(str, ranks))}-{variable_label(out)}",
        dims=dims,
        residual=residual,
        jacobian=jacobian,
        x_chart=x_chart,
        y_chart=y_chart,
        z_chart=z_chart,
        x_retract=x_retract,
        y_retract=y_retract,
        z_retract=z_retract,
        scale=scale,
    )
    z0 = np.concatenate([pack[c] for c in z_comps]) if z_comps else np.zeros(0)
    point = make_crep_point(problem, x0, pack[out], z0)
    return problem, point


def closed_form_kappa_factor(core, mode: int, n_rows: int, rtol: float | None = None) -> float:
    """Condition number of factor ``mode``: 0 if square, else ``1 / sigma_min``
    of the mode flattening of the core."""
    core = np.asarray(core, dtype=float)
    m_d = core.shape[mode]
    if n_rows < m_d:
        raise ValueError(f"factor must have at least {m_d} rows, got {n_rows}")
    if n_rows == m_d:
        return 0.0
    mat = flatten(core, mode)
    s = np.linalg.svd(mat, compute_uv=False)
    floor = (rtol if rtol is not None else default_rtol(mat.shape)) * (float(s[0]) if s.size else 0.0)
    sigma_min = float(s[m_d - 1]) if s.size >= m_d else 0.0
    if sigma_min <= floor:
        raise RankHypothesisError(
            f"mode-{mode} core flattening has sigma_min {sigma_min:.3e} at the tolerance floor; "
            "the core is not of full multilinear rank"
        )
    return 1.0 / sigma_min


def closed_form_kappa_core() -> float:
    """Condition number of the core; exactly one for every instance."""
    return 1.0


def expected_kappa_all(point: TuckerPoint, rtol: float | None = None) -> float:
    """Condition number of solving for all variables combined: the maximum
    of the individual closed forms (with the core contributing 1)."""
    kappas = [closed_form_kappa_core()]
    for d in range(point.order):
        if point.shape[d] > point.ranks[d]:
            kappas.append(closed_form_kappa_factor(point.core, d, point.shape[d], rtol))
    return max(kappas)


@dataclass(frozen=True)
class VariableComparison:
    variable: str
    kappa_closed: float
    kappa_general: float
    rel_diff: float


@dataclass(frozen=True)
class CrossValidation:
    """Closed-form versus general-pipeline condition numbers of one instance."""

    entries: tuple[VariableComparison, ...]
    kappa_all_general: float
    kappa_all_expected: float
    rel_diff_all: float
    max_rel_diff: float


def cross_validate(
    point: TuckerPoint,
    rtol: float | None = None,
    *,
    n_cert_samples: int = 2,
    radius: float | None = None,
    seed: int = 0,
) -> CrossValidation:
    """Compare closed-form and general-pipeline condition numbers.

    For the core and every factor, the instance is assembled as an
    elimination problem, certified, and solved with the general pipeline;
    the result is compared against the closed form.  The combined
    condition number (all variables as output) is also checked against the
    maximum of the individual ones.  Raises :class:`CertificationError` if
    any rank certificate fails.
    """
    entries = []
    kappa_all_general = None
    for var in ["core"] + list(range(point.order)):
        problem, pt = build_tucker_crep(TuckerCrepConfig(point, var, rtol))
        report = condition_numbers(problem, pt, rtol, n_samples=n_cert_samples, radius=radius, seed=seed)
        if not report.certificate.passed:
            raise CertificationError(
                f"rank certificate failed for {problem.name}: {'; '.join(report.certificate.messages)}"
            )
        closed = (
            closed_form_kappa_core()
            if var == "core"
            else closed_form_kappa_factor(point.core, var, point.shape[var], rtol)
        )
        rel = abs(report.kappa_y - closed) / (1.0 + closed)
        entries.append(VariableComparison(variable_label(var), closed, report.kappa_y, rel))
        if var == "core":
            kappa_all_general = report.kappa_yz
    expected_all = expected_kappa_all(point, rtol)
    rel_all = abs(kappa_all_general - expected_all) / (1.0 + expected_all)
    return CrossValidation(
        entries=tuple(entries),
        kappa_all_general=kappa_all_general,
        kappa_all_expected=expected_all,
        rel_diff_all=rel_all,
        max_rel_diff=max([e.rel_diff for e in entries] + [rel_all]),
    )


# ---------------------------------------------------------------------------
# Seeded instance generation.


def _as_rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_stiefel(seed, n: int, m: int) -> np.ndarray:
    """Seeded random ``n x m`` matrix with orthonormal columns."""
    rng = _as_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, m)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_orthogonal(seed, n: int) -> np.ndarray:
    return random_stiefel(seed, n, n)


def random_tucker_point(shape, ranks, seed, min_core_sigma: float = 0.1, max_tries: int = 500) -> TuckerPoint:
    """Seeded random decomposition point with a well-conditioned core.

    The core is resampled until the smallest singular value of every mode
    flattening is at least ``min_core_sigma``, so closed-form condition
    numbers stay bounded and rank decisions are unambiguous.
    """
    shape = tuple(int(n) for n in shape)
    ranks = tuple(int(m) for m in ranks)
    if len(shape) != len(ranks):
        raise ValueError("shape and ranks must have the same length")
    for n, m in zip(shape, ranks):
        if not 1 <= m <= n:
            raise ValueError(f"ranks must satisfy 1 <= m <= n, got m={m}, n={n}")
    total = int(np.prod(ranks, dtype=int))
    for d, m in enumerate(ranks):
        if m > total // m:
            raise ValueError(
                f"ranks {ranks} are not an achievable multilinear rank: mode {d} exceeds the product of the others"
            )
    rng = _as_rng(seed)
    factors = tuple(random_stiefel(rng, n, m) for n, m in zip(shape, ranks))
    for _ in range(max_tries):
        core = rng.standard_normal(ranks)
        smallest = min(
            float(np.linalg.svd(flatten(core, d), compute_uv=False)[ranks[d] - 1])
            for d in range(len(ranks))
        )
        if smallest >= min_core_sigma:
            return TuckerPoint(core=core, factors=factors)
    raise RuntimeError(f"could not sample a core with sigma_min >= {min_core_sigma} in {max_tries} tries")


def regauge(point: TuckerPoint, seed) -> TuckerPoint:
    """Equivalent decomposition of the same tensor under a random orthogonal gauge."""
    rng = _as_rng(seed)
    qs = [random_orthogonal(rng, m) for m in point.ranks]
    factors = tuple(u @ q for u, q in zip(point.factors, qs))
    core = multilinear_multiply([q.T for q in qs], point.core)
    return TuckerPoint(core=core, factors=factors, product=point.product)
