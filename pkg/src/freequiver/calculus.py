"""Derivatives of free maps via the block trick.

Evaluating a free map on the block point [[X, H], [0, X]] produces
[[f(X), Df(X)[H]], [0, f(X)]]: the upper-right blocks are the directional
derivative. Everything here is built on that identity — directional
derivatives, the derivative-as-matrix assembly (columns = derivatives along
matrix-unit directions, which suffices because a derivative vanishing on the
generating arcs vanishes everywhere), the injectivity certificate (trivial
numerical kernel, or an explicit collision pair constructed from a kernel
direction), chain/Leibniz rule checks, and the nilpotent-point trick for
reading off univariate polynomial coefficients.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

import numpy as np

from .errors import BlockMismatchError
from .exprs import (
    FreeMapDef,
    ProductSpec,
    compose_maps,
    eval_map,
    pair_rep,
    product_maps,
)
from .numerics import (
    INVERTIBILITY_RTOL,
    as_complex_matrix,
    frob_norm,
    op_norm,
    rel_diff,
    rel_residual,
)
from .reps import NatTrans, Rep, direct_sum, rep_distance

BLOCK_TOL = 1e-8
IFT_TOL = 1e-8


# ---------------------------------------------------------------------------
# Direction fields (the H in Df(X)[H])

@dataclass(eq=False)
class DirectionField:
    """A tangent direction at a representation: one matrix per arc, shaped
    exactly like the base point's matrix there. H == 0 means every component
    is zero (a single nonzero entry already makes a direction nonzero)."""

    base: Rep
    h_mats: dict[str, np.ndarray]

    def __post_init__(self):
        mats = {}
        for a in self.base.quiver.arcs:
            if a.name not in self.h_mats:
                raise ValueError(f"missing direction matrix for arc {a.name!r}")
            m = as_complex_matrix(self.h_mats[a.name])
            if m.shape != self.base.mats[a.name].shape:
                raise ValueError(
                    f"direction at {a.name!r}: shape {m.shape} != "
                    f"{self.base.mats[a.name].shape}"
                )
            mats[a.name] = m
        extra = set(self.h_mats) - set(mats)
        if extra:
            raise ValueError(f"direction matrices for unknown arcs: {sorted(extra)}")
        self.h_mats = mats


def zero_direction(x: Rep) -> DirectionField:
    return DirectionField(x, {a: np.zeros_like(m) for a, m in x.mats.items()})


def random_direction(x: Rep, seed: int) -> DirectionField:
    rng = np.random.Generator(np.random.PCG64(seed))
    mats = {}
    for a in x.quiver.arcs:
        shape = x.mats[a.name].shape
        mats[a.name] = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return DirectionField(x, mats)


def matrix_unit_direction(x: Rep, arc: str, i: int, j: int) -> DirectionField:
    h = zero_direction(x)
    h.h_mats[arc][i, j] = 1.0
    return h


def direction_add(h: DirectionField, k: DirectionField) -> DirectionField:
    return DirectionField(
        h.base, {a: h.h_mats[a] + k.h_mats[a] for a in h.h_mats}
    )


def direction_scale(c, h: DirectionField) -> DirectionField:
    return DirectionField(h.base, {a: c * m for a, m in h.h_mats.items()})


def direction_norm(h: DirectionField) -> float:
    """Stacked Frobenius norm over all components."""
    return math.sqrt(sum(frob_norm(m) ** 2 for m in h.h_mats.values()))


def direction_residual(h: DirectionField, k: DirectionField) -> float:
    """Max relative componentwise difference between two direction fields."""
    return max(rel_diff(h.h_mats[a], k.h_mats[a]) for a in h.h_mats)


def direction_slots(x: Rep) -> list[tuple[str, int, int, int]]:
    """(arc, rows, cols, flat offset) per arc in quiver order; flat layout is
    row-major within each slot."""
    slots = []
    offset = 0
    for a in x.quiver.arcs:
        rows, cols = x.mats[a.name].shape
        slots.append((a.name, rows, cols, offset))
        offset += rows * cols
    return slots


def flatten_direction(h: DirectionField) -> np.ndarray:
    return np.concatenate(
        [h.h_mats[a.name].reshape(-1) for a in h.base.quiver.arcs]
        or [np.zeros(0, dtype=np.complex128)]
    )


def unflatten_direction(x: Rep, vec: np.ndarray) -> DirectionField:
    mats = {}
    for arc, rows, cols, offset in direction_slots(x):
        mats[arc] = np.asarray(vec[offset:offset + rows * cols]).reshape(rows, cols)
    return DirectionField(x, mats)


# ---------------------------------------------------------------------------
# Block points

def mixed_block_rep(x: Rep, y: Rep, u_mats: dict[str, np.ndarray]) -> Rep:
    """Arc a -> [[X(a), U(a)], [0, Y(a)]] over the shared quiver; U(a) must be
    x.dims[dst] by y.dims[src]."""
    if x.quiver != y.quiver:
        raise ValueError("block construction needs reps over the same quiver")
    dims = {v: x.dims[v] + y.dims[v] for v in x.quiver.vertices}
    mats = {}
    for a in x.quiver.arcs:
        xm, ym = x.mats[a.name], y.mats[a.name]
        u = as_complex_matrix(u_mats[a.name])
        if u.shape != (xm.shape[0], ym.shape[1]):
            raise ValueError(
                f"block at {a.name!r}: upper-right shape {u.shape} != "
                f"{(xm.shape[0], ym.shape[1])}"
            )
        m = np.zeros((dims[a.dst], dims[a.src]), dtype=np.complex128)
        m[: xm.shape[0], : xm.shape[1]] = xm
        m[: xm.shape[0], xm.shape[1]:] = u
        m[xm.shape[0]:, xm.shape[1]:] = ym
        mats[a.name] = m
    return Rep(x.quiver, dims, mats)


def block_extend(x: Rep, h: DirectionField) -> Rep:
    """The derivative's block point: arc a -> [[X(a), H(a)], [0, X(a)]]."""
    if h.base is not x and (h.base.quiver != x.quiver or h.base.dims != x.dims):
        raise ValueError("direction is based at a different point")
    return mixed_block_rep(x, x, h.h_mats)


def _blocks(m: np.ndarray, top_rows: int, left_cols: int):
    return (
        m[:top_rows, :left_cols],
        m[:top_rows, left_cols:],
        m[top_rows:, :left_cols],
        m[top_rows:, left_cols:],
    )


# ---------------------------------------------------------------------------
# Derivatives

def directional_derivative(
    f: FreeMapDef,
    x: Rep,
    h: DirectionField,
    block_tol: float = BLOCK_TOL,
    inv_rtol: float = INVERTIBILITY_RTOL,
) -> DirectionField:
    """Df(X)[H] read off the block point; the diagonal blocks are asserted to
    reproduce f(X) and the lower-left to vanish (anything else means the map
    is not free or the point is effectively irregular)."""
    fx = eval_map(f, x, inv_rtol=inv_rtol)
    big = eval_map(f, block_extend(x, h), inv_rtol=inv_rtol)
    out = {}
    for a in f.target_quiver.arcs:
        m, n = fx.dims[a.dst], fx.dims[a.src]
        tl, tr, bl, br = _blocks(big.mats[a.name], m, n)
        base = fx.mats[a.name]
        worst = max(
            rel_diff(tl, base),
            rel_diff(br, base),
            rel_residual(op_norm(bl), big.mats[a.name]),
        )
        if worst > block_tol:
            raise BlockMismatchError(
                f"block structure broke at arc {a.name!r}: residual {worst:.3e} "
                f"exceeds {block_tol:.1e}"
            )
        out[a.name] = tr
    return DirectionField(fx, out)


def shift_rep(x: Rep, h: DirectionField, eps: float) -> Rep:
    return Rep(
        x.quiver,
        dict(x.dims),
        {a: x.mats[a] + eps * h.h_mats[a] for a in x.mats},
    )


def finite_difference(
    f: FreeMapDef, x: Rep, h: DirectionField, eps: float
) -> DirectionField:
    """(f(X + eps H) - f(X)) / eps, the first-order oracle for Df(X)[H]."""
    fx = eval_map(f, x)
    fs = eval_map(f, shift_rep(x, h, eps))
    return DirectionField(
        fx, {a: (fs.mats[a] - fx.mats[a]) / eps for a in fx.mats}
    )


def fd_errors(
    f: FreeMapDef, x: Rep, h: DirectionField, eps_list: list[float]
) -> list[float]:
    dd = directional_derivative(f, x, h)
    return [
        direction_residual(dd, finite_difference(f, x, h, eps)) for eps in eps_list
    ]


def observed_order(
    eps_list: list[float], errors: list[float], floor: float = 1e-12
) -> float:
    """Least-squares slope of log error vs log eps. Errors entirely below the
    floor (derivative exact, e.g. linear maps) report as inf."""
    if max(errors) < floor:
        return math.inf
    clipped = [max(e, floor) for e in errors]
    slope = np.polyfit(np.log(np.asarray(eps_list)), np.log(np.asarray(clipped)), 1)[0]
    return float(slope)


@dataclass(eq=False)
class DerivativeMatrix:
    """The linear map H -> Df(X)[H] over stacked row-major direction
    coordinates. col_index/row_index give the (arc, row, col) triple for each
    flat coordinate on the source/target side."""

    matrix: np.ndarray
    col_index: list[tuple[str, int, int]]
    row_index: list[tuple[str, int, int]]
    base: Rep
    image_base: Rep

    def apply(self, h: DirectionField) -> DirectionField:
        vec = self.matrix @ flatten_direction(h)
        return unflatten_direction(self.image_base, vec)


def _index_table(x: Rep) -> list[tuple[str, int, int]]:
    table = []
    for arc, rows, cols, _ in direction_slots(x):
        table.extend((arc, i, j) for i in range(rows) for j in range(cols))
    return table


def derivative_matrix(
    f: FreeMapDef, x: Rep, block_tol: float = BLOCK_TOL
) -> DerivativeMatrix:
    """Assemble Df(X) one column at a time: column j is the directional
    derivative along the j-th matrix-unit direction. Columns are independent
    (any evaluation order gives the same matrix)."""
    fx = eval_map(f, x)
    col_index = _index_table(x)
    row_index = _index_table(fx)
    matrix = np.zeros((len(row_index), len(col_index)), dtype=np.complex128)
    for j, (arc, i, k) in enumerate(col_index):
        h = matrix_unit_direction(x, arc, i, k)
        dd = directional_derivative(f, x, h, block_tol=block_tol)
        matrix[:, j] = flatten_direction(dd)
    return DerivativeMatrix(matrix, col_index, row_index, x, fx)


@dataclass(eq=False)
class IFTCertificate:
    """Per-point injectivity evidence: either the derivative matrix has a
    trivial numerical kernel (full_rank), or an explicit collision pair built
    from a unit kernel direction — two distinct points with equal images."""

    status: str  # "full_rank" | "collision"
    sigma_min: float
    sigma_max: float
    singular_values: np.ndarray
    kernel_dim: int
    tol: float
    direction: DirectionField | None = None
    rep1: Rep | None = None
    rep2: Rep | None = None
    collision_residual: float | None = None
    separation: float | None = None


def ift_certificate(f: FreeMapDef, x: Rep, tol: float = IFT_TOL) -> IFTCertificate:
    """Decide kernel triviality of Df(X) at relative cutoff tol.

    A nontrivial kernel yields the constructed counterexample to injectivity:
    rep1 = [[X, H], [0, X]] for a unit kernel direction H and rep2 = X ⊕ X
    have (numerically) equal images but unit separation.
    """
    dm = derivative_matrix(f, x)
    rows, cols = dm.matrix.shape
    if cols == 0:
        return IFTCertificate("full_rank", 0.0, 0.0, np.zeros(0), 0, tol)
    if rows == 0:
        s = np.zeros(0)
        smin = smax = 0.0
        kernel_dim = cols
        vh_tail = np.eye(cols, dtype=np.complex128)
    else:
        _, s, vh = np.linalg.svd(dm.matrix, full_matrices=True)
        smax = float(s[0])
        smin = float(s[-1]) if len(s) >= cols else 0.0
        kernel_dim = cols - int(np.sum(s > tol * smax)) if smax > 0 else cols
        vh_tail = np.conj(vh[cols - kernel_dim:]) if kernel_dim else None
    if kernel_dim == 0:
        return IFTCertificate("full_rank", smin, smax, s, 0, tol)
    h = unflatten_direction(x, vh_tail[-1])
    rep1 = block_extend(x, h)
    rep2 = direct_sum(x, x)
    img_gap = rep_distance(eval_map(f, rep1), eval_map(f, rep2))
    sep = rep_distance(rep1, rep2)
    return IFTCertificate(
        "collision",
        smin,
        smax,
        s if rows else np.zeros(0),
        kernel_dim,
        tol,
        direction=h,
        rep1=rep1,
        rep2=rep2,
        collision_residual=float(img_gap),
        separation=float(sep),
    )


# ---------------------------------------------------------------------------
# Rule checks

def chain_rule_check(
    f: FreeMapDef, g: FreeMapDef, x: Rep, h: DirectionField,
    block_tol: float = BLOCK_TOL,
) -> float:
    """Max relative gap between D(f∘g)(X)[H] and Df(g(X))[Dg(X)[H]]."""
    lhs = directional_derivative(compose_maps(f, g), x, h, block_tol=block_tol)
    gx = eval_map(g, x)
    inner = directional_derivative(g, x, h, block_tol=block_tol)
    rhs = directional_derivative(f, gx, inner, block_tol=block_tol)
    return direction_residual(lhs, rhs)


def pair_direction(h: DirectionField, k: DirectionField) -> DirectionField:
    """Direction at pair_rep(h.base, k.base): left components tagged p.,
    right components tagged q."""
    base = pair_rep(h.base, k.base)
    mats = {f"p.{a}": m for a, m in h.h_mats.items()}
    mats.update({f"q.{a}": m for a, m in k.h_mats.items()})
    return DirectionField(base, mats)


def leibniz_check(
    spec: ProductSpec,
    f: FreeMapDef,
    g: FreeMapDef,
    x: Rep,
    y: Rep,
    h: DirectionField,
    k: DirectionField,
    block_tol: float = BLOCK_TOL,
) -> float:
    """Max relative gap between D(f×g)(X×Y)[H×K] and
    Df(X)[H]×g(Y) + f(X)×Dg(Y)[K], componentwise over the target arcs."""
    prod = product_maps(spec, f, g)
    z = pair_rep(x, y)
    hk = pair_direction(h, k)
    lhs = directional_derivative(prod, z, hk, block_tol=block_tol)
    fx, gy = eval_map(f, x), eval_map(g, y)
    df = directional_derivative(f, x, h, block_tol=block_tol)
    dg = directional_derivative(g, y, k, block_tol=block_tol)
    worst = 0.0
    for r, (pa, qa) in spec.pairs.items():
        want = df.h_mats[pa] @ gy.mats[qa] + fx.mats[pa] @ dg.h_mats[qa]
        worst = max(worst, rel_diff(lhs.h_mats[r], want))
    return worst


def gamma_commutation_check(
    f: FreeMapDef,
    x: Rep,
    y: Rep,
    gamma: NatTrans,
    block_tol: float = BLOCK_TOL,
) -> float:
    """Evaluate f on the block point [[X, XΓ−ΓY], [0, Y]] and compare against
    [[f(X), f(X)Γ−Γf(Y)], [0, f(Y)]]. Γ only needs compatible shapes; the
    identity holds whether or not it intertwines (it is a conjugation by the
    unitriangular [[1, Γ], [0, 1]])."""
    if gamma.to_rep is not x or gamma.from_rep is not y:
        # allow structurally identical reps; require matching shapes
        for v in x.quiver.vertices:
            want = (x.dims[v], y.dims[v])
            if gamma.gammas[v].shape != want:
                raise ValueError(f"gamma at {v!r}: shape {gamma.gammas[v].shape} != {want}")
    u_mats = {}
    for a in x.quiver.arcs:
        u_mats[a.name] = (
            x.mats[a.name] @ gamma.gammas[a.src] - gamma.gammas[a.dst] @ y.mats[a.name]
        )
    z = mixed_block_rep(x, y, u_mats)
    big = eval_map(f, z)
    fx, fy = eval_map(f, x), eval_map(f, y)
    worst = 0.0
    for a in f.target_quiver.arcs:
        gs = gamma.gammas[f.vertex_map[a.src]]
        gd = gamma.gammas[f.vertex_map[a.dst]]
        m, n = fx.dims[a.dst], fy.dims[a.src]
        expected = np.zeros(
            (fx.dims[a.dst] + fy.dims[a.dst], fx.dims[a.src] + fy.dims[a.src]),
            dtype=np.complex128,
        )
        expected[:m, : fx.dims[a.src]] = fx.mats[a.name]
        expected[:m, fx.dims[a.src]:] = fx.mats[a.name] @ gs - gd @ fy.mats[a.name]
        expected[m:, fx.dims[a.src]:] = fy.mats[a.name]
        worst = max(worst, rel_diff(big.mats[a.name], expected))
    return worst


# ---------------------------------------------------------------------------
# Univariate coefficients via nilpotent points

def nilpotent_matrix(coeffs, n: int) -> np.ndarray:
    """p(N_n) for the n×n single-Jordan-block nilpotent N (ones on the first
    superdiagonal). Integer coefficient lists stay in exact int64 arithmetic.
    """
    if n < 1:
        raise ValueError("matrix size must be at least 1")
    coeffs = list(coeffs)
    exact = all(
        isinstance(c, numbers.Integral) or (isinstance(c, float) and c.is_integer())
        for c in coeffs
    )
    dtype = np.int64 if exact else np.complex128
    nmat = np.eye(n, k=1, dtype=dtype)
    eye = np.eye(n, dtype=dtype)
    if not coeffs:
        return np.zeros((n, n), dtype=dtype)
    acc = (int(coeffs[-1]) if exact else complex(coeffs[-1])) * eye
    for c in reversed(coeffs[:-1]):
        acc = acc @ nmat + (int(c) if exact else complex(c)) * eye
    return acc


def nilpotent_coefficients(coeffs, n: int) -> np.ndarray:
    """First n coefficients of the univariate polynomial, read off the top
    row of its value at the nilpotent point N_n (row k holds coefficient k)."""
    return nilpotent_matrix(coeffs, n)[0, :].copy()
