"""Finite-volume discretizations of the transverse and longitudinal operators.

The transverse operator ``(i∇ + A)^2 - shift`` is discretized on the
interior points of a Dirichlet cube with nearest-neighbour hopping and
midpoint Peierls phases in the symmetric gauge ``A(x) = -Bx/2``.  The
longitudinal operator is either a 1D (or ℓ-dimensional) grid
Schrödinger operator or an injected list of eigenvalues.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .errors import (
    BudgetExceeded,
    FactorizationBreakdown,
    FluxTooLarge,
    NoBoundState,
    SolverFailure,
)
from .linalg import inertia_count, inf_norm
from .magnetic import CountingMeasure, MagneticStructure, canonical_matrix, canonicalize_field

__all__ = [
    "LatticeWindow",
    "TransverseOperator",
    "build_transverse",
    "lattice_landau_bottom",
    "ground_energy",
    "GridPotential",
    "DeltaWell",
    "ExplicitLevels",
    "harmonic",
    "poschl_teller",
    "square_well",
    "ParallelSpectrum",
    "ParallelGridOperator",
    "parallel_grid_operator",
    "solve_parallel",
    "SeparablePotential",
    "AssembledOperator",
    "assemble",
    "MagneticTranslation",
    "magnetic_translate",
    "export_coo",
    "DEFAULT_MAX_DIM",
]

DEFAULT_MAX_DIM = 200_000
FLUX_WARN = 0.1
FLUX_MAX = 0.5


@dataclass(frozen=True)
class LatticeWindow:
    """Interior grid of the open cube ``offset + (-L/2, L/2)^d`` with spacing ``h``."""

    d: int
    L: float
    h: float
    offset: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.L <= 0 or self.h <= 0:
            raise ValueError("L and h must be positive")
        ratio = self.L / self.h
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 2:
            raise ValueError(f"L/h = {ratio} must be an integer >= 2")
        if self.offset is None:
            object.__setattr__(self, "offset", (0.0,) * self.d)
        else:
            off = tuple(float(x) for x in self.offset)
            if len(off) != self.d:
                raise ValueError("offset must have d components")
            object.__setattr__(self, "offset", off)

    @property
    def n(self) -> int:
        """Interior points per axis."""
        return int(round(self.L / self.h)) - 1

    @property
    def size(self) -> int:
        return self.n ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def origin(self) -> np.ndarray:
        return np.asarray(self.offset) - self.L / 2

    @property
    def volume(self) -> float:
        return self.L ** self.d

    def axis(self, a: int) -> np.ndarray:
        return self.origin[a] + self.h * np.arange(1, self.n + 1)

    def points(self) -> np.ndarray:
        """Grid points as an ``(N, d)`` array in C order (axis 0 slowest)."""
        grids = np.meshgrid(*[self.axis(a) for a in range(self.d)], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def translated(self, xi) -> "LatticeWindow":
        xi = np.asarray(xi, dtype=float)
        return LatticeWindow(self.d, self.L, self.h, tuple(np.asarray(self.offset) + xi))


@dataclass(frozen=True)
class TransverseOperator:
    window: LatticeWindow
    field: MagneticStructure
    B: np.ndarray = field(repr=False)
    matrix: sp.csr_matrix = field(repr=False)
    shift: float
    shift_kind: str = "continuum"
    gauge: str = "symmetric: A_j(x) = -1/2 sum_k B_jk x_k"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def _is_canonical(B, ms, tol=1e-12):
    return np.allclose(B, canonical_matrix(ms.b, ms.n), atol=tol * max(1.0, np.abs(B).max()))


def lattice_landau_bottom(b: float, h: float) -> float:
    """Bottom of the spectrum of the infinite-lattice magnetic Laplacian in a 2D plane.

    Computed from the Harper chain obtained in the Landau gauge; flux per
    plaquette ``b h^2``.  The error is exponentially small in ``1/(b h^2)``.
    """
    phi = b * h * h
    if phi == 0:
        return 0.0
    N = int(min(max(20, math.ceil(10 / math.sqrt(phi))), math.floor(math.pi / phi)))
    n = np.arange(-N, N + 1)
    off = -np.ones(2 * N) / h**2
    best = math.inf
    for k in np.linspace(-phi / 2, phi / 2, 7):
        diag = (4 - 2 * np.cos(k - phi * n)) / h**2
        w = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0), eigvals_only=True)[0]
        best = min(best, float(w))
    return best


def _shift_value(kind, B, ms, h):
    if kind == "continuum":
        return ms.beta
    if kind == "lattice":
        if ms.m and not _is_canonical(B, ms):
            raise ValueError("the lattice shift needs B in canonical block form")
        return float(sum(lattice_landau_bottom(bj, h) for bj in ms.b))
    raise ValueError(f"unknown shift kind {kind!r}")


def build_transverse(window: LatticeWindow, B, shift: str = "continuum") -> TransverseOperator:
    """Dirichlet finite-difference magnetic Schrödinger matrix on ``window``.

    ``shift="continuum"`` subtracts ``β = Tr(iB)_+``; ``shift="lattice"``
    subtracts the bottom of the infinite-lattice operator instead, which
    makes every finite-window eigenvalue nonnegative.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if B.shape != (window.d, window.d):
        raise ValueError(f"B must be {window.d}x{window.d}")
    ms = canonicalize_field(B)
    h = window.h
    flux = float(np.abs(B).max()) * h * h if B.size else 0.0
    if flux > FLUX_MAX:
        raise FluxTooLarge(f"flux per plaquette {flux:.3g} exceeds {FLUX_MAX}")
    if flux > FLUX_WARN:
        warnings.warn(f"flux per plaquette {flux:.3g} > {FLUX_WARN}; lattice effects are large",
                      stacklevel=2)
    shift_val = _shift_value(shift, B, ms, h)

    N = window.size
    idx = np.arange(N).reshape(window.shape)
    pts = window.points().reshape(window.shape + (window.d,))
    magnetic = ms.m > 0
    rows, cols, vals = [], [], []
    for a in range(window.d):
        lo = [slice(None)] * window.d
        hi = [slice(None)] * window.d
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        src = idx[tuple(lo)].ravel()
        dst = idx[tuple(hi)].ravel()
        if magnetic:
            # h * A_a at the link midpoint; B_aa = 0 so the midpoint equals the start point here
            x = pts[tuple(lo)].reshape(-1, window.d)
            theta = -0.5 * h * (x @ B[a])
            hop = -np.exp(-1j * theta) / h**2
        else:
            hop = np.full(src.size, -1.0 / h**2)
        rows.append(src)
        cols.append(dst)
        vals.append(hop)
    dtype = complex if magnetic else float
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals).astype(dtype)
        upper = sp.coo_matrix((v, (r, c)), shape=(N, N))
        H = upper + upper.conj().T
    else:
        H = sp.csr_matrix((N, N), dtype=dtype)
    H = (H + sp.identity(N, dtype=dtype) * (2 * window.d / h**2 - shift_val)).tocsr()
    return TransverseOperator(window=window, field=ms, B=B, matrix=H, shift=shift_val,
                              shift_kind=shift)


def ground_energy(op: TransverseOperator, dense_cap: int = 4000, rtol: float = 1e-12) -> float:
    """Smallest eigenvalue of the transverse operator.

    Above ``dense_cap`` unknowns the value is bracketed by the Gershgorin
    bound and a Rayleigh quotient, then bisected with inertia counts to
    ``rtol * ‖H‖_∞``.  The lowest Landau cluster is nearly degenerate,
    which stalls Krylov shift-invert solvers but not bisection.
    """
    H = op.matrix
    if H.shape[0] <= dense_cap:
        return float(np.linalg.eigvalsh(H.toarray())[0])
    A = sp.csr_matrix(H)
    diag = np.real(A.diagonal())
    off = np.asarray(abs(A).sum(axis=1)).ravel() - np.abs(diag)
    lo = float((diag - off).min())
    # Rayleigh quotient of the lowest Dirichlet sine mode
    w = op.window
    s = np.sin(np.pi * np.arange(1, w.n + 1) / (w.n + 1))
    v = s
    for _ in range(w.d - 1):
        v = np.kron(v, s)
    hi = float(np.real(np.vdot(v, A @ v)) / np.vdot(v, v).real)
    scale = max(inf_norm(A), 1.0)

    def below(x):
        # a pivot breakdown means x is (numerically) an eigenvalue; step off it
        for k in range(4):
            try:
                return inertia_count(A, x + k * 1e-3 * rtol * scale) >= 1
            except FactorizationBreakdown as exc:
                err = exc
        raise SolverFailure(f"inertia bisection failed: {err}", residual=hi - lo)

    # the sine mode is exact for B = 0, so widen the upper end until it brackets
    step = rtol * scale
    while not below(hi):
        lo = hi
        hi = hi + step
        step *= 16
    while hi - lo > rtol * scale:
        mid = 0.5 * (lo + hi)
        if below(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# --- longitudinal operator -------------------------------------------------

@dataclass(frozen=True)
class GridPotential:
    """Grid Schrödinger operator ``-Δ_y + u(y)``.

    ``essential_floor`` is 0 for decaying potentials and ``inf`` for
    confining ones.
    """

    u: Callable[[np.ndarray], np.ndarray]
    essential_floor: float = 0.0
    name: str = "grid"


@dataclass(frozen=True)
class DeltaWell:
    alpha: float
    essential_floor: float = 0.0
    name: str = "delta"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class ExplicitLevels:
    """Injected eigenvalues; the list is taken as exhaustive below ``complete_below``."""

    levels: tuple[float, ...]
    essential_floor: float = math.inf
    complete_below: float | None = None
    name: str = "levels"


def harmonic(omega: float = 1.0) -> GridPotential:
    """``u(y) = ω² |y|²``; eigenvalues ``ω(2k + ℓ)`` for ``k = 0, 1, ...`` in 1D: ``ω(2k+1)``."""
    return GridPotential(lambda y: omega**2 * np.sum(np.atleast_2d(y) ** 2, axis=-1),
                         math.inf, f"harmonic({omega})")


def poschl_teller(s: float) -> GridPotential:
    """``u(y) = -s(s+1) sech²(y)``; bound states ``-(s-k)²`` for ``0 <= k < s``."""
    return GridPotential(lambda y: -s * (s + 1) / np.cosh(np.atleast_2d(y)[..., 0]) ** 2,
                         0.0, f"poschl_teller({s})")


def square_well(depth: float, half_width: float) -> GridPotential:
    return GridPotential(
        lambda y: np.where(np.abs(np.atleast_2d(y)[..., 0]) < half_width, -depth, 0.0),
        0.0, f"square_well({depth},{half_width})")


@dataclass(frozen=True)
class ParallelGridOperator:
    grid: LatticeWindow
    matrix: sp.csr_matrix = field(repr=False)
    essential_floor: float
    model: object

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class ParallelSpectrum:
    """Bound states ``E_1 <= E_2 <= ...`` below ``essential_floor``.

    ``vectors[k]`` is sampled on ``grid`` and normalized with the
    quadrature weight ``h^ℓ``; it is ``None`` for injected levels.
    """

    energies: np.ndarray
    vectors: np.ndarray | None
    grid: LatticeWindow | None
    essential_floor: float
    model: object
    truncated: bool = False
    complete_below: float = math.inf

    def __len__(self):
        return len(self.energies)

    @property
    def weight(self) -> float:
        return 1.0 if self.grid is None else self.grid.h ** self.grid.d

    def counting_measure(self) -> CountingMeasure:
        return CountingMeasure.from_levels(self.energies, self.essential_floor,
                                           min(self.complete_below, self.essential_floor))

    def gram(self, g_values: np.ndarray | None = None) -> np.ndarray:
        """``G_jk = Σ_y g(y) ψ_j(y) ψ_k(y) h^ℓ``; identity when ``g ≡ 1``."""
        K = len(self.energies)
        if g_values is None:
            return np.eye(K)
        if self.vectors is None:
            raise ValueError("a longitudinal profile needs eigenvectors")
        return (self.vectors * g_values) @ self.vectors.T * self.weight


def _laplacian_1d(n, h):
    main = np.full(n, 2.0 / h**2)
    off = np.full(n - 1, -1.0 / h**2)
    return main, off


def parallel_grid_operator(model, grid: LatticeWindow) -> ParallelGridOperator:
    if isinstance(model, ExplicitLevels):
        raise ValueError("explicit levels have no grid operator")
    n, h = grid.n, grid.h
    main, off = _laplacian_1d(n, h)
    T = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    I = sp.identity(n, format="csr")
    H = T
    for _ in range(grid.d - 1):
        H = sp.kron(H, I) + sp.kron(sp.identity(H.shape[0]), T)
    pts = grid.points()
    if isinstance(model, DeltaWell):
        if grid.d != 1:
            raise ValueError("the delta well is implemented for ℓ = 1 only")
        i0 = np.flatnonzero(np.abs(pts[:, 0]) < 1e-9 * h)
        if i0.size != 1:
            raise ValueError("the grid must contain y = 0")
        diag = np.zeros(grid.size)
        diag[i0[0]] = -model.alpha / h
    else:
        diag = np.asarray(model.u(pts), dtype=float).reshape(-1)
    H = (H + sp.diags(diag)).tocsr()
    return ParallelGridOperator(grid=grid, matrix=H, essential_floor=model.essential_floor,
                                model=model)


def solve_parallel(model, grid: LatticeWindow | None, count: int) -> ParallelSpectrum:
    """Lowest ``count`` bound states of the longitudinal operator below its essential floor.

    If fewer exist the result holds what exists and has ``truncated`` set;
    a warning is emitted.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(model, ExplicitLevels):
        lv = np.sort(np.asarray(model.levels, dtype=float))
        lv = lv[lv < model.essential_floor]
        if lv.size == 0:
            raise NoBoundState("no level below the essential floor")
        short = lv.size < count
        if short:
            warnings.warn(f"only {lv.size} of {count} requested levels exist", stacklevel=2)
        complete = model.essential_floor if model.complete_below is None else model.complete_below
        if lv.size > count:
            complete = min(complete, float(lv[count]))
        return ParallelSpectrum(energies=lv[:count], vectors=None, grid=None,
                                essential_floor=model.essential_floor, model=model,
                                truncated=short, complete_below=complete)
    op = parallel_grid_operator(model, grid)
    floor = model.essential_floor
    # one extra state tells whether the kept ones exhaust the spectrum below the floor
    if grid.d == 1:
        H = op.matrix
        w, v = eigh_tridiagonal(H.diagonal(), H.diagonal(1), select="i",
                                select_range=(0, min(count + 1, grid.size) - 1))
    else:
        k = min(count + 1, grid.size - 2)
        if grid.size <= 4000:
            w, v = np.linalg.eigh(op.matrix.toarray())
            w, v = w[:k], v[:, :k]
        else:
            sigma = float(op.matrix.diagonal().min()) - 1.0
            w, v = spla.eigsh(op.matrix.tocsc(), k=k, sigma=sigma, which="LM")
            order = np.argsort(w)
            w, v = w[order], v[:, order]
    keep = w < floor
    if not keep.any():
        raise NoBoundState(f"no eigenvalue below the essential floor {floor}")
    w, v = w[keep], v[:, keep]
    nxt = float(w[count]) if w.size > count else floor
    w, v = w[:count], v[:, :count]
    short = w.size < count
    if short:
        warnings.warn(f"only {w.size} of {count} requested bound states exist", stacklevel=2)
    weight = grid.h ** grid.d
    vecs = (v / np.sqrt(weight)).T
    # fix the sign so that the largest component is positive
    signs = np.sign(vecs[np.arange(len(w)), np.argmax(np.abs(vecs), axis=1)])
    vecs = vecs * signs[:, None]
    complete = nxt
    return ParallelSpectrum(energies=w, vectors=vecs, grid=grid, essential_floor=floor,
                            model=model, truncated=short, complete_below=complete)


# --- assembly ----------------------------------------------------------------

@dataclass(frozen=True)
class SeparablePotential:
    """Potential ``V(x, y) = transverse(x) * longitudinal(y)`` sampled on the grids.

    ``longitudinal=None`` means ``≡ 1``.
    """

    transverse: np.ndarray
    longitudinal: np.ndarray | None = None

    @classmethod
    def constant(cls, c, n_transverse):
        return cls(np.full(n_transverse, float(c)))


@dataclass(frozen=True)
class AssembledOperator:
    transverse: TransverseOperator
    parallel: ParallelSpectrum | ParallelGridOperator
    potential: object
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def mode(self) -> str:
        return "injection" if isinstance(self.parallel, ParallelSpectrum) else "grid"

    @property
    def n_parallel(self) -> int:
        p = self.parallel
        return len(p) if isinstance(p, ParallelSpectrum) else p.size

    def transverse_indices(self, mask: np.ndarray) -> np.ndarray:
        """Row indices of all product states whose transverse point is in ``mask``."""
        K = self.n_parallel
        base = np.flatnonzero(mask)
        return (base[:, None] * K + np.arange(K)[None, :]).ravel()


def assemble(op: TransverseOperator, parallel, potential=None,
             max_dim: int = DEFAULT_MAX_DIM) -> AssembledOperator:
    """Kronecker sum ``H_⊥ ⊗ I + I ⊗ H_∥`` plus the potential, in x-major order.

    ``parallel`` is a :class:`ParallelSpectrum` (its levels span the kept
    longitudinal subspace) or a :class:`ParallelGridOperator`.
    ``potential`` is ``None``, a :class:`SeparablePotential` or a full
    ``(N_⊥, N_∥)`` array of grid values (grid mode only).
    """
    Nt = op.size
    if isinstance(parallel, ParallelSpectrum):
        K = len(parallel)
        Hpar = sp.diags(np.asarray(parallel.energies, dtype=float))
    elif isinstance(parallel, ParallelGridOperator):
        K = parallel.size
        Hpar = parallel.matrix
    else:
        raise TypeError("parallel must be a ParallelSpectrum or ParallelGridOperator")
    dim = Nt * K
    if dim > max_dim:
        raise BudgetExceeded(dim, max_dim)
    H = sp.kron(op.matrix, sp.identity(K)) + sp.kron(sp.identity(Nt), Hpar)
    if potential is not None:
        H = H + _potential_matrix(potential, parallel, Nt, K)
    return AssembledOperator(transverse=op, parallel=parallel, potential=potential,
                             matrix=H.tocsr())


def _potential_matrix(potential, parallel, Nt, K):
    if isinstance(potential, SeparablePotential):
        a = np.asarray(potential.transverse, dtype=float)
        if a.shape != (Nt,):
            raise ValueError("transverse potential has the wrong length")
        if isinstance(parallel, ParallelSpectrum):
            G = parallel.gram(potential.longitudinal)
            return sp.kron(sp.diags(a), sp.csr_matrix(G))
        g = np.ones(K) if potential.longitudinal is None else np.asarray(potential.longitudinal)
        return sp.diags(np.outer(a, g).ravel())
    V = np.asarray(potential, dtype=float)
    if isinstance(parallel, ParallelSpectrum):
        if parallel.vectors is None:
            raise ValueError("a full potential needs eigenvectors")
        # V_jk(x) = Σ_y V(x, y) ψ_j ψ_k h
        blocks = np.einsum("xy,jy,ky->xjk", V, parallel.vectors, parallel.vectors) * parallel.weight
        return sp.block_diag(list(blocks), format="csr")
    if V.shape != (Nt, K):
        raise ValueError(f"potential must have shape {(Nt, K)}")
    return sp.diags(V.ravel())


# --- magnetic translations -------------------------------------------------

@dataclass(frozen=True)
class MagneticTranslation:
    """Unitary relating the operators on ``window`` and ``window + xi``.

    With ``D = diag(phases)`` on the grid of ``window`` (grid points of
    both windows are matched by index), ``H_{window+xi} = D H_window D^*``.
    """

    xi: np.ndarray
    window: LatticeWindow
    target: LatticeWindow
    phases: np.ndarray

    def apply(self, H) -> sp.csr_matrix:
        D = sp.diags(self.phases)
        return (D @ H @ D.conj()).tocsr()


def magnetic_translate(op: TransverseOperator, xi) -> MagneticTranslation:
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (op.window.d,):
        raise ValueError("xi must have d components")
    cells = xi / op.window.h
    if np.any(np.abs(cells - np.round(cells)) > 1e-9):
        raise ValueError("xi must be a whole number of grid cells")
    x = op.window.points()
    phases = np.exp(0.5j * (x @ (op.B.T @ xi)))
    return MagneticTranslation(xi=xi, window=op.window, target=op.window.translated(xi),
                               phases=phases)


def export_coo(matrix, path) -> None:
    """Write ``row col re im`` lines (0-based indices) for external verification."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    data = np.asarray(coo.data, dtype=complex)[order]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, z in zip(coo.row[order], coo.col[order], data):
            fh.write(f"{r} {c} {float(z.real)!r} {float(z.imag)!r}\n")
