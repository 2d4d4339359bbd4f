"""Eigenvalue counting and finite-volume estimators of the surface IDS.

Counts use a dense eigensolve for small matrices and the Sylvester
inertia of ``H - E`` otherwise.  Ensemble estimators average the
normalized counts over realizations whose seeds are derived from one
base seed, reduced in realization order.
"""
from __future__ import annotations

import io
import math
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .disorder import (
    DEFAULT_TAIL_TOL,
    CouplingLaw,
    SingleSiteProfile,
    choose_halo,
    derive_seed,
    realization_for_window,
    reduce_site,
    sup_bound,
    transverse_field,
)
from .errors import AboveEssentialFloor, FactorizationBreakdown
from .linalg import inertia_count, tie_epsilon
from .hamiltonians import (
    DEFAULT_MAX_DIM,
    LatticeWindow,
    ParallelGridOperator,
    ParallelSpectrum,
    SeparablePotential,
    TransverseOperator,
    assemble,
    build_transverse,
)

__all__ = [
    "DEFAULT_DENSE_CAP",
    "tie_epsilon",
    "inertia_count",
    "count_below",
    "count_below_many",
    "EmpiricalCurve",
    "EnsembleStats",
    "SurfaceModel",
    "realization_counts",
    "reduced_counts",
    "idss_estimate",
    "reduced_ids_estimate",
    "SuperadditivityReport",
    "superadditivity_check",
    "ConvergenceTable",
    "convergence_study",
    "write_atomic",
]

DEFAULT_DENSE_CAP = 4000
DENSE_ALWAYS = 256


def _sparse_count(H, threshold, eps):
    try:
        return inertia_count(H, threshold)
    except FactorizationBreakdown as first:
        for step in (-10 * eps, 10 * eps):
            try:
                n = inertia_count(H, threshold + step)
            except FactorizationBreakdown:
                continue
            warnings.warn(f"inertia count at {threshold!r} broke down; used {threshold + step!r}",
                          stacklevel=3)
            return n
        raise FactorizationBreakdown(
            f"inertia count failed at {threshold!r} and at ±{10 * eps:.3g}") from first


def count_below(H, E: float, dense_cap: int = DEFAULT_DENSE_CAP,
                tie_eps: float | None = None) -> int:
    """Number of eigenvalues of Hermitian ``H`` strictly below ``E - tie_eps``."""
    return int(count_below_many(H, [E], dense_cap, tie_eps)[0])


def count_below_many(H, energies, dense_cap: int = DEFAULT_DENSE_CAP,
                     tie_eps: float | None = None) -> np.ndarray:
    """Counts below each energy, sharing one ``tie_eps``.

    Dense eigenvalues are used only up to ``dense_cap`` unknowns and only
    when cheaper than one sparse inertia factorization per energy.
    """
    energies = np.asarray(energies, dtype=float)
    eps = tie_epsilon(H) if tie_eps is None else tie_eps
    thresholds = energies - eps
    n = H.shape[0]
    # a full eigensolve costs about as much as n/4 sparse factorizations
    if n <= dense_cap and (n <= DENSE_ALWAYS or len(energies) > n // 4):
        A = H.toarray() if sp.issparse(H) else np.asarray(H)
        w = np.linalg.eigvalsh(A)
        return np.searchsorted(w, thresholds, side="left").astype(np.int64)
    Hs = sp.csc_matrix(H)
    out = np.empty(len(energies), dtype=np.int64)
    for i, t in enumerate(thresholds):
        out[i] = _sparse_count(Hs, float(t), eps)
    return out


# --- curves ---------------------------------------------------------------

def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class EnsembleStats:
    mean: np.ndarray
    std: np.ndarray
    n_real: int
    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def std_err(self) -> np.ndarray:
        return self.std / math.sqrt(self.n_real) if self.n_real > 0 else self.std

    @classmethod
    def from_samples(cls, samples) -> "EnsembleStats":
        s = np.asarray(samples, dtype=float)
        if s.ndim == 1:
            s = s[None, :]
        n = s.shape[0]
        # explicit row-order sum keeps the reduction independent of scheduling
        mean = np.zeros(s.shape[1])
        for row in s:
            mean = mean + row
        mean = mean / n
        std = np.sqrt(((s - mean) ** 2).sum(axis=0) / (n - 1)) if n > 1 else np.zeros(s.shape[1])
        return cls(mean=mean, std=std, n_real=n, minimum=s.min(axis=0), maximum=s.max(axis=0))


@dataclass(frozen=True)
class EmpiricalCurve:
    """Ensemble-mean counting curve on a fixed energy grid."""

    energies: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    n_real: int
    L: float
    h: float
    seed0: int
    normalization: float = 1.0
    descriptor: str = ""

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if e.shape != v.shape:
            raise ValueError("energies and values differ in shape")
        if np.any(np.diff(e) < 0):
            raise ValueError("energies must be sorted")
        if np.any(v < 0):
            raise ValueError("values must be nonnegative")
        if np.any(np.diff(v) < -1e-12 * max(1.0, float(np.abs(v).max(initial=0)))):
            raise ValueError("values must be non-decreasing in energy")

    def __call__(self, E):
        """Value at grid energies (exact lookup)."""
        E = np.atleast_1d(np.asarray(E, dtype=float))
        idx = np.searchsorted(self.energies, E)
        ok = (idx < len(self.energies)) & np.isclose(self.energies[np.minimum(idx, len(self.energies) - 1)], E,
                                                     rtol=0, atol=1e-12)
        if not ok.all():
            raise KeyError("energy not on the curve grid")
        return self.values[idx]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("E,value,std_err,n_real,L,h,seed0\n")
        for e, v, s in zip(self.energies, self.values, self.std_err):
            buf.write(f"{float(e)!r},{float(v)!r},{float(s)!r},{self.n_real},"
                      f"{float(self.L)!r},{float(self.h)!r},{int(self.seed0)}\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        write_atomic(path, self.to_csv())

    @classmethod
    def read_csv(cls, path_or_text) -> "EmpiricalCurve":
        text = path_or_text
        if "\n" not in str(path_or_text):
            with open(path_or_text, encoding="utf-8") as fh:
                text = fh.read()
        rows = [ln.split(",") for ln in text.strip().splitlines()]
        if rows[0] != ["E", "value", "std_err", "n_real", "L", "h", "seed0"]:
            raise ValueError("not an EmpiricalCurve CSV")
        data = rows[1:]
        E = np.array([float(r[0]) for r in data])
        v = np.array([float(r[1]) for r in data])
        s = np.array([float(r[2]) for r in data])
        n, L, h, seed = (int(data[0][3]), float(data[0][4]), float(data[0][5]),
                         int(data[0][6])) if data else (0, 0.0, 0.0, 0)
        return cls(E, v, s, n, L, h, seed)

    def plot_data(self) -> str:
        return "".join(f"{float(e)!r} {float(v)!r}\n" for e, v in zip(self.energies, self.values))


# --- surface model ----------------------------------------------------------

@dataclass(frozen=True)
class SurfaceModel:
    """Everything that fixes ``H_ω`` on a window except ``L`` and the seed.

    ``parallel`` is either the injected bound states (injection mode) or
    the longitudinal grid operator (grid mode).  ``profile=None`` means
    ``V = 0``.
    """

    B: np.ndarray = field(repr=False)
    parallel: ParallelSpectrum | ParallelGridOperator
    h: float
    profile: SingleSiteProfile | None = None
    law: CouplingLaw = CouplingLaw()
    shift: str = "continuum"
    halo: float | None = None
    tail_tol: float = DEFAULT_TAIL_TOL
    offset: tuple[float, ...] | None = None
    dense_cap: int = DEFAULT_DENSE_CAP
    max_dim: int = DEFAULT_MAX_DIM

    @property
    def d(self) -> int:
        return int(np.atleast_2d(self.B).shape[0])

    @property
    def essential_floor(self) -> float:
        return float(self.parallel.essential_floor)

    @property
    def energy_limit(self) -> float:
        """Largest energy at which counts are trustworthy."""
        if isinstance(self.parallel, ParallelSpectrum):
            return min(self.parallel.complete_below, self.essential_floor)
        return self.essential_floor

    def window(self, L: float) -> LatticeWindow:
        return LatticeWindow(self.d, L, self.h, self.offset)

    def transverse(self, L: float) -> TransverseOperator:
        return build_transverse(self.window(L), self.B, self.shift)

    def resolved_halo(self) -> float:
        if self.profile is None:
            return 0.0
        if self.halo is not None:
            return float(self.halo)
        return choose_halo(self.profile, self.d, self.law.E0, self.tail_tol)

    def realization(self, L: float, seed: int):
        return realization_for_window(self.window(L), self.resolved_halo(), self.law, seed)

    def field(self, L: float, seed: int) -> np.ndarray:
        """Transverse factor ``Σ λ_ξ a(x - ξ)`` on the grid."""
        w = self.window(L)
        if self.profile is None:
            return np.zeros(w.size)
        return transverse_field(self.realization(L, seed), self.profile, w,
                                self.resolved_halo(), self.tail_tol)

    def longitudinal_values(self) -> np.ndarray | None:
        if self.profile is None or self.profile.longitudinal is None:
            return None
        grid = self.parallel.grid
        if grid is None:
            raise ValueError("a longitudinal profile needs a longitudinal grid")
        return self.profile.longitudinal(grid.points()[:, 0] if grid.d == 1 else grid.points())

    def sup_bound(self, L: float | None = None) -> float:
        """``M`` for the sampled potential (on the window's grid when ``L`` is given)."""
        if self.profile is None:
            return 0.0
        w = None if L is None else self.window(L)
        return sup_bound(self.profile, self.law, self.resolved_halo(), self.d, w)

    def hamiltonian(self, L: float, seed: int | None, op: TransverseOperator | None = None):
        """Assembled ``H_ω`` (``seed=None`` gives ``H_0``)."""
        op = self.transverse(L) if op is None else op
        if seed is None or self.profile is None:
            return assemble(op, self.parallel, None, self.max_dim)
        pot = SeparablePotential(self.field(L, seed), self.longitudinal_values())
        return assemble(op, self.parallel, pot, self.max_dim)

    def reduced_weight(self, j: int) -> float:
        """``G_jj``: the factor turning the transverse field into ``W_j`` (``j`` 1-based)."""
        if self.profile is None or self.profile.longitudinal is None:
            return 1.0
        par = self.parallel
        if not isinstance(par, ParallelSpectrum) or par.vectors is None:
            raise ValueError("reduced potentials need bound-state vectors")
        y = par.grid.points()[:, 0] if par.grid.d == 1 else par.grid.points()
        w = reduce_site(self.profile, par.vectors[j - 1], par.weight, y)
        return w.amplitude / self.profile.amplitude if self.profile.amplitude else 0.0

    def reduced_field(self, L: float, seed: int, j: int = 1) -> np.ndarray:
        """``W_{j,ω}`` on the transverse grid."""
        return self.field(L, seed) * self.reduced_weight(j)

    def check_energies(self, energies) -> None:
        E = np.asarray(energies, dtype=float)
        if E.size and E.max() >= self.essential_floor:
            raise AboveEssentialFloor(
                f"energy {E.max()!r} is not below the essential floor {self.essential_floor!r}")
        if E.size and E.max() > self.energy_limit:
            raise AboveEssentialFloor(
                f"energy {E.max()!r} exceeds {self.energy_limit!r}, where the kept "
                "longitudinal levels stop being exhaustive")


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def realization_counts(model: SurfaceModel, L: float, energies, seeds,
                       threads: int = 1, free: bool = False) -> np.ndarray:
    """Integer counts ``N(H_ω; E)`` with shape ``(len(seeds), len(energies))``."""
    op = model.transverse(L)
    energies = np.asarray(energies, dtype=float)

    def one(seed):
        H = model.hamiltonian(L, None if free else seed, op).matrix
        return count_below_many(H, energies, model.dense_cap)

    return np.array(_map(one, list(seeds), threads), dtype=np.int64).reshape(len(seeds), len(energies))


def reduced_counts(model: SurfaceModel, L: float, energies, seeds, j: int = 1,
                   scale: float = 1.0, threads: int = 1) -> np.ndarray:
    """Counts of ``H_⊥ + scale * W_{j,ω}`` on the transverse window."""
    op = model.transverse(L)
    energies = np.asarray(energies, dtype=float)

    def one(seed):
        W = model.reduced_field(L, seed, j) * scale
        H = (op.matrix + sp.diags(W)).tocsr()
        return count_below_many(H, energies, model.dense_cap)

    return np.array(_map(one, list(seeds), threads), dtype=np.int64).reshape(len(seeds), len(energies))


def _seeds(seed, n):
    return [derive_seed(seed, r) for r in range(n)]


def _curve(energies, counts, L, model, seed, descriptor):
    vol = float(L) ** model.d
    stats = EnsembleStats.from_samples(counts / vol)
    curve = EmpiricalCurve(np.asarray(energies, dtype=float), stats.mean, stats.std_err,
                           stats.n_real, float(L), model.h, int(seed), vol, descriptor)
    return curve, stats


def idss_estimate(model: SurfaceModel, L: float, energies, n_realizations: int, seed: int,
                  threads: int = 1):
    """Ensemble mean of ``L^{-d} N(H_ω; E)``; returns ``(EmpiricalCurve, EnsembleStats)``."""
    model.check_energies(energies)
    seeds = _seeds(seed, n_realizations)
    counts = realization_counts(model, L, energies, seeds, threads)
    return _curve(energies, counts, L, model, seed, "idss")


def reduced_ids_estimate(model: SurfaceModel, L: float, energies, n_realizations: int,
                         seed: int, j: int = 1, scale: float = 1.0, threads: int = 1):
    """Ensemble mean of ``L^{-d} N(H_⊥ + scale W_{j,ω}; λ)``."""
    seeds = _seeds(seed, n_realizations)
    counts = reduced_counts(model, L, energies, seeds, j, scale, threads)
    return _curve(energies, counts, L, model, seed, f"reduced(j={j},scale={scale!r})")


@dataclass(frozen=True)
class SuperadditivityReport:
    energies: np.ndarray
    whole: np.ndarray
    parts: np.ndarray
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0


def superadditivity_check(model: SurfaceModel, L: float, energies, n_realizations: int,
                          seed: int, axis: int = 0, free: bool = False) -> SuperadditivityReport:
    """Compare ``N(H_O)`` with ``N(H_{O_1}) + N(H_{O_2})`` for the two halves of ``O``.

    The halves are the grid points on either side of the midplane
    ``x_axis = center``; their Dirichlet operators are principal
    submatrices of the operator on ``O``.
    """
    w = model.window(L)
    if w.n % 2 == 0:
        raise ValueError("the window needs an odd number of grid points per axis")
    op = model.transverse(L)
    energies = np.asarray(energies, dtype=float)
    pts_idx = np.indices(w.shape).reshape(w.d, -1)[axis]
    cut = w.n // 2
    seeds = _seeds(seed, n_realizations)
    whole, parts = [], []
    for s in seeds:
        A = model.hamiltonian(L, None if free else s, op)
        H = A.matrix
        eps = tie_epsilon(H)
        total = count_below_many(H, energies, model.dense_cap, eps)
        sub = np.zeros(len(energies), dtype=np.int64)
        for mask in (pts_idx < cut, pts_idx > cut):
            rows = A.transverse_indices(mask)
            sub += count_below_many(H[rows][:, rows], energies, model.dense_cap, eps)
        whole.append(total)
        parts.append(sub)
    whole = np.array(whole)
    parts = np.array(parts)
    return SuperadditivityReport(energies, whole, parts, int(np.count_nonzero(whole < parts)))


@dataclass(frozen=True)
class ConvergenceTable:
    Ls: tuple[float, ...]
    energies: np.ndarray
    curves: tuple[EmpiricalCurve, ...]

    @property
    def values(self) -> np.ndarray:
        return np.array([c.values for c in self.curves])

    def differences(self) -> np.ndarray:
        """``|ν̂(L_{k+1}) - ν̂(L_k)|`` for consecutive ladder entries."""
        return np.abs(np.diff(self.values, axis=0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("L,E,value,std_err,diff_prev\n")
        diffs = self.differences()
        for k, c in enumerate(self.curves):
            for i, e in enumerate(self.energies):
                dp = "" if k == 0 else repr(float(diffs[k - 1, i]))
                buf.write(f"{float(c.L)!r},{float(e)!r},{float(c.values[i])!r},"
                          f"{float(c.std_err[i])!r},{dp}\n")
        return buf.getvalue()


def convergence_study(model: SurfaceModel, Ls, energies, n_realizations: int, seed: int,
                      threads: int = 1) -> ConvergenceTable:
    """IDSS estimates on an ``L`` ladder with matched disorder keys."""
    curves = tuple(idss_estimate(model, L, energies, n_realizations, seed, threads)[0] for L in Ls)
    return ConvergenceTable(tuple(float(L) for L in Ls), np.asarray(energies, dtype=float), curves)
