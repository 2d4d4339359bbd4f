"""Two-sided IDSS estimates, the plateau identity and Lifshits-exponent fits.

Ensemble comparisons allow ``stat_tol`` combined standard errors (plus an
optional absolute finite-size allowance); per-realization integer
inequalities allow no slack at all.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .counting import (
    EmpiricalCurve,
    EnsembleStats,
    SurfaceModel,
    _seeds,
    count_below_many,
    idss_estimate,
    reduced_ids_estimate,
    tie_epsilon,
)
from .errors import BadParameters, DegenerateWindow, HypothesisViolated, TooFewPoints
from .hamiltonians import ParallelSpectrum, TransverseOperator
from .magnetic import (
    CountingMeasure,
    MagneticStructure,
    canonicalize_field,
    convolve_with_counting,
)

__all__ = [
    "SandwichReport",
    "global_sandwich",
    "ground_edge_parameters",
    "internal_edge_parameters",
    "ground_edge_sandwich",
    "internal_edge_sandwich",
    "ProjectionReport",
    "projection_bound_check",
    "FiniteSandwichReport",
    "finite_sandwich_check",
    "PlateauReport",
    "plateau_check",
    "LifshitsFit",
    "fit_lifshits",
    "lifshits_targets",
    "Cluster",
    "landau_clusters",
    "global_study",
    "ground_edge_study",
    "internal_edge_study",
    "DEFAULT_STAT_TOL",
]

DEFAULT_STAT_TOL = 2.0


# --- sandwich reports -------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    kind: str
    energies: np.ndarray
    lower: np.ndarray
    target: np.ndarray
    upper: np.ndarray
    tolerance: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def slack(self) -> np.ndarray:
        """Smallest margin to either bound; negative where a bound is crossed."""
        return np.minimum(self.target - self.lower, self.upper - self.target)

    @property
    def passes(self) -> np.ndarray:
        return self.slack >= -self.tolerance

    @property
    def passed(self) -> bool:
        return bool(self.passes.all())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("E,lower,target,upper,tolerance,slack,pass\n")
        for row in zip(self.energies, self.lower, self.target, self.upper, self.tolerance,
                       self.slack, self.passes):
            *nums, ok = row
            buf.write(",".join(repr(float(x)) for x in nums) + f",{int(bool(ok))}\n")
        return buf.getvalue()

    def summary(self) -> str:
        lines = [f"{self.kind} sandwich: {'PASS' if self.passed else 'FAIL'}",
                 f"  points: {len(self.energies)}, failures: {int((~self.passes).sum())}",
                 f"  min slack: {float(self.slack.min())!r}" if len(self.energies) else "  empty"]
        for k in sorted(self.params):
            lines.append(f"  {k} = {self.params[k]!r}")
        return "\n".join(lines) + "\n"


def _tol(stat_tol, abs_tol, *errs):
    se = np.sqrt(sum(np.asarray(e, dtype=float) ** 2 for e in errs))
    return stat_tol * se + abs_tol


def global_sandwich(curve: EmpiricalCurve, ms: MagneticStructure, rho: CountingMeasure,
                    M: float, stat_tol: float = DEFAULT_STAT_TOL,
                    abs_tol: float = 0.0) -> SandwichReport:
    """Compare ``ν̂`` with ``(N_0 * dρ)(E - M)`` and ``(N_0 * dρ)(E)``."""
    E = np.asarray(curve.energies, dtype=float)
    lower = np.array([convolve_with_counting(ms, rho, e - M) for e in E])
    upper = np.array([convolve_with_counting(ms, rho, e) for e in E])
    return SandwichReport("global", E, lower, np.asarray(curve.values), upper,
                          _tol(stat_tol, abs_tol, curve.std_err), {"M": float(M)})


def _open(x, lo, hi):
    return lo < x < hi


def ground_edge_parameters(M: float, E1: float, E2: float, lam_star: float,
                           delta: float | None = None) -> float:
    """Validate ``(λ_*, δ)`` for the ground-edge sandwich and return ``δ``.

    ``δ`` defaults to the midpoint of its admissible interval.
    """
    gap = E2 - E1
    if not gap > 0:
        raise HypothesisViolated(f"E_2 - E_1 = {gap!r} must be positive")
    if not _open(lam_star, 0.0, gap):
        raise BadParameters(f"lambda_* = {lam_star!r} outside (0, {gap!r})", {"lambda_*": (0.0, gap)})
    lo = M / (M + gap - lam_star)
    if delta is None:
        return 0.5 * (lo + 1.0)
    if not _open(delta, lo, 1.0):
        raise BadParameters(f"delta = {delta!r} outside ({lo!r}, 1)", {"delta": (lo, 1.0)})
    return float(delta)


def internal_edge_parameters(M: float, E_prev: float, Ej: float, E_next: float,
                             lam_star: float, delta_minus: float | None = None,
                             delta_plus: float | None = None) -> tuple[float, float]:
    """Validate the internal-edge parameters and return ``(δ_-, δ_+)``.

    Pass ``E_next = ℰ`` when ``E_j`` is the highest bound state.  ``δ_-``
    defaults to twice its lower bound (1 when ``M = 0``), ``δ_+`` to the
    midpoint of its interval.
    """
    if not (E_prev < Ej < E_next):
        raise HypothesisViolated(f"need E_(j-1) < E_j < E_(j+1), got {E_prev!r}, {Ej!r}, {E_next!r}")
    if not M < Ej - E_prev:
        raise HypothesisViolated(f"M = {M!r} is not below E_j - E_(j-1) = {Ej - E_prev!r}")
    dm_lo = M / (Ej - E_prev - M)
    if delta_minus is None:
        delta_minus = 2 * dm_lo if dm_lo > 0 else 1.0
    elif not delta_minus > dm_lo:
        raise BadParameters(f"delta_- = {delta_minus!r} outside ({dm_lo!r}, inf)",
                            {"delta_-": (dm_lo, math.inf)})
    lam_hi = min(E_next - Ej, (1 + 1 / delta_minus) * M)
    if not _open(lam_star, 0.0, lam_hi):
        raise BadParameters(f"lambda_* = {lam_star!r} outside (0, {lam_hi!r})",
                            {"lambda_*": (0.0, lam_hi)})
    dp_lo = M / (M + E_next - Ej - lam_star)
    if delta_plus is None:
        delta_plus = 0.5 * (dp_lo + 1.0)
    elif not _open(delta_plus, dp_lo, 1.0):
        raise BadParameters(f"delta_+ = {delta_plus!r} outside ({dp_lo!r}, 1)",
                            {"delta_+": (dp_lo, 1.0)})
    return float(delta_minus), float(delta_plus)


def _lambda_grid(lambdas, lam_star):
    lam = np.asarray(lambdas, dtype=float)
    if np.any(lam <= 0) or np.any(lam > lam_star):
        raise BadParameters(f"lambda grid must lie in (0, {lam_star!r}]", {"lambda": (0.0, lam_star)})
    return lam


def ground_edge_sandwich(target: EmpiricalCurve, lower: EmpiricalCurve, upper: EmpiricalCurve,
                         lambdas, *, M: float, E1: float, E2: float, lam_star: float,
                         delta: float | None = None, stat_tol: float = DEFAULT_STAT_TOL,
                         abs_tol: float = 0.0) -> SandwichReport:
    """``N̂_{W_1}(λ) <= ν̂(E_1 + λ) <= N̂_{(1-δ)W_1}(λ)`` on ``(0, λ_*]``.

    ``target`` is sampled at ``E_1 + λ``; ``lower`` and ``upper`` at ``λ``.
    """
    delta = ground_edge_parameters(M, E1, E2, lam_star, delta)
    lam = _lambda_grid(lambdas, lam_star)
    return SandwichReport("ground-edge", lam, np.asarray(lower.values), np.asarray(target.values),
                          np.asarray(upper.values),
                          _tol(stat_tol, abs_tol, target.std_err, lower.std_err, upper.std_err),
                          {"M": M, "E1": E1, "E2": E2, "lambda_*": lam_star, "delta": delta})


def internal_edge_sandwich(difference: EmpiricalCurve, lower: EmpiricalCurve,
                           upper: EmpiricalCurve, lambdas, *, M: float, E_prev: float,
                           Ej: float, E_next: float, lam_star: float,
                           delta_minus: float | None = None, delta_plus: float | None = None,
                           stat_tol: float = DEFAULT_STAT_TOL,
                           abs_tol: float = 0.0) -> SandwichReport:
    """``N̂_{(1+δ_-)W_j}(λ) <= ν̂(E_j + λ) - ν̂(E_j) <= N̂_{(1-δ_+)W_j}(λ)``."""
    dm, dp = internal_edge_parameters(M, E_prev, Ej, E_next, lam_star, delta_minus, delta_plus)
    lam = _lambda_grid(lambdas, lam_star)
    return SandwichReport("internal-edge", lam, np.asarray(lower.values),
                          np.asarray(difference.values), np.asarray(upper.values),
                          _tol(stat_tol, abs_tol, difference.std_err, lower.std_err, upper.std_err),
                          {"M": M, "E_prev": E_prev, "Ej": Ej, "E_next": E_next,
                           "lambda_*": lam_star, "delta_-": dm, "delta_+": dp})


# --- exact per-realization inequalities -------------------------------------

@dataclass(frozen=True)
class ProjectionReport:
    """``N(H_ω; E_1 + λ) >= N(H_⊥ + W_{1,ω}; λ)`` per realization and ``λ``."""

    lambdas: np.ndarray
    full: np.ndarray
    projected: np.ndarray

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.full < self.projected))

    @property
    def passed(self) -> bool:
        return self.violations == 0


def projection_bound_check(model: SurfaceModel, L: float, lambdas, n_realizations: int,
                           seed: int, j: int = 1) -> ProjectionReport:
    """Exact finite-volume projection inequality on matched realizations.

    Both counts use the same absolute threshold, so the comparison is a
    pure statement about eigenvalues.
    """
    par = model.parallel
    if not isinstance(par, ParallelSpectrum):
        raise ValueError("the projection check needs the injected bound states")
    Ej = float(par.energies[j - 1])
    lam = np.asarray(lambdas, dtype=float)
    op = model.transverse(L)
    full, proj = [], []
    for s in _seeds(seed, n_realizations):
        H = model.hamiltonian(L, s, op).matrix
        R = (op.matrix + sp.diags(model.reduced_field(L, s, j))).tocsr()
        eps = max(tie_epsilon(H), tie_epsilon(R))
        full.append(count_below_many(H, Ej + lam, model.dense_cap, eps))
        proj.append(count_below_many(R, lam, model.dense_cap, eps))
    return ProjectionReport(lam, np.array(full), np.array(proj))


@dataclass(frozen=True)
class FiniteSandwichReport:
    """``N(H_0; E - M) <= N(H_ω; E) <= N(H_0; E)`` per realization and energy."""

    energies: np.ndarray
    M: float
    lower: np.ndarray
    counts: np.ndarray
    upper: np.ndarray

    @property
    def violations(self) -> int:
        return int(np.count_nonzero(self.counts < self.lower)
                   + np.count_nonzero(self.counts > self.upper))

    @property
    def passed(self) -> bool:
        return self.violations == 0


def finite_sandwich_check(model: SurfaceModel, L: float, energies, n_realizations: int,
                          seed: int, M: float | None = None) -> FiniteSandwichReport:
    """Exact Dirichlet sandwich between the free and shifted free counts.

    All three counts of a realization share one threshold offset.
    """
    E = np.asarray(energies, dtype=float)
    model.check_energies(E)
    M = model.sup_bound(L) if M is None else float(M)
    op = model.transverse(L)
    H0 = model.hamiltonian(L, None, op).matrix
    lower, counts, upper = [], [], []
    for s in _seeds(seed, n_realizations):
        H = model.hamiltonian(L, s, op).matrix
        eps = max(tie_epsilon(H), tie_epsilon(H0))
        counts.append(count_below_many(H, E, model.dense_cap, eps))
        both = count_below_many(H0, np.concatenate([E - M, E]), model.dense_cap, eps)
        lower.append(both[:len(E)])
        upper.append(both[len(E):])
    return FiniteSandwichReport(E, M, np.array(lower), np.array(counts), np.array(upper))


# --- plateau ------------------------------------------------------------------

@dataclass(frozen=True)
class PlateauReport:
    j: int
    M: float
    window: tuple[float, float]
    counts: np.ndarray
    value: float
    expected: float
    rel_tol: float

    @property
    def constant(self) -> bool:
        """No eigenvalue in the window on any realization."""
        return bool(np.all(self.counts == self.counts[:, :1]))

    @property
    def rel_error(self) -> float:
        if self.expected == 0:
            return abs(self.value)
        return abs(self.value - self.expected) / self.expected

    @property
    def passed(self) -> bool:
        return self.constant and self.rel_error <= self.rel_tol

    def summary(self) -> str:
        return (f"plateau j={self.j}: {'PASS' if self.passed else 'FAIL'}\n"
                f"  window = [{self.window[0]!r}, {self.window[1]!r}]\n"
                f"  constant on every realization: {self.constant}\n"
                f"  value = {self.value!r}, expected = {self.expected!r}, "
                f"rel_error = {self.rel_error!r}\n")


def plateau_check(model: SurfaceModel, L: float, j: int, n_realizations: int, seed: int,
                  M: float | None = None, rel_tol: float = 0.1, n_points: int = 5,
                  threads: int = 1) -> PlateauReport:
    """Check that ``ν̂`` is flat on ``[E_j - M, E_j]`` and equals ``(j-1) b_1...b_m/(2π)^m``."""
    from .counting import realization_counts

    ms = canonicalize_field(model.B)
    if ms.n != 0:
        raise HypothesisViolated("the plateau identity needs n = 0")
    par = model.parallel
    Ej = float(par.energies[j - 1])
    if j >= 2:
        gap = Ej - float(par.energies[j - 2])
        M_ = model.sup_bound(L) if M is None else float(M)
        if not M_ < gap:
            raise HypothesisViolated(f"M = {M_!r} is not below E_j - E_(j-1) = {gap!r}")
    else:
        M_ = model.sup_bound(L) if M is None else float(M)
    E = np.linspace(Ej - M_, Ej, n_points)
    counts = realization_counts(model, L, E, _seeds(seed, n_realizations), threads)
    value = float(counts[:, -1].mean()) / float(L) ** model.d
    expected = (j - 1) * ms.landau_density
    return PlateauReport(j, M_, (float(E[0]), Ej), counts, value, expected, rel_tol)


# --- Lifshits fits ------------------------------------------------------------

@dataclass(frozen=True)
class LifshitsFit:
    lambdas: np.ndarray
    abscissa: np.ndarray
    ordinate: np.ndarray
    used: np.ndarray
    axis: str
    slope: float
    intercept: float
    stderr: float
    ci: tuple[float, float]
    confidence: float
    asymptotic: bool = False

    @property
    def masked(self) -> np.ndarray:
        return self.lambdas[~self.used]

    @property
    def ci_halfwidth(self) -> float:
        return 0.5 * (self.ci[1] - self.ci[0])

    def summary(self) -> str:
        note = "" if self.asymptotic else \
            "  empirical exponents are not expected to match the asymptotic value at this scale\n"
        return (f"Lifshits fit ({self.axis}): slope = {self.slope!r}\n"
                f"  {int(self.confidence * 100)}% CI = [{self.ci[0]!r}, {self.ci[1]!r}]\n"
                f"  points used = {int(self.used.sum())}, masked = {int((~self.used).sum())}\n"
                + note)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lambda,x,z,used\n")
        for lam, x, z, u in zip(self.lambdas, self.abscissa, self.ordinate, self.used):
            buf.write(f"{float(lam)!r},{float(x)!r},{float(z)!r},{int(bool(u))}\n")
        return buf.getvalue()


def fit_lifshits(lambdas, y, axis: str = "log", window: tuple[float, float] | None = None,
                 confidence: float = 0.95, asymptotic: bool = True) -> LifshitsFit:
    """Least-squares slope of ``ln|ln y|`` against ``ln λ`` or ``ln|ln λ|``.

    Only points with ``0 < y < 1`` (and ``0 < λ < 1`` on the ``loglog``
    axis) inside ``window`` enter the regression.  Set ``asymptotic=False``
    for empirical curves, whose slopes are pre-asymptotic.
    """
    lam = np.asarray(lambdas, dtype=float)
    y = np.asarray(y, dtype=float)
    if lam.shape != y.shape:
        raise ValueError("lambdas and y differ in shape")
    if axis not in ("log", "loglog"):
        raise ValueError("axis must be 'log' or 'loglog'")
    ok = (y > 0) & (y < 1) & (lam > 0)
    if axis == "loglog":
        ok &= lam < 1
    if window is not None:
        ok &= (lam >= window[0]) & (lam <= window[1])
    if not ok.any():
        raise DegenerateWindow("no point with 0 < y < 1 in the window")
    if ok.sum() < 5:
        raise TooFewPoints(f"{int(ok.sum())} usable points, need at least 5")
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.log(lam) if axis == "log" else np.log(np.abs(np.log(lam)))
        z = np.log(np.abs(np.log(y)))
    res = stats.linregress(x[ok], z[ok])
    dof = int(ok.sum()) - 2
    t = stats.t.ppf(0.5 + confidence / 2, dof)
    half = float(t * res.stderr)
    return LifshitsFit(lam, x, z, ok, axis, float(res.slope), float(res.intercept),
                       float(res.stderr), (float(res.slope) - half, float(res.slope) + half),
                       confidence, asymptotic)


def lifshits_targets(d: int, kappa: float | None = None, beta: float | None = None) -> dict:
    """Limiting slopes of the double-log transforms, keyed by regime.

    ``edge_power``: ``-2/(ϰ-2)`` on ``ln λ`` (power-law single-site decay at a band edge,
    needs ``ϰ > 2``); ``edge_gaussian``: ``1 + 2/β`` on ``ln|ln λ|``;
    ``edge_compact``: ``2`` on ``ln|ln λ|``; ``bottom_power``: ``-d/(ϰ-d)`` on
    ``ln λ``; ``bottom_fast``: ``-d/2`` on ``ln λ``.
    """
    out = {"edge_compact": 2.0, "bottom_fast": -d / 2}
    if kappa is not None:
        if kappa > 2:
            out["edge_power"] = -2 / (kappa - 2)
        if kappa > d:
            out["bottom_power"] = -d / (kappa - d)
    if beta is not None:
        out["edge_gaussian"] = 1 + 2 / beta
    return out


# --- Landau clusters ------------------------------------------------------------

@dataclass(frozen=True)
class Cluster:
    lo: float
    hi: float
    center: float
    count_below: int
    size: int


def landau_clusters(op: TransverseOperator, e_min: float, e_max: float, bin_width: float = 0.1,
                    dense_fraction: float = 0.25, dense_cap: int = 4000,
                    refine_tol: float = 1e-4) -> list[Cluster]:
    """Spectral clusters of a transverse operator from its counting function.

    A bin is dense when it holds at least ``dense_fraction`` of one Landau
    level's degeneracy ``L^d b_1...b_m/(2π)^m``; adjacent dense bins form a
    cluster.  ``center`` is the energy where the count crosses the middle
    of the cluster, located by bisection.
    """
    H = op.matrix
    n_bins = int(math.ceil((e_max - e_min) / bin_width))
    edges = e_min + bin_width * np.arange(n_bins + 1)
    eps = tie_epsilon(H)
    counts = count_below_many(H, edges, dense_cap, eps)
    degeneracy = op.field.landau_density * op.window.volume
    dense = np.diff(counts) >= dense_fraction * degeneracy
    clusters = []
    i = 0
    while i < n_bins:
        if not dense[i]:
            i += 1
            continue
        k = i
        while k + 1 < n_bins and dense[k + 1]:
            k += 1
        lo, hi = float(edges[i]), float(edges[k + 1])
        c_lo, c_hi = int(counts[i]), int(counts[k + 1])
        half = c_lo + (c_hi - c_lo) / 2
        a, b = lo, hi
        while b - a > refine_tol:
            mid = 0.5 * (a + b)
            if count_below_many(H, [mid], dense_cap, eps)[0] < half:
                a = mid
            else:
                b = mid
        clusters.append(Cluster(lo, hi, 0.5 * (a + b), c_lo, c_hi - c_lo))
        i = k + 1
    return clusters


# --- pipelines ------------------------------------------------------------------

def global_study(model: SurfaceModel, L: float, energies, n_realizations: int, seed: int,
                 stat_tol: float = DEFAULT_STAT_TOL, abs_tol: float = 0.0, threads: int = 1):
    curve, _ = idss_estimate(model, L, energies, n_realizations, seed, threads)
    ms = canonicalize_field(model.B)
    rho = model.parallel.counting_measure()
    return global_sandwich(curve, ms, rho, model.sup_bound(L), stat_tol, abs_tol), curve


def ground_edge_study(model: SurfaceModel, L: float, lambdas, lam_star: float,
                      n_realizations: int, seed: int, delta: float | None = None,
                      stat_tol: float = DEFAULT_STAT_TOL, abs_tol: float = 0.0, threads: int = 1):
    """Ensemble ground-edge sandwich plus the exact projection inequality."""
    par = model.parallel
    E1, E2 = float(par.energies[0]), (float(par.energies[1]) if len(par) > 1
                                      else float(par.complete_below))
    M = model.sup_bound(L)
    delta = ground_edge_parameters(M, E1, E2, lam_star, delta)
    lam = _lambda_grid(lambdas, lam_star)
    target, _ = idss_estimate(model, L, E1 + lam, n_realizations, seed, threads)
    lower, _ = reduced_ids_estimate(model, L, lam, n_realizations, seed, 1, 1.0, threads)
    upper, _ = reduced_ids_estimate(model, L, lam, n_realizations, seed, 1, 1.0 - delta, threads)
    rep = ground_edge_sandwich(target, lower, upper, lam, M=M, E1=E1, E2=E2, lam_star=lam_star,
                               delta=delta, stat_tol=stat_tol, abs_tol=abs_tol)
    proj = projection_bound_check(model, L, lam, n_realizations, seed)
    return rep, proj


def internal_edge_study(model: SurfaceModel, L: float, j: int, lambdas, lam_star: float,
                        n_realizations: int, seed: int, delta_minus: float | None = None,
                        delta_plus: float | None = None, stat_tol: float = DEFAULT_STAT_TOL,
                        abs_tol: float = 0.0, threads: int = 1):
    """Ensemble internal-edge sandwich at ``E_j`` (``j >= 2``, ``n = 0``)."""
    from .counting import realization_counts
    from .magnetic import landau_ladder

    ms = canonicalize_field(model.B)
    par = model.parallel
    if j < 2 or j > len(par):
        raise HypothesisViolated(f"j = {j} must satisfy 2 <= j <= {len(par)}")
    if ms.n != 0:
        raise HypothesisViolated("the internal-edge estimate needs n = 0")
    floor = model.essential_floor
    ladder = landau_ladder(ms, 2 * max(ms.b))
    lam1 = float(ladder.energies[1]) if len(ladder.levels) > 1 else math.inf
    if not float(par.energies[0]) + lam1 > floor:
        raise HypothesisViolated("need E_1 + Λ_1 above the essential floor")
    E_prev, Ej = float(par.energies[j - 2]), float(par.energies[j - 1])
    E_next = float(par.energies[j]) if j < len(par) else float(par.complete_below)
    M = model.sup_bound(L)
    dm, dp = internal_edge_parameters(M, E_prev, Ej, E_next, lam_star, delta_minus, delta_plus)
    lam = _lambda_grid(lambdas, lam_star)
    model.check_energies(Ej + lam)
    seeds = _seeds(seed, n_realizations)
    counts = realization_counts(model, L, np.concatenate([[Ej], Ej + lam]), seeds, threads)
    vol = float(L) ** model.d
    st = EnsembleStats.from_samples((counts[:, 1:] - counts[:, :1]) / vol)
    diff = EmpiricalCurve(lam, st.mean, st.std_err, st.n_real, float(L), model.h, int(seed), vol,
                          f"difference(j={j})")
    lower, _ = reduced_ids_estimate(model, L, lam, n_realizations, seed, j, 1.0 + dm, threads)
    upper, _ = reduced_ids_estimate(model, L, lam, n_realizations, seed, j, 1.0 - dp, threads)
    return internal_edge_sandwich(diff, lower, upper, lam, M=M, E_prev=E_prev, Ej=Ej,
                                  E_next=E_next, lam_star=lam_star, delta_minus=dm,
                                  delta_plus=dp, stat_tol=stat_tol, abs_tol=abs_tol)
