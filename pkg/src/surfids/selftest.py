"""Built-in battery of worked examples and invariants.

Every check is small enough for a laptop and deterministic; the report
lists one line per check and contains no timings.
"""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from . import analysis, counting, disorder, hamiltonians as ham, magnetic as mc
from .errors import BadParameters

CHECKS = []


def check(name):
    def wrap(fn):
        CHECKS.append((name, fn))
        return fn
    return wrap


@check("canonicalize_field examples")
def _canon():
    a = mc.canonicalize_field([[0, 1], [-1, 0]])
    b = mc.canonicalize_field(np.zeros((3, 3)))
    c = mc.canonicalize_field(mc.canonical_matrix([1, 2]))
    ok = (a.b == (1.0,) and a.n == 0 and b.m == 0 and b.n == 3 and b.beta == 0
          and np.allclose(c.b, (2, 1)) and math.isclose(c.beta, 3))
    return ok, f"b={c.b!r}"


@check("landau_ladder examples")
def _ladder():
    l1 = mc.landau_ladder(mc.MagneticStructure.from_frequencies([1]), 5).levels
    l2 = mc.landau_ladder(mc.MagneticStructure.from_frequencies([2, 1]), 8).levels
    return (l1 == ((0.0, 1), (2.0, 1), (4.0, 1))
            and l2 == ((0.0, 1), (2.0, 1), (4.0, 2), (6.0, 2), (8.0, 3))), f"{l2!r}"


@check("free_ids and convolution examples")
def _free():
    v1 = mc.free_ids(mc.MagneticStructure.from_frequencies([], 1), math.pi**2)
    v2 = mc.free_ids(mc.MagneticStructure.from_frequencies([1]), 3.0)
    rho = mc.CountingMeasure.from_levels([-4.0, -1.0])
    v3 = mc.convolve_with_counting(mc.MagneticStructure.from_frequencies([], 2), rho, 0.0)
    ok = (math.isclose(v1, 1.0, rel_tol=1e-12) and math.isclose(v2, 1 / math.pi, rel_tol=1e-12)
          and math.isclose(v3, 5 / (4 * math.pi), rel_tol=1e-12))
    return ok, f"{v1!r} {v2!r} {v3!r}"


@check("karamata coefficient against the confining convolution")
def _karamata():
    ms = mc.MagneticStructure.from_frequencies([], 2)
    levels = 2 * np.arange(200) + 1.0
    rho = mc.CountingMeasure.from_levels(levels, math.inf, float(levels[-1]))
    E = 200.0
    ratio = mc.convolve_with_counting(ms, rho, E) / E**2
    coeff = mc.karamata_coefficient(2, 1.0, 0.5)
    return abs(ratio / coeff - 1) < 0.15, f"ratio={ratio!r} coeff={coeff!r}"


@check("count_below: dense and inertia agree")
def _count():
    rng = np.random.default_rng(12345)
    A = rng.normal(size=(50, 50)) + 1j * rng.normal(size=(50, 50))
    A = A + A.conj().T
    Es = rng.uniform(-20, 20, 20)
    dense = counting.count_below_many(A, Es)
    sparse = counting.count_below_many(sp.csr_matrix(A), Es, dense_cap=0)
    small = (counting.count_below(np.array([[5.0]]), 4) == 0
             and counting.count_below(np.array([[5.0]]), 6) == 1
             and counting.count_below(np.diag([1.0, 2.0, 3.0]), 2) == 1)
    return bool(np.array_equal(dense, sparse) and small), f"{dense.tolist()!r}"


@check("delta well ground state")
def _delta():
    sp_ = ham.solve_parallel(ham.DeltaWell(2.0), ham.LatticeWindow(1, 40.0, 0.01), 1)
    return abs(sp_.energies[0] + 1) < 1e-3, f"E1={float(sp_.energies[0])!r}"


@check("harmonic longitudinal spectrum")
def _harm():
    sp_ = ham.solve_parallel(ham.harmonic(1.0), ham.LatticeWindow(1, 20.0, 0.01), 2)
    return bool(np.allclose(sp_.energies, [1, 3], atol=1e-2)), f"{sp_.energies.tolist()!r}"


@check("Kronecker-sum spectrum")
def _kron():
    op = ham.build_transverse(ham.LatticeWindow(2, 7 * 0.5, 0.5), mc.canonical_matrix([0.3]))
    par = ham.solve_parallel(ham.ExplicitLevels((-1.0, -0.4, 0.2)), None, 3)
    H = ham.assemble(op, par).matrix.toarray()
    wt = np.linalg.eigvalsh(op.matrix.toarray())
    want = np.sort((wt[:, None] + par.energies[None, :]).ravel())
    return bool(np.allclose(np.linalg.eigvalsh(H), want, atol=1e-10)), f"dim={H.shape[0]}"


@check("magnetic translation reproduces the shifted window")
def _translate():
    B = mc.canonical_matrix([1.0])
    w = ham.LatticeWindow(2, 4.0, 0.25)
    op = ham.build_transverse(w, B)
    tr = ham.magnetic_translate(op, (1.0, 0.0))
    moved = ham.build_transverse(tr.target, B)
    err = float(abs(tr.apply(op.matrix) - moved.matrix).max())
    return err < 1e-12, f"max entry error={err:.1e}"


@check("coupling sampler determinism and power law")
def _couplings():
    law = disorder.CouplingLaw("power", 1.0, 2.0)
    sites = np.stack(np.meshgrid(np.arange(10), np.arange(10), indexing="ij"), -1).reshape(-1, 2)
    a = disorder.sample_couplings(law, sites, 99).as_dict()
    b = disorder.sample_couplings(law, sites[::-1], 99).as_dict()
    big = disorder.sample_couplings(law, np.arange(100000)[:, None], 7).values
    frac = float(np.mean(big < 0.1))
    sigma = math.sqrt(0.01 * 0.99 / 1e5)
    return a == b and abs(frac - 0.01) < 3 * sigma, f"fraction below 0.1 = {frac!r}"


@check("reduce_site for the delta well")
def _reduce():
    grid = ham.LatticeWindow(1, 40.0, 0.01)
    sp_ = ham.solve_parallel(ham.DeltaWell(2.0), grid, 1)
    prof = disorder.compact_profile(1.0, 1.0, disorder.LongitudinalFactor("indicator", 1.0))
    w = disorder.reduce_site(prof, sp_.vectors[0], grid.h, grid.points()[:, 0])
    want = 1 - math.exp(-2)
    return abs(w.amplitude - want) < 5e-3, f"w_1 amplitude={w.amplitude!r}"


@check("sup_bound of a compact profile")
def _sup():
    M = disorder.sup_bound(disorder.compact_profile(1.0), disorder.CouplingLaw(), 0.5, 2)
    return M == 1.0, f"M={M!r}"


def _small_model(seed_levels=(-1.0, 0.6)):
    par = ham.solve_parallel(ham.ExplicitLevels(seed_levels, 1.0), None, len(seed_levels))
    prof = disorder.gaussian_profile(rate=2.0, amplitude=0.1)
    return counting.SurfaceModel(B=mc.canonical_matrix([1.0]), parallel=par, h=0.25,
                                 profile=prof, law=disorder.CouplingLaw())


@check("finite-volume sandwich (20 realizations)")
def _finite():
    m = _small_model()
    rep = analysis.finite_sandwich_check(m, 3.0, np.linspace(-1.2, 0.9, 20), 20, 5)
    return rep.passed, f"violations={rep.violations}"


@check("projection bound (10 realizations)")
def _proj():
    m = _small_model()
    rep = analysis.projection_bound_check(m, 3.0, np.linspace(0.05, 1.0, 20), 10, 6)
    return rep.passed, f"violations={rep.violations}"


@check("superadditivity under a midplane cut")
def _super():
    m = _small_model()
    rep = counting.superadditivity_check(m, 4.0, np.linspace(-1.0, 2.0, 30), 5, 8)
    return rep.passed, f"violations={rep.violations}"


@check("admissible parameter intervals")
def _params():
    d = analysis.ground_edge_parameters(0.2, 0.0, 1.0, 0.5)
    lo = 0.2 / 0.7
    try:
        analysis.ground_edge_parameters(0.2, 0.0, 1.0, 0.5, lo)
        boundary = False
    except BadParameters:
        boundary = True
    try:
        analysis.internal_edge_parameters(0.1, -0.5, 0.0, 0.6, 0.2, 1.0)
        lam_edge = False
    except BadParameters:
        lam_edge = True
    dm, dp = analysis.internal_edge_parameters(0.1, -0.5, 0.0, 0.6, 0.19, 1.0)
    return (math.isclose(d, 0.5 * (lo + 1)) and boundary and lam_edge and dm == 1.0,
            f"delta={d!r} delta_+={dp!r}")


@check("Lifshits fitter on synthetic curves")
def _fit():
    lam = np.linspace(0.05, 0.5, 40)
    s1 = analysis.fit_lifshits(lam, np.exp(-lam**-2.0), "log").slope
    s2 = analysis.fit_lifshits(lam, np.exp(-np.abs(np.log(lam)) ** 3), "loglog").slope
    s3 = analysis.fit_lifshits(lam, np.exp(-3.0 * lam**-2.0), "log").slope
    ok = abs(s1 + 2) < 1e-6 and abs(s2 - 3) < 1e-6 and abs(s3 + 2) < 1e-3
    return ok, f"{s1!r} {s2!r} {s3!r}"


def run_selftest() -> tuple[str, bool]:
    lines = []
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, reported by type
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}  [{detail}]")
    lines.append(f"{sum(l.startswith('PASS') for l in lines)}/{len(CHECKS)} checks passed")
    return "\n".join(lines) + "\n", all_ok
