import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from surfids.disorder import (
    CouplingLaw,
    DisorderRealization,
    LongitudinalFactor,
    choose_halo,
    compact_profile,
    derive_seed,
    evaluate_potential,
    gaussian_profile,
    hash_uniform,
    power_law_profile,
    realization_for_window,
    reduce_on_grid,
    reduce_site,
    reduced_field,
    sample_couplings,
    sup_bound,
    transverse_field,
)
from surfids.errors import HaloTooSmall
from surfids.hamiltonians import DeltaWell, LatticeWindow, solve_parallel


def square_sites(n, d=2):
    g = np.meshgrid(*([np.arange(-n, n + 1)] * d), indexing="ij")
    return np.stack([x.ravel() for x in g], axis=1)


def constant_realization(sites, value, law=CouplingLaw(), halo=0.0):
    sites = np.asarray(sites, dtype=np.int64)
    return DisorderRealization(sites, np.full(len(sites), float(value)), 0, law, None, halo)


# --- couplings ---

@given(st.integers(0, 2**64 - 1))
def test_uniform_support(seed):
    real = sample_couplings(CouplingLaw(), square_sites(3), seed)
    assert np.all((real.values >= 0) & (real.values <= 1))


def test_power_support_and_scale():
    real = sample_couplings(CouplingLaw("power", 2.5, 3.0), square_sites(4), 11)
    assert np.all((real.values >= 0) & (real.values <= 2.5))


@given(st.integers(0, 2**64 - 1), st.randoms(use_true_random=False))
def test_permutation_determinism(seed, r):
    sites = square_sites(3)
    perm = list(range(len(sites)))
    r.shuffle(perm)
    a = sample_couplings(CouplingLaw(), sites, seed).as_dict()
    b = sample_couplings(CouplingLaw(), sites[perm], seed).as_dict()
    assert a == b


def test_power_law_fraction_below_tenth():
    law = CouplingLaw("power", 1.0, 2.0)
    vals = sample_couplings(law, np.arange(100_000)[:, None], 7).values
    frac = np.mean(vals < 0.1)
    assert abs(frac - 0.01) < 3 * math.sqrt(0.01 * 0.99 / 1e5)


def test_uniform_mean_and_cdf():
    law = CouplingLaw()
    vals = sample_couplings(law, np.arange(20_000)[:, None], 3).values
    assert abs(vals.mean() - 0.5) < 3 * math.sqrt(1 / 12 / 2e4)
    assert law.cdf(0.25) == 0.25 and law.cdf(2.0) == 1.0


def test_key_shift_relabels():
    sites = square_sites(2)
    shifted = sample_couplings(CouplingLaw(), sites, 5, key_shift=(3, -1))
    direct = sample_couplings(CouplingLaw(), sites + [3, -1], 5)
    assert np.array_equal(shifted.values, direct.values)


def test_hash_and_derived_seeds_distinct():
    assert hash_uniform(1, (0, 0)) != hash_uniform(2, (0, 0))
    assert 0 < hash_uniform(1, (0, 0)) < 1
    seeds = {derive_seed(42, r) for r in range(1000)}
    assert len(seeds) == 1000


def test_manifest_regenerates():
    w = LatticeWindow(2, 3.0, 0.5)
    real = realization_for_window(w, 1.0, CouplingLaw(), 9)
    m = real.manifest()
    assert m["seed"] == 9 and m["halo"] == 1.0
    again = realization_for_window(w, m["halo"], CouplingLaw(m["law"], m["E0"], m["kappa"]), m["seed"])
    assert np.array_equal(real.values, again.values)


def test_bad_laws():
    with pytest.raises(ValueError):
        CouplingLaw("uniform", 1.0, 2.0)
    with pytest.raises(ValueError):
        CouplingLaw("power", -1.0, 2.0)


# --- evaluate_potential ---

def test_zero_couplings_give_zero():
    w = LatticeWindow(2, 4.0, 0.25)
    real = constant_realization(square_sites(4), 0.0, halo=2.0)
    prof = gaussian_profile(rate=2.0)
    assert np.all(transverse_field(real, prof, w, tail_tol=None) == 0)
    assert np.all(evaluate_potential(real, prof, w.points(), tail_tol=None) == 0)


def test_single_compact_site_is_indicator():
    real = constant_realization([[0, 0]], 1.0, halo=0.5)
    x = np.array([[0.2, -0.3], [0.49, 0.0], [0.6, 0.0], [0.0, -0.7]])
    v = evaluate_potential(real, compact_profile(1.0), x)
    assert v.tolist() == [1.0, 1.0, 0.0, 0.0]


def test_power_profile_bounds_at_center():
    kappa, d, E0 = 4.0, 2, 1.0
    prof = power_law_profile(kappa)
    R = 30.0
    real = constant_realization(square_sites(int(R)), E0, halo=R)
    v = evaluate_potential(real, prof, [[0.3, 0.2]], tail_tol=None)[0]
    cminus, _ = prof.lower_bound(d)
    series = sum((1 + np.linalg.norm(s)) ** -kappa for s in square_sites(60))
    assert cminus * E0 <= v <= E0 * series


def test_power_profile_pointwise_envelope():
    prof = power_law_profile(3.0, amplitude=0.7)
    z = np.random.default_rng(0).normal(scale=3, size=(200, 2))
    a = prof.transverse(z)
    assert np.all(a <= 0.7 * (1 + np.linalg.norm(z, axis=1)) ** -3.0 + 1e-15)
    cminus, r = prof.lower_bound(2)
    inside = np.linalg.norm(z, axis=1) <= r
    assert np.all(a[inside] >= cminus - 1e-15)


def test_kernel_and_direct_sums_agree():
    prof = gaussian_profile(rate=1.5)
    halo = choose_halo(prof, 2, 1.0)
    w = LatticeWindow(2, 4.0, 0.25)
    real = realization_for_window(w, halo, CouplingLaw(), 4)
    fast = transverse_field(real, prof, w)
    slow = evaluate_potential(real, prof, w.points())
    assert np.allclose(fast, slow, atol=1e-13)


def test_halo_too_small():
    prof = power_law_profile(3.0)
    real = constant_realization([[0, 0]], 1.0, halo=2.0)
    with pytest.raises(HaloTooSmall):
        evaluate_potential(real, prof, [[0.0, 0.0]])


def test_halo_growth_changes_little():
    prof = gaussian_profile(rate=1.0)
    tol = 1e-6
    R = choose_halo(prof, 2, 1.0, tol)
    w = LatticeWindow(2, 3.0, 0.25)
    real = realization_for_window(w, 1.5 * R, CouplingLaw(), 21)
    a = transverse_field(real, prof, w, halo=R, tail_tol=tol)
    b = transverse_field(real, prof, w, halo=1.5 * R, tail_tol=tol)
    assert np.max(np.abs(a - b)) < tol


def test_power_law_halo_with_loose_tolerance():
    R = choose_halo(power_law_profile(6.0), 2, 1.0, 1e-3)
    assert 0 < R < 50


# --- reduction ---

def test_reduce_separable_normalized():
    grid = LatticeWindow(1, 10.0, 0.05)
    y = grid.points()[:, 0]
    g = LongitudinalFactor("gaussian", 1.0)
    psi = np.exp(-y**2)
    psi /= math.sqrt(np.sum(g(y) * psi**2) * grid.h)
    w = reduce_site(compact_profile(1.0, 0.3, g), psi, grid.h, y)
    assert w.amplitude == pytest.approx(0.3, rel=1e-12) and w.longitudinal is None


def test_reduce_y_independent():
    grid = LatticeWindow(1, 10.0, 0.05)
    y = grid.points()[:, 0]
    psi = np.exp(-np.abs(y))
    psi /= math.sqrt(np.sum(psi**2) * grid.h)
    prof = gaussian_profile(rate=2.0, amplitude=0.4)
    w = reduce_site(prof, psi, grid.h, y)
    z = np.linspace(-1, 1, 7)[:, None] * [1.0, 0.5]
    assert np.allclose(w.transverse(z), prof.transverse(z), rtol=1e-12)


def test_reduce_delta_well():
    grid = LatticeWindow(1, 40.0, 0.01)
    sp_ = solve_parallel(DeltaWell(2.0), grid, 1)
    prof = compact_profile(1.0, 1.0, LongitudinalFactor("indicator", 1.0))
    w = reduce_site(prof, sp_.vectors[0], grid.h, grid.points()[:, 0])
    assert w.amplitude == pytest.approx(1 - math.exp(-2), abs=5e-3)


def test_reduce_then_sum_equals_sum_then_reduce():
    win = LatticeWindow(2, 3.0, 0.25)
    ygrid = LatticeWindow(1, 6.0, 0.1)
    y = ygrid.points()[:, 0]
    psi = np.exp(-y**2 / 2)
    psi /= math.sqrt(np.sum(psi**2) * ygrid.h)
    prof = gaussian_profile(rate=2.0, amplitude=0.5,
                            longitudinal=LongitudinalFactor("gaussian", 0.8, 0.3))
    halo = choose_halo(prof, 2, 1.0)
    real = realization_for_window(win, halo, CouplingLaw(), 8)
    V = evaluate_potential(real, prof, win.points(), y)
    summed_first = reduce_on_grid(V, psi, ygrid.h)
    reduced_first = reduced_field(real, reduce_site(prof, psi, ygrid.h, y), win)
    assert np.allclose(summed_first, reduced_first, rtol=0, atol=1e-12)


def test_reduced_field_zero():
    win = LatticeWindow(2, 2.0, 0.5)
    real = constant_realization(square_sites(3), 0.0, halo=3.0)
    assert np.all(reduced_field(real, gaussian_profile(rate=2.0), win, tail_tol=None) == 0)


@pytest.mark.parametrize("xi", [(1, 0), (-2, 3)])
def test_reduced_field_shift_covariance(xi):
    prof = gaussian_profile(rate=2.0)
    halo = choose_halo(prof, 2, 1.0)
    win = LatticeWindow(2, 3.0, 0.25)
    moved = win.translated(xi)
    a = reduced_field(realization_for_window(win, halo, CouplingLaw(), 17, key_shift=xi), prof, win)
    b = reduced_field(realization_for_window(moved, halo, CouplingLaw(), 17), prof, moved)
    assert np.array_equal(a, b)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_reduce_preserves_ordering(a1, a2):
    lo, hi = sorted((a1, a2))
    grid = LatticeWindow(1, 6.0, 0.1)
    y = grid.points()[:, 0]
    psi = np.exp(-y**2)
    psi /= math.sqrt(np.sum(psi**2) * grid.h)
    g = LongitudinalFactor("indicator", 0.5)
    w_lo = reduce_site(gaussian_profile(amplitude=lo, longitudinal=g), psi, grid.h, y)
    w_hi = reduce_site(gaussian_profile(amplitude=hi, longitudinal=g), psi, grid.h, y)
    z = np.linspace(-2, 2, 9)[:, None] * [1.0, 0.0]
    assert np.all(w_lo.transverse(z) <= w_hi.transverse(z))


# --- sup bound ---

def test_sup_bound_compact():
    assert sup_bound(compact_profile(1.0), CouplingLaw(), 0.5, 2) == 1.0


def test_sup_bound_linear_in_E0():
    prof = gaussian_profile(rate=1.0)
    a = sup_bound(prof, CouplingLaw("uniform", 1.0), 5.0, 2)
    b = sup_bound(prof, CouplingLaw("uniform", 3.0), 5.0, 2)
    assert b == pytest.approx(3 * a, rel=1e-14)


def test_sup_bound_power_law_by_cell_maximization():
    prof = power_law_profile(4.0)
    halo = 20.0
    M = sup_bound(prof, CouplingLaw(), halo, 2, resolution=20)
    # independent oracle: a brute lattice sum at the corner and centre of the cell
    sites = square_sites(int(halo))

    def lattice_sum(x):
        z = x - sites
        near = np.abs(z).max(axis=1) <= halo
        return np.sum((1 + np.linalg.norm(z[near], axis=1)) ** -4.0)

    assert M == pytest.approx(lattice_sum(np.zeros(2)), rel=1e-12)
    assert M >= lattice_sum(np.array([0.5, 0.5]))


def test_field_bounded_by_M():
    prof = gaussian_profile(rate=1.0, amplitude=0.3)
    halo = choose_halo(prof, 2, 1.0)
    win = LatticeWindow(2, 4.0, 0.25)
    M = sup_bound(prof, CouplingLaw(), halo, 2, window=win)
    for seed in range(5):
        W = transverse_field(realization_for_window(win, halo, CouplingLaw(), seed), prof, win)
        assert W.min() >= 0 and W.max() <= M + 1e-14
