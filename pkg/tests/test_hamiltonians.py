import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from surfids.errors import BudgetExceeded, FluxTooLarge, NoBoundState
from surfids.hamiltonians import (
    DeltaWell,
    ExplicitLevels,
    LatticeWindow,
    SeparablePotential,
    assemble,
    build_transverse,
    export_coo,
    ground_energy,
    harmonic,
    lattice_landau_bottom,
    magnetic_translate,
    parallel_grid_operator,
    poschl_teller,
    solve_parallel,
    square_well,
)
from surfids.magnetic import canonical_matrix

B1 = canonical_matrix([1.0])
B0 = np.zeros((2, 2))


def dense(op):
    return op.matrix.toarray()


# --- windows ---

def test_window_grid():
    w = LatticeWindow(2, 2.0, 0.5)
    assert w.n == 3 and w.size == 9
    assert np.allclose(w.axis(0), [-0.5, 0.0, 0.5])
    assert w.points()[1].tolist() == [-0.5, 0.0]


def test_window_rejects_noninteger_ratio():
    with pytest.raises(ValueError):
        LatticeWindow(1, 1.0, 0.3)


# --- build_transverse ---

def test_smallest_dirichlet_laplacian():
    op = build_transverse(LatticeWindow(1, 1.0, 0.5), np.zeros((1, 1)))
    assert dense(op).tolist() == [[8.0]]


def test_free_1d_converges_to_dirichlet_ground():
    L = 2.0
    errs = []
    for h in (0.1, 0.05, 0.025):
        Z = ground_energy(build_transverse(LatticeWindow(1, L, h), np.zeros((1, 1))))
        errs.append(abs(Z - math.pi**2 / L**2))
    # second order in h
    assert errs[1] / errs[0] == pytest.approx(0.25, abs=0.02)
    assert errs[2] / errs[1] == pytest.approx(0.25, abs=0.02)


def test_free_2d_ground_energy_within_one_percent():
    # 199^2 unknowns, above the dense cap: exercises the bisection path
    Z = ground_energy(build_transverse(LatticeWindow(2, 10.0, 0.05), B0))
    assert Z == pytest.approx(2 * math.pi**2 / 100, rel=0.01)


def test_bisection_agrees_with_dense():
    op = build_transverse(LatticeWindow(2, 3.0, 0.1), B1)
    a = ground_energy(op)
    b = ground_energy(op, dense_cap=10)
    assert abs(a - b) < 1e-9


def test_domain_monotonicity():
    Z = [ground_energy(build_transverse(LatticeWindow(2, L, 0.25), B0)) for L in (5.0, 10.0, 20.0)]
    assert Z[0] > Z[1] > Z[2]


def test_magnetic_ground_energy_decays_with_L():
    vals = []
    for L in (4.0, 5.0, 6.0):
        Z = ground_energy(build_transverse(LatticeWindow(2, L, 0.1), B1, "lattice"))
        vals.append(math.log(Z) / L**2)
    # the ratio is negative and heads toward -b/(2π)
    assert all(v < 0 for v in vals)
    assert abs(vals[-1] + 1 / (2 * math.pi)) < abs(vals[0] + 1 / (2 * math.pi))


def test_lowest_eigenvalue_lattice_shift_L20():
    Z = ground_energy(build_transverse(LatticeWindow(2, 20.0, 0.1), B1, "lattice"))
    assert 0 < Z < 0.05


def test_continuum_shift_offset_is_second_order():
    # the discrete lowest Landau level sits at about -b^2 h^2 / 8 below β
    for h in (0.2, 0.1):
        Z = ground_energy(build_transverse(LatticeWindow(2, 12.0, h), B1))
        assert -0.25 * h**2 <= Z < 0


@pytest.mark.parametrize("B,L,h", [(B0, 3.0, 0.25), (B1, 3.0, 0.25), (canonical_matrix([0.5], 1), 2.0, 0.25)])
def test_hermitian(B, L, h):
    H = build_transverse(LatticeWindow(B.shape[0], L, h), B).matrix
    assert abs(H - H.conj().T).max() <= 1e-12 * abs(H).max()


def test_nonnegative_without_field():
    ev = np.linalg.eigvalsh(dense(build_transverse(LatticeWindow(2, 3.0, 0.25), B0)))
    assert ev.min() >= 0


@given(st.floats(0.2, 2.0))
def test_lattice_shift_nonnegative(b):
    op = build_transverse(LatticeWindow(2, 2.0, 0.2), canonical_matrix([b]), "lattice")
    assert np.linalg.eigvalsh(dense(op)).min() >= -1e-10


def test_lattice_bottom_tends_to_b():
    assert lattice_landau_bottom(1.0, 0.05) == pytest.approx(1.0, abs=1e-3)
    assert lattice_landau_bottom(0.0, 0.1) == 0.0
    assert lattice_landau_bottom(1.0, 0.1) < 1.0


def test_flux_limits():
    with pytest.raises(FluxTooLarge):
        build_transverse(LatticeWindow(2, 4.0, 1.0), B1)
    with pytest.warns(UserWarning):
        build_transverse(LatticeWindow(2, 2.0, 0.4), B1)


def test_rejects_wrong_shape():
    with pytest.raises(ValueError):
        build_transverse(LatticeWindow(1, 2.0, 0.5), B1)


# --- parallel spectra ---

def test_delta_well():
    sp_ = solve_parallel(DeltaWell(2.0), LatticeWindow(1, 40.0, 0.01), 1)
    assert sp_.energies[0] == pytest.approx(-1.0, abs=1e-3)
    assert sp_.vectors[0] @ sp_.vectors[0] * 0.01 == pytest.approx(1.0)


def test_harmonic_levels():
    sp_ = solve_parallel(harmonic(1.0), LatticeWindow(1, 20.0, 0.01), 2)
    assert np.allclose(sp_.energies, [1.0, 3.0], atol=1e-2)


def test_poschl_teller_levels():
    sp_ = solve_parallel(poschl_teller(2.0), LatticeWindow(1, 30.0, 0.02), 2)
    assert np.allclose(sp_.energies, [-4.0, -1.0], atol=5e-3)


def test_explicit_levels_echo():
    sp_ = solve_parallel(ExplicitLevels((-1.0,)), None, 1)
    assert sp_.energies.tolist() == [-1.0] and sp_.vectors is None
    assert sp_.gram().tolist() == [[1.0]]


def test_too_few_states_flagged():
    with pytest.warns(UserWarning):
        sp_ = solve_parallel(square_well(1.0, 0.5), LatticeWindow(1, 20.0, 0.05), 3)
    assert sp_.truncated and len(sp_) == 1


def test_no_bound_state():
    with pytest.raises(NoBoundState):
        solve_parallel(ExplicitLevels((1.0,), 0.0), None, 1)


def test_complete_below_is_next_level():
    sp_ = solve_parallel(harmonic(1.0), LatticeWindow(1, 20.0, 0.02), 1)
    assert sp_.complete_below == pytest.approx(3.0, abs=1e-2)
    rho = sp_.counting_measure()
    assert rho.limit == sp_.complete_below


def test_gram_is_identity_for_constant_factor():
    sp_ = solve_parallel(harmonic(1.0), LatticeWindow(1, 16.0, 0.05), 3)
    G = sp_.gram(np.ones(sp_.grid.size))
    assert np.allclose(G, np.eye(3), atol=1e-12)


# --- assembly ---

def _small_factors():
    op = build_transverse(LatticeWindow(2, 7 * 0.5, 0.5), canonical_matrix([0.3]))
    par = solve_parallel(ExplicitLevels((-1.0, -0.4, 0.2)), None, 3)
    return op, par


def test_kronecker_sum_spectrum():
    op = build_transverse(LatticeWindow(1, 7.0, 1.0), np.zeros((1, 1)))
    grid = LatticeWindow(1, 3.5, 0.5)
    pop = parallel_grid_operator(harmonic(1.0), grid)
    H = assemble(op, pop).matrix.toarray()
    assert H.shape == (36, 36)
    wt = np.linalg.eigvalsh(dense(op))
    wp = np.linalg.eigvalsh(pop.matrix.toarray())
    want = np.sort((wt[:, None] + wp[None, :]).ravel())
    assert np.allclose(np.linalg.eigvalsh(H), want, atol=1e-10)


def test_constant_potential_shifts_spectrum():
    op, par = _small_factors()
    c = 0.37
    H0 = assemble(op, par).matrix.toarray()
    Hc = assemble(op, par, SeparablePotential.constant(c, op.size)).matrix.toarray()
    assert np.allclose(np.linalg.eigvalsh(Hc), np.linalg.eigvalsh(H0) + c, atol=1e-12)


def test_weyl_bounds(rng):
    op = build_transverse(LatticeWindow(2, 3.0, 0.5), canonical_matrix([0.8]))
    pop = parallel_grid_operator(harmonic(1.0), LatticeWindow(1, 3.0, 0.5))
    M = 0.7
    V = rng.uniform(0, M, (op.size, pop.size))
    e0 = np.linalg.eigvalsh(assemble(op, pop).matrix.toarray())
    e1 = np.linalg.eigvalsh(assemble(op, pop, V).matrix.toarray())
    assert np.all(e0 <= e1 + 1e-12) and np.all(e1 <= e0 + M + 1e-12)


def test_injection_matches_projected_grid_potential(rng):
    # the injected compression of a full potential equals the Galerkin projection
    op = build_transverse(LatticeWindow(1, 3.0, 0.5), np.zeros((1, 1)))
    grid = LatticeWindow(1, 8.0, 0.1)
    par = solve_parallel(harmonic(1.0), grid, 2)
    V = rng.uniform(0, 1, (op.size, grid.size))
    H = assemble(op, par, V).matrix.toarray()
    P = np.kron(np.eye(op.size), par.vectors.T * math.sqrt(grid.h))
    full = assemble(op, parallel_grid_operator(harmonic(1.0), grid), V).matrix.toarray()
    ref = P.T @ full @ P
    assert np.allclose(H, ref, atol=1e-8)


def test_assembled_hermitian():
    op, par = _small_factors()
    H = assemble(op, par, SeparablePotential(np.linspace(0, 1, op.size))).matrix
    assert abs(H - H.conj().T).max() <= 1e-12 * abs(H).max()


def test_budget():
    op, par = _small_factors()
    with pytest.raises(BudgetExceeded) as exc:
        assemble(op, par, max_dim=10)
    assert exc.value.required == op.size * 3 and exc.value.allowed == 10


def test_transverse_indices():
    op, par = _small_factors()
    A = assemble(op, par)
    mask = np.zeros(op.size, bool)
    mask[[0, 2]] = True
    assert A.transverse_indices(mask).tolist() == [0, 1, 2, 6, 7, 8]


# --- magnetic translations ---

def test_translation_zero_is_identity():
    op = build_transverse(LatticeWindow(2, 2.0, 0.25), B1)
    assert np.allclose(magnetic_translate(op, (0.0, 0.0)).phases, 1)


def test_translation_without_field_is_plain_shift():
    op = build_transverse(LatticeWindow(2, 2.0, 0.25), B0)
    tr = magnetic_translate(op, (1.0, -0.5))
    assert np.allclose(tr.phases, 1)
    assert abs(tr.apply(op.matrix) - build_transverse(tr.target, B0).matrix).max() == 0


@pytest.mark.parametrize("xi", [(1.0, 0.0), (0.0, 1.0), (-2.0, 0.75)])
def test_translation_reproduces_shifted_operator(xi):
    op = build_transverse(LatticeWindow(2, 4.0, 0.25), B1)
    tr = magnetic_translate(op, xi)
    moved = build_transverse(tr.target, B1)
    assert abs(tr.apply(op.matrix) - moved.matrix).max() < 1e-12


def test_translation_requires_whole_cells():
    op = build_transverse(LatticeWindow(2, 2.0, 0.25), B1)
    with pytest.raises(ValueError):
        magnetic_translate(op, (0.1, 0.0))


def test_export_coo_roundtrip(tmp_path):
    op = build_transverse(LatticeWindow(2, 1.5, 0.5), B1)
    path = tmp_path / "h.coo"
    export_coo(op.matrix, path)
    lines = path.read_text().splitlines()
    n, _, nnz = map(int, lines[0][2:].split())
    rows = np.array([l.split() for l in lines[1:]], dtype=float)
    back = sp.coo_matrix((rows[:, 2] + 1j * rows[:, 3], (rows[:, 0].astype(int), rows[:, 1].astype(int))),
                         shape=(n, n))
    assert nnz == op.matrix.nnz
    assert abs(back - op.matrix).max() == 0
