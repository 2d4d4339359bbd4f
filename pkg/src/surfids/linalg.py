"""Sparse Hermitian helpers shared by the operator and counting layers."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationBreakdown

__all__ = ["inf_norm", "tie_epsilon", "inertia_count", "TIE_REL"]

TIE_REL = 1e-10


def inf_norm(H) -> float:
    if H.shape[0] == 0:
        return 0.0
    if sp.issparse(H):
        return float(abs(H).sum(axis=1).max())
    return float(np.abs(H).sum(axis=1).max())


def tie_epsilon(H) -> float:
    """Offset subtracted from every counting threshold: ``1e-10 * max(‖H‖_∞, 1)``."""
    return TIE_REL * max(inf_norm(H), 1.0)


def inertia_count(H, sigma: float) -> int:
    """Number of negative eigenvalues of ``H - sigma I`` from a symmetric LU factorization.

    The factorization uses a symmetric fill-reducing ordering and diagonal
    pivots only, so ``U = D L^*`` and the signs of ``diag(U)`` give the
    inertia.  Raises :class:`FactorizationBreakdown` if SuperLU left the
    diagonal or a pivot is numerically zero.
    """
    A = (sp.csc_matrix(H) - sigma * sp.identity(H.shape[0], dtype=H.dtype, format="csc")).tocsc()
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise FactorizationBreakdown(f"LU failed at sigma={sigma!r}: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationBreakdown(f"off-diagonal pivoting at sigma={sigma!r}")
    piv = np.real(lu.U.diagonal())
    if np.any(np.abs(piv) <= 1e-14 * max(inf_norm(H), 1.0)):
        raise FactorizationBreakdown(f"zero pivot at sigma={sigma!r}")
    return int(np.count_nonzero(piv < 0))
