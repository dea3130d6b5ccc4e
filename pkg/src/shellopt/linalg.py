"""Sparse symmetric positive-definite factorization, factor once and solve many."""

import logging
import os

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

log = logging.getLogger(__name__)

try:
    from sksparse.cholmod import CholmodNotPositiveDefiniteError, analyze as _cholmod_analyze
    HAVE_CHOLMOD = True
    _FACTOR_ERRORS = (RuntimeError, CholmodNotPositiveDefiniteError)
except ImportError:
    HAVE_CHOLMOD = False
    _FACTOR_ERRORS = (RuntimeError,)


def _use_cholmod():
    return HAVE_CHOLMOD and os.environ.get("SHELLOPT_SOLVER", "").lower() != "superlu"


def _analyze(matrix):
    try:
        return _cholmod_analyze(matrix, ordering_method="metis")
    except Exception:  # CHOLMOD built without METIS
        return _cholmod_analyze(matrix, ordering_method="amd")


class SparseFactor:
    """Direct factorization of a sparse SPD matrix.

    Uses CHOLMOD (scikit-sparse) when importable, SuperLU otherwise.  Raises
    ``error_cls`` when the matrix is singular or not positive definite.  Pass
    the ``symbolic`` attribute of an earlier factor with the same sparsity
    pattern to skip the fill-reducing analysis.
    """

    def __init__(self, matrix, error_cls=np.linalg.LinAlgError, symbolic=None):
        self.matrix = sparse.csc_matrix(matrix)
        self.shape = self.matrix.shape
        self.backend = "cholmod" if _use_cholmod() else "superlu"
        self.symbolic = None
        if self.shape[0] == 0:
            self._f = None
            return
        try:
            if self.backend == "cholmod":
                self.symbolic = symbolic if symbolic is not None else _analyze(self.matrix)
                self._f = self.symbolic.cholesky(self.matrix)
            else:
                self._f = spla.splu(self.matrix, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                    options={"SymmetricMode": True})
        except _FACTOR_ERRORS as exc:
            raise error_cls(f"factorization failed: {exc}") from exc

    def solve(self, rhs):
        rhs = np.asarray(rhs, float)
        if self._f is None:
            return np.zeros_like(rhs)
        if self.backend == "cholmod":
            return self._f(rhs)
        return self._f.solve(rhs)

    def apply_factors(self, x):
        """Multiply ``x`` by the product of the stored factors (should equal ``matrix @ x``)."""
        x = np.asarray(x, float)
        if self._f is None:
            return np.zeros_like(x)
        if self.backend == "cholmod":
            L, D = self._f.L_D()
            p = self._f.P()
            y = L @ (D @ (L.T @ x[p]))
            out = np.empty_like(y)
            out[p] = y
            return out
        n = self.shape[0]
        lu = self._f
        pr = sparse.csc_matrix((np.ones(n), (lu.perm_r, np.arange(n))), shape=(n, n))
        pc = sparse.csc_matrix((np.ones(n), (np.arange(n), lu.perm_c)), shape=(n, n))
        return pr.T @ (lu.L @ (lu.U @ (pc.T @ x)))
