"""Fourth-order compact approximation of the second derivative on a uniform grid.

Interior rows use ``f''_{i-1} + 10 f''_i + f''_{i+1} = 12/h^2 (f_{i-1} - 2 f_i + f_{i+1})``;
the first and last interior rows replace the left-hand side with the
one-sided combination ``14 f''_1 - 5 f''_2 + 4 f''_3 - f''_4``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

from .errors import GridTooSmall

_BAND = 3  # the one-sided rows reach three columns off the diagonal


def _banded(mat: np.ndarray, kl: int, ku: int) -> np.ndarray:
    """LAPACK general-band storage with ``kl`` extra rows for fill-in."""
    n = mat.shape[0]
    ab = np.zeros((2 * kl + ku + 1, n))
    for j in range(n):
        lo, hi = max(0, j - ku), min(n, j + kl + 1)
        ab[kl + ku + np.arange(lo, hi) - j, j] = mat[lo:hi, j]
    return ab


@dataclass(frozen=True, eq=False)
class CompactOperator:
    """The compact pair ``(A, B)`` on ``dim = m - 1`` interior nodes.

    ``B`` is factorized once at construction; ``second_derivative`` only
    back-substitutes.
    """

    dim: int
    h: float
    A: np.ndarray
    B: np.ndarray
    _lu: tuple
    _dense: bool

    def solve_b(self, rhs: np.ndarray) -> np.ndarray:
        """Return ``B^{-1} rhs`` for a vector or a ``(dim, k)`` block."""
        if self._dense:
            return la.lu_solve(self._lu, rhs)
        lub, piv = self._lu
        x, info = lapack.dgbtrs(lub, _BAND, _BAND, rhs, piv)
        if info != 0:  # pragma: no cover - guarded by dgbtrf at build time
            raise np.linalg.LinAlgError(f"dgbtrs failed with info={info}")
        return x

    def second_derivative(self, values, left_value=0.0, right_value=0.0) -> np.ndarray:
        """Compact second derivative at the interior nodes.

        Parameters
        ----------
        values : array_like, shape (dim,) or (k, dim)
            Interior samples; a 2-D input is treated as ``k`` independent fields.
        left_value, right_value : float or array_like of shape (k,)
            Dirichlet data at nodes ``0`` and ``m``.
        """
        v = np.asarray(values, dtype=float)
        batch = v.ndim == 2
        v2 = v if batch else v[None, :]
        if v2.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim} interior values, got {v2.shape[1]}")
        full = np.empty((v2.shape[0], self.dim + 2))
        full[:, 1:-1] = v2
        full[:, 0] = left_value
        full[:, -1] = right_value
        return self.second_derivative_full(full) if batch else self.second_derivative_full(full)[0]

    def second_derivative_full(self, full: np.ndarray) -> np.ndarray:
        """Same as ``second_derivative`` for ``(k, m + 1)`` arrays that already carry the boundary nodes."""
        rhs = (12.0 / self.h ** 2) * (full[:, :-2] - 2.0 * full[:, 1:-1] + full[:, 2:])
        return self.solve_b(rhs.T).T

    def boundary_vector(self, left_value: float, right_value: float) -> np.ndarray:
        """The load vector ``f`` contributed by the Dirichlet data."""
        f = np.zeros(self.dim)
        f[0] += 12.0 / self.h ** 2 * left_value
        f[-1] += 12.0 / self.h ** 2 * right_value
        return f


def build_operator(m: int, h: float, dense: bool = False) -> CompactOperator:
    """Assemble ``A`` and ``B`` for ``m`` cells of width ``h`` and factorize ``B``.

    ``dense=True`` selects a dense LU instead of the banded one.
    """
    if m < 8:
        raise GridTooSmall(f"compact operator needs m >= 8, got {m}")
    if not h > 0:
        raise GridTooSmall(f"spacing must be positive, got {h}")
    n = m - 1
    A = (12.0 / h ** 2) * (np.diag(np.full(n, -2.0)) + np.diag(np.ones(n - 1), 1)
                           + np.diag(np.ones(n - 1), -1))
    B = np.diag(np.full(n, 10.0)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    B[0, :4] = (14.0, -5.0, 4.0, -1.0)
    B[-1, -4:] = (-1.0, 4.0, -5.0, 14.0)
    A.setflags(write=False)
    B.setflags(write=False)
    if not dense:
        lub, piv, info = lapack.dgbtrf(_banded(B, _BAND, _BAND), _BAND, _BAND)
        if info == 0:
            return CompactOperator(n, float(h), A, B, (lub, piv), False)
    return CompactOperator(n, float(h), A, B, la.lu_factor(B), True)
