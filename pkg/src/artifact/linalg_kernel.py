"""Numeric backbone: Hermitian eigensolvers, banded LU, power iteration.

The heavy lifting is delegated to LAPACK through scipy/numpy
(``zgbtrf``/``zgbtrs`` for the complex banded LU, ``eig_banded`` and
``eigh`` for Hermitian eigenproblems).  Every routine works on the upper
band storage used by :class:`artifact.lattice_ops.BandedHermitian`::

    ab[w + i - j, j] = M[i, j]    for  0 <= j - i <= w
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg as sla
from scipy.linalg import lapack

from .errors import ConvergenceFailure, NoConvergence, SingularPivot, SolveFailure, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 0xC0FFEE
DENSE_LIMIT = 4096


def band_to_general(ab: np.ndarray) -> np.ndarray:
    """Expand Hermitian upper band storage into LAPACK general band storage.

    Returns the ``(3w+1, n)`` array expected by ``zgbtrf`` with
    ``kl = ku = w`` (the top ``w`` rows are workspace for fill-in).
    """
    w = ab.shape[0] - 1
    n = ab.shape[1]
    gb = np.zeros((3 * w + 1, n), dtype=complex)
    gb[w:2 * w + 1, :] = ab
    for d in range(1, w + 1):
        # M[j + d, j] = conj(M[j, j + d])
        gb[2 * w + d, : n - d] = np.conj(ab[w - d, d:])
    return gb


def band_matvec(ab: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Product of a Hermitian banded matrix (upper storage) with ``v``."""
    w = ab.shape[0] - 1
    n = ab.shape[1]
    v = np.asarray(v)
    col = (slice(None), None) if v.ndim == 2 else (slice(None),)
    out = ab[w].astype(complex)[col] * v
    for d in range(1, w + 1):
        sup = ab[w - d, d:][col]  # M[j, j + d]
        out[: n - d] += sup * v[d:]
        out[d:] += np.conj(sup) * v[: n - d]
    return out


@dataclass(frozen=True)
class BandedLU:
    """LU factors of ``M - z I`` with partial pivoting (general band form).

    Attributes
    ----------
    lu, piv
        Output of LAPACK ``zgbtrf``; fill band is ``2w``.
    dim, bandwidth
        Original dimension and half bandwidth ``w``.
    z
        Shift used in the factorization.
    """

    lu: np.ndarray
    piv: np.ndarray
    dim: int
    bandwidth: int
    z: complex

    def solve(self, v: np.ndarray) -> np.ndarray:
        """Solve ``(M - z) x = v``."""
        return self._solve(v, 0)

    def solve_adjoint(self, v: np.ndarray) -> np.ndarray:
        """Solve ``(M - z)^* x = v``, i.e. ``(M - conj(z)) x = v`` for Hermitian M."""
        return self._solve(v, 2)

    def _solve(self, v: np.ndarray, trans: int) -> np.ndarray:
        rhs = np.asarray(v, dtype=complex)
        if rhs.shape[0] != self.dim:
            raise ValidationError(f"right-hand side has length {rhs.shape[0]}, expected {self.dim}")
        w = self.bandwidth
        x, info = lapack.zgbtrs(self.lu, w, w, rhs, self.piv, trans=trans)
        if info != 0:
            raise SolveFailure(f"zgbtrs returned info={info}")
        return x


def banded_lu(M, z: complex) -> BandedLU:
    """Factor ``M - z I`` for a banded Hermitian ``M``.

    Parameters
    ----------
    M : BandedHermitian
        Matrix in upper band storage (attribute ``ab``).
    z : complex
        Spectral parameter; ``Im z != 0`` guarantees invertibility.

    Raises
    ------
    SingularPivot
        If an exact zero pivot is met (only possible for real ``z``).
    """
    ab = np.asarray(M.ab)
    w = ab.shape[0] - 1
    gb = band_to_general(ab)
    gb[2 * w, :] -= z
    lu, piv, info = lapack.zgbtrf(gb, w, w)
    if info > 0:
        raise SingularPivot(f"zero pivot at position {info} for z={z!r}")
    if info < 0:
        raise SolveFailure(f"zgbtrf argument error {info}")
    return BandedLU(lu=lu, piv=piv, dim=ab.shape[1], bandwidth=w, z=complex(z))


def power_iteration_norm(
    apply: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float = 1e-6,
    cap: int = 500,
    seed: int = DEFAULT_SEED,
) -> tuple[float, int, bool]:
    """Largest singular value of ``T`` from its Gram map ``v -> T^* T v``.

    Stops when the extrapolated error of the Rayleigh quotient (increment
    divided by one minus the observed contraction ratio) drops below
    ``tol`` relative.

    Returns
    -------
    sigma_max, iters, converged
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam_old = None
    inc_old = None
    lam = 0.0
    for it in range(1, cap + 1):
        u = apply(v)
        lam = float(np.vdot(v, u).real)
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0, it, True
        v = u / nu
        if lam_old is not None:
            inc = abs(lam - lam_old)
            err = inc
            if inc_old:
                rho = inc / inc_old
                if rho < 1.0:
                    err = inc / (1.0 - rho)
            if err <= tol * abs(lam):
                return float(np.sqrt(max(lam, 0.0))), it, True
            inc_old = inc
        lam_old = lam
    logger.warning("power iteration did not converge in %d steps", cap)
    return float(np.sqrt(max(lam, 0.0))), cap, False


def power_iteration_norm_strict(apply, dim, tol=1e-6, cap=500, seed=DEFAULT_SEED) -> tuple[float, int]:
    """Like :func:`power_iteration_norm` but raises :class:`NoConvergence`."""
    sigma, iters, ok = power_iteration_norm(apply, dim, tol, cap, seed)
    if not ok:
        raise NoConvergence(f"no convergence after {cap} iterations (estimate {sigma:.6g})")
    return sigma, iters


def hermitian_dense_eig(M: np.ndarray, want_vectors: bool = False):
    """Eigen-decomposition of a dense Hermitian matrix (ascending order)."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("expected a square matrix")
    if M.shape[0] > DENSE_LIMIT:
        raise ValidationError(f"dense eigensolver limited to dim <= {DENSE_LIMIT}")
    try:
        if want_vectors:
            return np.linalg.eigh(M)
        return np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceFailure(str(exc)) from exc


def hermitian_banded_eig(
    ab: np.ndarray,
    want_vectors: bool = False,
    interval: Optional[tuple[float, float]] = None,
):
    """Eigenpairs of a Hermitian matrix in upper band storage.

    Parameters
    ----------
    interval
        If given, only eigenvalues in the half-open interval ``(lo, hi]``.
    """
    kw = {}
    if interval is not None:
        kw = dict(select="v", select_range=(float(interval[0]), float(interval[1])))
    try:
        out = sla.eig_banded(ab, lower=False, eigvals_only=not want_vectors, **kw)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return out
