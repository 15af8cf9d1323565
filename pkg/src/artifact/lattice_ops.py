"""Finite banded truncations of the lattice operators and identity checks.

Site ``n`` of a window occupies flattened coordinates ``2(n - n_lo)``
(upper component) and ``2(n - n_lo) + 1`` (lower component).  Truncation is
plain compression: couplings leaving the window are dropped, which is
exactly ``P H P`` for the half-line.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, TextIO

import numpy as np
import scipy.sparse as sp

from . import linalg_kernel as lk
from .errors import (
    EmptyProjector,
    MarginTooLarge,
    NotGapless,
    NotHermitian,
    ValidationError,
    WindowMismatch,
    WindowTooSmall,
)
from .model_core import ModelParams

HERMITIAN_TOL = 1e-12
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])


# --------------------------------------------------------------------------
# windows and sequences
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class LatticeWindow:
    """Finite set of sites ``[n_lo, n_hi]`` of the line or half-line."""

    kind: str
    n_lo: int
    n_hi: int

    def __post_init__(self):
        if self.kind not in ("bilateral", "unilateral"):
            raise ValidationError(f"unknown lattice kind {self.kind!r}")
        if not (self.n_lo <= 0 <= self.n_hi):
            raise ValidationError("window must satisfy n_lo <= 0 <= n_hi")
        if self.kind == "unilateral" and self.n_lo != 0:
            raise ValidationError("unilateral windows start at n = 0")

    @classmethod
    def bilateral(cls, N: int) -> "LatticeWindow":
        return cls("bilateral", -int(N), int(N))

    @classmethod
    def unilateral(cls, N: int) -> "LatticeWindow":
        return cls("unilateral", 0, int(N))

    @classmethod
    def make(cls, kind: str, N: int) -> "LatticeWindow":
        if kind == "bilateral":
            return cls.bilateral(N)
        if kind == "unilateral":
            return cls.unilateral(N)
        raise ValidationError(f"unknown lattice kind {kind!r}")

    @property
    def n_sites(self) -> int:
        return self.n_hi - self.n_lo + 1

    @property
    def dim(self) -> int:
        return 2 * self.n_sites

    @property
    def N(self) -> int:
        return self.n_hi

    def sites(self) -> np.ndarray:
        return np.arange(self.n_lo, self.n_hi + 1)

    def coord_sites(self) -> np.ndarray:
        """Site index of every flattened coordinate."""
        return np.repeat(self.sites(), 2)

    def shrink(self, margin: int) -> "LatticeWindow":
        lo, hi = self.n_lo + margin, self.n_hi - margin
        # interior of a window need not contain 0; keep the kind for bookkeeping only
        return _RawWindow(self.kind, lo, hi)


@dataclass(frozen=True)
class _RawWindow(LatticeWindow):
    """Window without the ``n_lo <= 0 <= n_hi`` constraint (interior pieces)."""

    def __post_init__(self):
        if self.n_hi < self.n_lo:
            raise ValidationError("empty window")


@dataclass(frozen=True)
class MatrixSequence:
    """Lazily evaluable map ``n -> 2x2 complex matrix``.

    ``fn`` is vectorized: an integer array of shape ``(m,)`` maps to a complex
    array of shape ``(m, 2, 2)``.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    support_hint: Optional[tuple[int, int]] = None
    label: str = ""

    def values(self, ns) -> np.ndarray:
        ns = np.atleast_1d(np.asarray(ns, dtype=np.int64))
        out = np.asarray(self.fn(ns), dtype=complex)
        if out.shape != ns.shape + (2, 2):
            raise ValidationError(f"sequence {self.label!r} returned shape {out.shape}")
        return out

    def __call__(self, n: int) -> np.ndarray:
        return self.values([n])[0]

    @classmethod
    def scalar(cls, profile: Callable[[np.ndarray], np.ndarray], label: str = "", support_hint=None):
        """``n -> profile(n) * I_2``."""

        def fn(ns):
            v = np.asarray(profile(ns), dtype=complex)
            out = np.zeros(ns.shape + (2, 2), dtype=complex)
            out[..., 0, 0] = v
            out[..., 1, 1] = v
            return out

        return cls(fn, support_hint, label)

    @classmethod
    def entry(cls, i: int, j: int, profile, label: str = "", support_hint=None):
        """Sequence with a single nonzero entry ``(i, j)``."""

        def fn(ns):
            out = np.zeros(ns.shape + (2, 2), dtype=complex)
            out[..., i, j] = profile(ns)
            return out

        return cls(fn, support_hint, label)

    @classmethod
    def constant(cls, M, label: str = "constant"):
        M = np.asarray(M, dtype=complex)
        return cls(lambda ns: np.broadcast_to(M, ns.shape + (2, 2)).copy(), None, label)

    def scaled(self, c: complex) -> "MatrixSequence":
        return MatrixSequence(lambda ns: c * self.fn(ns), self.support_hint, f"{c}*{self.label}")


@dataclass(frozen=True)
class PotentialSpec:
    """``V = V0 + sum_j (S^j V_j + V_j^* S^{*j})``."""

    v0: Optional[MatrixSequence] = None
    shifted: tuple[tuple[int, MatrixSequence], ...] = ()


# --------------------------------------------------------------------------
# banded Hermitian storage
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class BandedHermitian:
    """Hermitian banded matrix in LAPACK upper storage on a lattice window.

    ``ab[w + i - j, j] = M[i, j]`` for ``0 <= j - i <= w``; the lower
    triangle is implied by Hermitian symmetry, so Hermiticity is exact.
    """

    ab: np.ndarray
    window: LatticeWindow

    def __post_init__(self):
        ab = np.array(self.ab, dtype=complex)
        if ab.ndim != 2 or ab.shape[1] != self.window.dim:
            raise ValidationError("band storage does not match the window dimension")
        ab[-1] = ab[-1].real
        ab.flags.writeable = False
        object.__setattr__(self, "ab", ab)

    @property
    def dim(self) -> int:
        return self.ab.shape[1]

    @property
    def half_bandwidth(self) -> int:
        return self.ab.shape[0] - 1

    def diagonal(self, offset: int = 0) -> np.ndarray:
        """Entries ``M[i, i + offset]`` for ``0 <= offset <= w``."""
        w = self.half_bandwidth
        if offset < 0:
            return np.conj(self.diagonal(-offset))
        if offset > w:
            return np.zeros(max(self.dim - offset, 0), dtype=complex)
        return self.ab[w - offset, offset:].copy()

    def to_sparse(self) -> sp.csr_matrix:
        w = self.half_bandwidth
        diags, offs = [self.ab[w].copy()], [0]
        for d in range(1, min(w, self.dim - 1) + 1):
            sup = self.ab[w - d, d:]
            diags += [sup, np.conj(sup)]
            offs += [d, -d]
        return sp.diags(diags, offs, shape=(self.dim, self.dim), format="csr", dtype=complex)

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return lk.band_matvec(self.ab, v)

    def with_bandwidth(self, w: int) -> "BandedHermitian":
        cur = self.half_bandwidth
        if w < cur:
            if np.any(self.ab[: cur - w] != 0):
                raise ValidationError("cannot shrink the band below nonzero entries")
            return BandedHermitian(self.ab[cur - w:], self.window)
        pad = np.zeros((w - cur, self.dim), dtype=complex)
        return BandedHermitian(np.vstack([pad, self.ab]), self.window)

    def __add__(self, other: "BandedHermitian") -> "BandedHermitian":
        _same_window(self, other)
        w = max(self.half_bandwidth, other.half_bandwidth)
        return BandedHermitian(self.with_bandwidth(w).ab + other.with_bandwidth(w).ab, self.window)

    def __sub__(self, other: "BandedHermitian") -> "BandedHermitian":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "BandedHermitian":
        return BandedHermitian(float(c) * self.ab, self.window)

    def restrict(self, margin: int) -> "BandedHermitian":
        """Principal submatrix on sites ``[n_lo + margin, n_hi - margin]`` (banded)."""
        _check_margin(self.window, margin)
        lo, hi = 2 * margin, self.dim - 2 * margin
        ab = self.ab[:, lo:hi].copy()
        w = self.half_bandwidth
        for d in range(1, w + 1):
            ab[w - d, :d] = 0.0  # entries coupling to rows before the cut
        return BandedHermitian(ab, self.window.shrink(margin))

    @classmethod
    def zeros(cls, window: LatticeWindow, w: int = 0) -> "BandedHermitian":
        return cls(np.zeros((w + 1, window.dim), dtype=complex), window)

    @classmethod
    def from_sparse(
        cls,
        M,
        window: LatticeWindow,
        bandwidth: Optional[int] = None,
        check: bool = True,
        tol: float = HERMITIAN_TOL,
    ) -> "BandedHermitian":
        """Store the upper triangle of a (numerically) Hermitian sparse matrix."""
        M = sp.csr_matrix(M, dtype=complex)
        if M.shape != (window.dim, window.dim):
            raise WindowMismatch(f"matrix shape {M.shape} does not fit window dim {window.dim}")
        M.eliminate_zeros()
        if check and M.nnz:
            defect = abs(M - M.getH()).max()
            scale = max(1.0, abs(M).max())
            if defect > tol * scale:
                raise NotHermitian(f"Hermiticity defect {defect:.3e}")
        coo = sp.triu(M).tocoo()
        offs = coo.col - coo.row
        wmax = int(offs.max()) if offs.size else 0
        w = wmax if bandwidth is None else int(bandwidth)
        if wmax > w:
            raise ValidationError(f"entries at offset {wmax} exceed the declared bandwidth {w}")
        ab = np.zeros((w + 1, window.dim), dtype=complex)
        ab[w + coo.row - coo.col, coo.col] = coo.data
        return cls(ab, window)

    # -- text dump ---------------------------------------------------------
    def dump(self, fh: TextIO) -> None:
        """Write ``dim bandwidth`` then one ``row col re im`` line per stored element."""
        w = self.half_bandwidth
        fh.write(f"{self.dim} {w}\n")
        for j in range(self.dim):
            for d in range(min(w, j), -1, -1):
                z = self.ab[w - d, j]
                fh.write(f"{j - d} {j} {float(z.real):.17g} {float(z.imag):.17g}\n")

    @classmethod
    def load(cls, fh: TextIO, window: Optional[LatticeWindow] = None) -> "BandedHermitian":
        header = fh.readline().split()
        dim, w = int(header[0]), int(header[1])
        if window is None:
            window = LatticeWindow.unilateral(dim // 2 - 1)
        if window.dim != dim:
            raise WindowMismatch("dump dimension does not match window")
        ab = np.zeros((w + 1, dim), dtype=complex)
        for line in fh:
            if not line.strip():
                continue
            i, j, re, im = line.split()
            ab[w + int(i) - int(j), int(j)] = complex(float(re), float(im))
        return cls(ab, window)


def _same_window(A: BandedHermitian, B: BandedHermitian) -> None:
    if (A.window.n_lo, A.window.n_hi) != (B.window.n_lo, B.window.n_hi):
        raise WindowMismatch(f"windows differ: {A.window} vs {B.window}")


def _check_margin(window: LatticeWindow, margin: int) -> None:
    if margin < 0 or 2 * margin >= window.n_sites:
        raise MarginTooLarge(f"margin {margin} too large for {window.n_sites} sites")


# --------------------------------------------------------------------------
# sparse building blocks
# --------------------------------------------------------------------------
def _shift(window: LatticeWindow, k: int = 1) -> sp.csr_matrix:
    """Compressed ``S^k`` on the flattened window: ``(S^k u)(n) = u(n - k)``."""
    m = window.n_sites
    return sp.kron(sp.eye(m, k=-k, format="csr"), sp.identity(2), format="csr")


def _position(window: LatticeWindow) -> sp.csr_matrix:
    return sp.diags(window.coord_sites().astype(float), format="csr")


def _blockdiag(values: np.ndarray) -> sp.csr_matrix:
    """Block-diagonal sparse matrix from an ``(m, 2, 2)`` array."""
    return sp.block_diag(list(values), format="csr") if len(values) else sp.csr_matrix((0, 0))


def _blockdiag_fast(values: np.ndarray) -> sp.csr_matrix:
    m = values.shape[0]
    base = 2 * np.arange(m)
    rows = np.concatenate([base, base, base + 1, base + 1])
    cols = np.concatenate([base, base + 1, base, base + 1])
    data = np.concatenate([values[:, 0, 0], values[:, 0, 1], values[:, 1, 0], values[:, 1, 1]])
    return sp.csr_matrix((data, (rows, cols)), shape=(2 * m, 2 * m))


def multiplication_operator(W: MatrixSequence, window: LatticeWindow) -> sp.csr_matrix:
    """``diag(W)`` on the window as a sparse matrix (not necessarily Hermitian)."""
    return _blockdiag_fast(W.values(window.sites()))


def diag_W(W: MatrixSequence, window: LatticeWindow) -> BandedHermitian:
    """Hermitian multiplication operator ``diag(W)``; raises if W is not Hermitian-valued."""
    return BandedHermitian.from_sparse(multiplication_operator(W, window), window, bandwidth=1)


def _h0_sparse(params: ModelParams, window: LatticeWindow) -> sp.csr_matrix:
    m = window.n_sites
    I = sp.identity(m, format="csr")
    S = sp.eye(m, k=-1, format="csr")
    E11 = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    E22 = sp.csr_matrix(np.array([[0.0, 0.0], [0.0, 1.0]]))
    E12 = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    E21 = E12.T
    a, b = params.a, params.b
    H = (
        params.alpha * sp.kron(I, E11)
        - params.alpha * sp.kron(I, E22)
        + sp.kron(np.conj(a) * I + np.conj(b) * S.T, E12)
        + sp.kron(a * I + b * S, E21)
    )
    return H.tocsr()


def build_H0(params: ModelParams, window: LatticeWindow) -> BandedHermitian:
    """Compression of ``H0`` to the window (half bandwidth 3).

    Couplings: ``(upper_n, lower_n) = conj(a)``, ``(upper_n, lower_{n+1}) = conj(b)``.
    """
    return BandedHermitian.from_sparse(_h0_sparse(params, window), window, bandwidth=3, check=False)


def _potential_sparse(spec: PotentialSpec, window: LatticeWindow) -> sp.csr_matrix:
    ns = window.sites()
    V = sp.csr_matrix((window.dim, window.dim), dtype=complex)
    if spec.v0 is not None:
        v0 = spec.v0.values(ns)
        defect = np.abs(v0 - np.conj(np.swapaxes(v0, -1, -2))).max() if len(v0) else 0.0
        if defect > HERMITIAN_TOL:
            raise NotHermitian(f"v0 is not Hermitian-valued (defect {defect:.3e})")
        v0 = 0.5 * (v0 + np.conj(np.swapaxes(v0, -1, -2)))
        V = V + _blockdiag_fast(v0)
    for j, vj in spec.shifted:
        if j < 1:
            raise ValidationError("shift orders must be positive")
        if j >= window.n_sites:
            continue
        blocks = _blockdiag_fast(vj.values(ns))
        term = _shift(window, j) @ blocks
        V = V + term + term.getH()
    return V.tocsr()


def build_potential(spec: PotentialSpec, window: LatticeWindow) -> BandedHermitian:
    """Compression of ``V`` (half bandwidth ``2 max j + 1``, or 1 without shifts)."""
    w = 2 * max((j for j, _ in spec.shifted), default=0) + 1
    return BandedHermitian.from_sparse(_potential_sparse(spec, window), window, bandwidth=w, check=False)


def _symmetrized_first_order(K: sp.csr_matrix, window: LatticeWindow, c: complex) -> sp.csr_matrix:
    """``c (K X + X K)`` evaluated entrywise as ``c K_rc (n_r + n_c)``."""
    coo = K.tocoo()
    ns = window.coord_sites().astype(float)
    data = c * coo.data * (ns[coo.row] + ns[coo.col])
    return sp.csr_matrix((data, (coo.row, coo.col)), shape=K.shape)


def _ak_sparse(params: ModelParams, k: int, window: LatticeWindow) -> sp.csr_matrix:
    Sk = _shift(window, k)
    T = np.exp(1j * k * params.phi) * Sk - np.exp(-1j * k * params.phi) * Sk.T
    c = -(params.abs_a * params.abs_b) / 4j
    return _symmetrized_first_order(T.tocsr(), window, c)


def build_Ak(params: ModelParams, k: int, window: LatticeWindow) -> BandedHermitian:
    """Conjugate operator ``A_k = -(|a||b|/4i)(T X + X T)``, ``T = e^{ik phi} S^k - e^{-ik phi} S^{-k}``.

    Matrix elements: ``<delta_{n+k}, A_k delta_n> = -(|a||b|/4i) e^{ik phi} (2n + k)``
    on both spin components.
    """
    if k < 1:
        raise ValidationError("A_k needs k >= 1")
    if 2 * k + 1 >= window.n_sites:
        raise WindowTooSmall(f"window with {window.n_sites} sites too small for k = {k}")
    return BandedHermitian.from_sparse(_ak_sparse(params, k, window), window, bandwidth=2 * k + 1, check=False)


def _a0_kernel(params: ModelParams, window: LatticeWindow) -> sp.csr_matrix:
    """Hermitian first-order kernel ``K`` with ``A_0 = -|a|(K X + X K)``.

    ``K_12 = -i e^{-i phi1}(I - e^{-i phi} S^*)``,
    ``K_21 =  i e^{ i phi1}(I - e^{ i phi} S)``.
    """
    m = window.n_sites
    I = sp.identity(m, format="csr")
    S = sp.eye(m, k=-1, format="csr")
    E12 = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    E21 = E12.T
    p1, ph = params.phi1, params.phi
    K12 = -1j * np.exp(-1j * p1) * (I - np.exp(-1j * ph) * S.T)
    K21 = 1j * np.exp(1j * p1) * (I - np.exp(1j * ph) * S)
    return (sp.kron(K12, E12) + sp.kron(K21, E21)).tocsr()


def _a0_sparse(params: ModelParams, window: LatticeWindow) -> sp.csr_matrix:
    return _symmetrized_first_order(_a0_kernel(params, window), window, -params.abs_a)


def build_A0(params: ModelParams, window: LatticeWindow) -> BandedHermitian:
    """Conjugate operator for the gapless model, satisfying ``[i A_0, H0] = 4|a|^2 - H0^2``."""
    if not params.gapless():
        raise NotGapless("A_0 is defined only for alpha = 0 and |a| = |b|")
    if window.n_sites < 3:
        raise WindowTooSmall("A_0 needs at least 3 sites")
    return BandedHermitian.from_sparse(_a0_sparse(params, window), window, bandwidth=3, check=False)


# --------------------------------------------------------------------------
# commutators and identity checks
# --------------------------------------------------------------------------
def commutator_i_sparse(A, B) -> sp.csr_matrix:
    """``i (A B - B A)`` of two sparse matrices or banded operators."""
    As = A.to_sparse() if isinstance(A, BandedHermitian) else sp.csr_matrix(A)
    Bs = B.to_sparse() if isinstance(B, BandedHermitian) else sp.csr_matrix(B)
    if As.shape != Bs.shape:
        raise WindowMismatch("operand shapes differ")
    return (1j * (As @ Bs - Bs @ As)).tocsr()


def commutator_i(A: BandedHermitian, B: BandedHermitian) -> BandedHermitian:
    """``[iA, B] = i(AB - BA)`` stored as a banded Hermitian matrix."""
    _same_window(A, B)
    C = commutator_i_sparse(A, B)
    return BandedHermitian.from_sparse(C, A.window, bandwidth=A.half_bandwidth + B.half_bandwidth, check=False)


def interior_restrict(M, margin: int, window: Optional[LatticeWindow] = None) -> np.ndarray:
    """Dense principal submatrix on sites ``[n_lo + margin, n_hi - margin]``."""
    if isinstance(M, BandedHermitian):
        window = M.window
        M = M.to_sparse()
    if window is None:
        raise ValidationError("window required for sparse input")
    _check_margin(window, margin)
    sl = slice(2 * margin, window.dim - 2 * margin)
    return sp.csr_matrix(M)[sl, sl].toarray()


def _interior_max(M: sp.csr_matrix, window: LatticeWindow, margin: int) -> float:
    _check_margin(window, margin)
    sl = slice(2 * margin, window.dim - 2 * margin)
    sub = sp.csr_matrix(M)[sl, sl]
    return float(abs(sub).max()) if sub.nnz else 0.0


def check_A0_identity(params: ModelParams, window: LatticeWindow, margin: int = 4) -> float:
    """Max interior deviation of ``[i A_0, H0] - (4|a|^2 - H0^2)``.

    The commutator is expanded by the Leibniz rule,
    ``[i c(KX + XK), H] = c(X C + C X) + c(K D + D K)`` with ``C = [iK, H]`` and
    ``D = [iX, H]``, so position weights multiply only ``C`` (zero in the
    interior) and float64 roundoff does not grow like ``|n|``.
    """
    if not params.gapless():
        raise NotGapless("A_0 identity needs a gapless model")
    H = _h0_sparse(params, window)
    K = _a0_kernel(params, window)
    c = -params.abs_a
    X = sp.diags(window.coord_sites().astype(float))
    D = commutator_i_sparse(X, H)
    lhs = _symmetrized_first_order(commutator_i_sparse(K, H), window, c) + c * (K @ D + D @ K)
    R = lhs - (4 * params.abs_a**2 * sp.identity(window.dim) - H @ H)
    return _interior_max(R, window, margin)


def _tau_minus(W: MatrixSequence, ns: np.ndarray, p: int) -> np.ndarray:
    """``(tau^{-p} W)(n) = W(n + p)`` sampled on ``ns``."""
    return W.values(ns + p)


def ak_first_commutator_closed_form(params: ModelParams, k: int, W: MatrixSequence, window: LatticeWindow) -> sp.csr_matrix:
    """``(|a||b|/4)[e^{ik phi} S^k F + F e^{-ik phi} S^{*k}]`` with ``F = (2X + k)(tau^{-k} W - W)``."""
    ns = window.sites()
    F = (2 * ns + k)[:, None, None] * (_tau_minus(W, ns, k) - W.values(ns))
    Fm = _blockdiag_fast(F)
    Sk = _shift(window, k)
    ph = np.exp(1j * k * params.phi)
    return ((params.abs_a * params.abs_b / 4) * (ph * Sk @ Fm + Fm @ (np.conj(ph) * Sk.T))).tocsr()


def check_Ak_first_commutator(params: ModelParams, k: int, W: MatrixSequence, window: LatticeWindow, margin: Optional[int] = None) -> float:
    """Max interior deviation between ``[i A_k, diag W]`` and its closed form."""
    margin = k + 1 if margin is None else margin
    if margin < k:
        raise ValidationError("margin must be at least k")
    C = commutator_i_sparse(_ak_sparse(params, k, window), multiplication_operator(W, window))
    return _interior_max(C - ak_first_commutator_closed_form(params, k, W, window), window, margin)


def b_matrices(W: MatrixSequence, ns: np.ndarray, phi1: float):
    """Blocks ``(B_1, B_0, B_{-1})`` of the first commutator with ``A_0`` (sampled on ``ns``)."""
    Wn = W.values(ns)
    T1 = _tau_minus(W, ns, 1)
    e = np.exp(1j * phi1)
    B1 = np.zeros_like(Wn)
    B0 = np.zeros_like(Wn)
    Bm = np.zeros_like(Wn)
    B1[:, 0, 0] = Wn[:, 1, 0]
    B1[:, 0, 1] = Wn[:, 1, 1] - T1[:, 0, 0]
    B1[:, 1, 1] = -T1[:, 1, 0]
    s = e * Wn[:, 1, 0] + np.conj(e) * Wn[:, 0, 1]
    d = Wn[:, 1, 1] - Wn[:, 0, 0]
    B0[:, 0, 0] = s
    B0[:, 0, 1] = e * d
    B0[:, 1, 0] = np.conj(e) * d
    B0[:, 1, 1] = -s
    Bm[:, 0, 0] = Wn[:, 0, 1]
    Bm[:, 1, 0] = Wn[:, 1, 1] - T1[:, 0, 0]
    Bm[:, 1, 1] = -T1[:, 0, 1]
    return B1, B0, Bm


def _b_closed_form(params: ModelParams, W: MatrixSequence, window: LatticeWindow) -> sp.csr_matrix:
    """``-|a|(e^{i phi2} S (2X+1) B_1 - 2X B_0 + e^{-i phi2} (2X+1) B_{-1} S^*)``."""
    ns = window.sites()
    B1, B0, Bm = b_matrices(W, ns, params.phi1)
    S = _shift(window, 1)
    f1 = (2 * ns + 1)[:, None, None]
    f0 = (2 * ns)[:, None, None]
    e2 = np.exp(1j * params.phi2)
    out = e2 * S @ _blockdiag_fast(f1 * B1) - _blockdiag_fast(f0 * B0) + np.conj(e2) * _blockdiag_fast(f1 * Bm) @ S.T
    return (-params.abs_a * out).tocsr()


def _spin_flip(W: MatrixSequence) -> MatrixSequence:
    return MatrixSequence(lambda ns: SIGMA_X @ W.fn(ns) @ SIGMA_X, W.support_hint, f"flip({W.label})")


def a0_commutator_closed_form(params: ModelParams, W: MatrixSequence, window: LatticeWindow) -> sp.csr_matrix:
    """Closed form of ``[i A_0, diag W]``.

    The B-block expression is written for the spin-flipped conjugate
    operator ``sigma_x A_0 sigma_x``; conjugating both sides by ``sigma_x``
    gives the form for ``A_0`` itself.
    """
    Sx = sp.kron(sp.identity(window.n_sites), sp.csr_matrix(SIGMA_X), format="csr")
    return (Sx @ _b_closed_form(params, _spin_flip(W), window) @ Sx).tocsr()


def check_A0_commutator(params: ModelParams, W: MatrixSequence, window: LatticeWindow, margin: int = 3) -> float:
    """Max interior deviation between ``[i A_0, diag W]`` and the B-block closed form."""
    if not params.gapless():
        raise NotGapless("A_0 needs a gapless model")
    C = commutator_i_sparse(_a0_sparse(params, window), multiplication_operator(W, window))
    return _interior_max(C - a0_commutator_closed_form(params, W, window), window, margin)


def second_commutator_norm(params: ModelParams, k: int, W: MatrixSequence, window: LatticeWindow, margin: Optional[int] = None) -> float:
    """Spectral norm of the interior of ``[i A_k, [i A_k, diag W]]``."""
    margin = 2 * k + 2 if margin is None else margin
    A = _ak_sparse(params, k, window)
    C2 = commutator_i_sparse(A, commutator_i_sparse(A, multiplication_operator(W, window)))
    _check_margin(window, margin)
    sl = slice(2 * margin, window.dim - 2 * margin)
    sub = C2[sl, sl].tocsr()
    sigma, _, _ = lk.power_iteration_norm(lambda v: sub.getH() @ (sub @ v), sub.shape[0], tol=1e-8, cap=2000)
    return sigma


def default_margin(A: BandedHermitian, H: BandedHermitian) -> int:
    """``2k + (shift order of H) + 1`` sites, read off the half bandwidths ``2k+1`` and ``2s+1``."""
    return (A.half_bandwidth - 1) + (H.half_bandwidth - 1) // 2 + 1


def projected_commutator_min_eig(
    H: BandedHermitian,
    A: BandedHermitian,
    lambda_window: tuple[float, float],
    margin: Optional[int] = None,
) -> tuple[float, int]:
    """Smallest eigenvalue of ``E [iA, H] E`` on ``range(E)``.

    The exact commutator is formed on the full window and both ``H`` and
    the commutator are then restricted to interior sites, which removes
    the truncation defect at the edges.  ``E`` is the spectral projector
    of the interior ``H`` onto ``lambda_window``.
    """
    _same_window(H, A)
    margin = default_margin(A, H) if margin is None else margin
    C = commutator_i(A, H).restrict(margin)
    Hi = H.restrict(margin)
    lo, hi = lambda_window
    if Hi.dim <= lk.DENSE_LIMIT:
        vals, vecs = lk.hermitian_dense_eig(Hi.to_dense(), want_vectors=True)
        sel = (vals >= lo) & (vals <= hi)
        vals, vecs = vals[sel], vecs[:, sel]
    else:
        vals, vecs = lk.hermitian_banded_eig(Hi.ab, want_vectors=True, interval=(lo, hi))
    if vals.size == 0:
        raise EmptyProjector(f"no eigenvalues of the truncation in [{lo}, {hi}]")
    M = vecs.conj().T @ C.matvec(vecs)
    M = 0.5 * (M + M.conj().T)
    ev = lk.hermitian_dense_eig(M)
    return float(ev[0]), int(vals.size)


# --------------------------------------------------------------------------
# SSH unfolding
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class SSHUnfolding:
    """Scalar period-2 Jacobi matrix unitarily equivalent to the window of H0.

    ``psi(2n + 1)`` is the upper and ``psi(2n)`` the lower component of site n.
    """

    diag: np.ndarray
    hop: np.ndarray
    m_lo: int
    residual: float

    def to_sparse(self) -> sp.csr_matrix:
        return sp.diags([self.diag, self.hop, np.conj(self.hop)], [0, 1, -1], format="csr")


def ssh_unfold(params: ModelParams, window: LatticeWindow) -> SSHUnfolding:
    """Build ``J_1`` and the residual ``max |U^* H0 U - J_1|`` on the window."""
    m = np.arange(2 * window.n_lo, 2 * window.n_hi + 2)
    diag = np.where(m % 2 == 0, -params.alpha, params.alpha).astype(float)
    hop = np.where(m[:-1] % 2 == 0, params.a, np.conj(params.b)).astype(complex)
    J = sp.diags([diag, hop, np.conj(hop)], [0, 1, -1], format="csr")
    # psi index 2n -> lower coordinate, 2n + 1 -> upper coordinate
    coord = np.where(m % 2 == 0, m - 2 * window.n_lo + 1, m - 2 * window.n_lo - 1)
    P = sp.csr_matrix((np.ones(m.size), (coord, np.arange(m.size))), shape=(m.size, m.size))
    H = _h0_sparse(params, window)
    R = P.T @ H @ P - J
    res = float(abs(R).max()) if R.nnz else 0.0
    return SSHUnfolding(diag=diag, hop=hop, m_lo=int(m[0]), residual=res)
