"""Analytic side of the two-band model.

The bulk operator on ``l^2(G; C^2)`` is::

    H0 = [[alpha,       conj(a) + conj(b) S^*],
          [a + b S,     -alpha               ]]

with ``(S u)(n) = u(n - 1)``.  Under ``F u(theta) = sum_n u(n) e^{i n theta}``
it becomes multiplication by the symbol ``h(theta)`` below, whose
eigenvalues are ``+-lambda(theta)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConicalPoint, DomainError, NotGapless, ValidationError, ZeroCoupling

GAPLESS_TOL = 1e-12
DEDUP_TOL = 1e-10
CONICAL_TOL = 1e-13

Interval = tuple[float, float]


@dataclass(frozen=True)
class ModelParams:
    """Model triple ``(alpha, a, b)`` with cached polar data."""

    alpha: float
    a: complex
    b: complex
    phi1: float = field(init=False)
    phi2: float = field(init=False)
    phi: float = field(init=False)
    abs_a: float = field(init=False)
    abs_b: float = field(init=False)

    def __post_init__(self):
        a, b = complex(self.a), complex(self.b)
        if not math.isfinite(float(self.alpha)) or not (cmath.isfinite(a) and cmath.isfinite(b)):
            raise ValidationError("model parameters must be finite")
        if abs(a) == 0.0 or abs(b) == 0.0:
            raise ZeroCoupling("both couplings a and b must be nonzero")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        # cmath.phase returns values in [-pi, pi]; move -pi to pi
        p1, p2 = cmath.phase(a), cmath.phase(b)
        p1 = math.pi if p1 == -math.pi else p1
        p2 = math.pi if p2 == -math.pi else p2
        object.__setattr__(self, "phi1", p1)
        object.__setattr__(self, "phi2", p2)
        object.__setattr__(self, "phi", p2 - p1)
        object.__setattr__(self, "abs_a", abs(a))
        object.__setattr__(self, "abs_b", abs(b))

    def gapless(self) -> bool:
        """True when the two bands touch at 0 (``alpha = 0`` and ``|a| = |b|``)."""
        return abs(self.alpha) <= GAPLESS_TOL and abs(self.abs_a - self.abs_b) <= GAPLESS_TOL

    @property
    def lambda_min(self) -> float:
        return math.sqrt(self.alpha**2 + (self.abs_a - self.abs_b) ** 2)

    @property
    def lambda_max(self) -> float:
        return math.sqrt(self.alpha**2 + (self.abs_a + self.abs_b) ** 2)


def make_params(alpha: float, a: complex, b: complex) -> ModelParams:
    """Build :class:`ModelParams`; raises :class:`ZeroCoupling` if a or b vanish."""
    return ModelParams(alpha, a, b)


@dataclass(frozen=True)
class BandStructure:
    """Bands ``I_- = -I_+`` and ``I_+ = (lambda_min, lambda_max)``."""

    i_minus: Interval
    i_plus: Interval
    lambda_min: float
    lambda_max: float
    has_gap: bool


@dataclass(frozen=True)
class CriticalSet:
    """Critical energies of the conjugate operator of order ``k``."""

    k: int
    points: tuple[float, ...]
    theta_values: tuple[float, ...] = ()


@dataclass(frozen=True)
class MourreSets:
    """Bands minus the critical set, split by the sign of the Mourre function."""

    k: int
    mu_plus: tuple[Interval, ...]
    mu_minus: tuple[Interval, ...]
    mu_all: tuple[Interval, ...]


def symbol(params: ModelParams, theta):
    """Symbol ``h(theta)``; vectorized over ``theta`` (trailing ``(2, 2)`` axes)."""
    th = np.asarray(theta, dtype=float)
    e = np.exp(1j * th)
    off = params.a + params.b * e
    h = np.empty(th.shape + (2, 2), dtype=complex)
    h[..., 0, 0] = params.alpha
    h[..., 1, 1] = -params.alpha
    h[..., 1, 0] = off
    h[..., 0, 1] = np.conj(off)
    return h


def symbol_derivative(params: ModelParams, theta):
    """``d h / d theta`` (only the off-diagonal entries depend on theta)."""
    th = np.asarray(theta, dtype=float)
    off = 1j * params.b * np.exp(1j * th)
    d = np.zeros(th.shape + (2, 2), dtype=complex)
    d[..., 1, 0] = off
    d[..., 0, 1] = np.conj(off)
    return d


def band_function_sq(params: ModelParams, theta):
    """``lambda(theta)^2``."""
    c = np.cos(np.asarray(theta, dtype=float) + params.phi)
    return params.alpha**2 + params.abs_a**2 + params.abs_b**2 + 2 * params.abs_a * params.abs_b * c


def band_function(params: ModelParams, theta):
    """Positive eigenvalue branch ``lambda(theta) >= 0`` of the symbol."""
    return np.sqrt(np.maximum(band_function_sq(params, theta), 0.0))


def spectral_bands(params: ModelParams) -> BandStructure:
    lo, hi = params.lambda_min, params.lambda_max
    return BandStructure(i_minus=(-hi, -lo), i_plus=(lo, hi), lambda_min=lo, lambda_max=hi, has_gap=lo > 0.0)


def chebyshev_U(k: int, x):
    """Chebyshev polynomial of the second kind by forward recurrence."""
    if k < 0:
        raise DomainError("Chebyshev index must be nonnegative")
    x = np.asarray(x, dtype=float)
    u_prev = np.ones_like(x)
    if k == 0:
        return u_prev if u_prev.ndim else float(u_prev)
    u = 2.0 * x
    for _ in range(k - 1):
        u_prev, u = u, 2.0 * x * u - u_prev
    return u if u.ndim else float(u)


def g0_eval(params: ModelParams, t):
    """Quartic band-edge factor ``-(t^2 - lmin^2)(t^2 - lmax^2) / (4|t|)``."""
    t = np.asarray(t, dtype=float)
    if np.any(t == 0.0):
        raise DomainError("g is defined on R \\ {0}")
    t2 = t * t
    return -(t2 - params.lambda_min**2) * (t2 - params.lambda_max**2) / (4.0 * np.abs(t))


def g_k_eval(params: ModelParams, k: int, t):
    """Mourre function ``g_k = g_0 * U_{k-1}((t^2 - alpha^2 - |a|^2 - |b|^2) / (2|a||b|))``."""
    if k < 1:
        raise DomainError("g_k requires k >= 1")
    t = np.asarray(t, dtype=float)
    x = (t * t - params.alpha**2 - params.abs_a**2 - params.abs_b**2) / (2 * params.abs_a * params.abs_b)
    out = g0_eval(params, t) * chebyshev_U(k - 1, x)
    return out if np.ndim(out) else float(out)


def _dedup(values, tol=DEDUP_TOL) -> tuple[float, ...]:
    out: list[float] = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(float(v))
    return tuple(out)


def kappa_k(params: ModelParams, k: int) -> CriticalSet:
    """Critical set: band-edge and Chebyshev-node energies (``k >= 1``), or ``{+-2|a|}`` for ``k = 0``."""
    if k < 0:
        raise DomainError("k must be nonnegative")
    if k == 0:
        if not params.gapless():
            raise NotGapless("the k = 0 conjugate operator needs alpha = 0 and |a| = |b|")
        return CriticalSet(0, (-2 * params.abs_a, 2 * params.abs_a), ())
    base = params.alpha**2 + params.abs_a**2 + params.abs_b**2
    pts = []
    thetas = []
    for j in range(k + 1):
        c = math.cos(math.pi * j / k)
        lam = math.sqrt(max(base + 2 * params.abs_a * params.abs_b * c, 0.0))
        pts += [lam, -lam]
        cands = [(s * math.pi * j / k - params.phi) % (2 * math.pi) for s in (1, -1)]
        inside = [c_ for c_ in cands if c_ <= math.pi]
        thetas.append(min(inside) if inside else min(cands))
    return CriticalSet(k, _dedup(pts), tuple(thetas))


def _split(lo: float, hi: float, cuts) -> list[Interval]:
    edges = [lo] + [c for c in cuts if lo + DEDUP_TOL < c < hi - DEDUP_TOL] + [hi]
    return [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def mu_sets(params: ModelParams, k: int) -> MourreSets:
    """Open intervals of the bands where ``+-g_k`` is positive.

    ``mu_plus`` collects ``{t in I_+ : g_k(t) > 0}`` and ``{t in I_- : g_k(t) < 0}``.
    """
    if k < 1:
        raise DomainError("mu sets need k >= 1")
    bands = spectral_bands(params)
    pts = kappa_k(params, k).points
    plus, minus, every = [], [], []
    for on_plus_band, band in ((False, bands.i_minus), (True, bands.i_plus)):
        for iv in _split(band[0], band[1], pts):
            if iv[1] - iv[0] <= DEDUP_TOL:
                continue
            every.append(iv)
            g = g_k_eval(params, k, 0.5 * (iv[0] + iv[1]))
            if (g > 0) == on_plus_band:
                plus.append(iv)
            else:
                minus.append(iv)
    return MourreSets(k, tuple(sorted(plus)), tuple(sorted(minus)), tuple(sorted(every)))


def eig_projectors(params: ModelParams, theta: float):
    """Spectral projectors ``(Pi, Pi_perp)`` of ``h(theta)`` onto ``+-lambda(theta)``."""
    lam = float(band_function(params, theta))
    if lam <= CONICAL_TOL:
        raise ConicalPoint(f"lambda(theta) = {lam:.3e} vanishes at theta = {theta}")
    pi = 0.5 * (symbol(params, theta) / lam + np.eye(2))
    return pi, np.eye(2) - pi


def fourier_commutator_density(params: ModelParams, k: int, theta):
    """``U_{k-1}(cos psi) |a|^2 |b|^2 sin^2 psi / lambda(theta)`` with ``psi = theta + phi``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    th = np.asarray(theta, dtype=float)
    lam = band_function(params, th)
    if np.any(lam <= CONICAL_TOL):
        raise ConicalPoint("conical point on the theta grid")
    psi = th + params.phi
    out = chebyshev_U(k - 1, np.cos(psi)) * (params.abs_a * params.abs_b * np.sin(psi)) ** 2 / lam
    return out if np.ndim(out) else float(out)


def symbol_commutator(params: ModelParams, k: int, theta):
    """Fourier image of ``[i A_k, H0]``.

    ``A_k`` is a symmetrized first-order operator ``c (T D + D T)`` with
    ``D = -i d/dtheta`` and ``T = 2i sin(k(theta + phi))``, so the commutator
    is the multiplication operator ``-|a||b| sin(k(theta + phi)) h'(theta)``.
    """
    th = np.asarray(theta, dtype=float)
    f = -params.abs_a * params.abs_b * np.sin(k * (th + params.phi))
    return f[..., None, None] * symbol_derivative(params, th)


def projected_symbol_density(params: ModelParams, k: int, theta):
    """``tr(Pi(theta) C(theta))`` for the upper band, with ``C`` from :func:`symbol_commutator`."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    lam = band_function(params, th)
    if np.any(lam <= CONICAL_TOL):
        raise ConicalPoint("conical point on the theta grid")
    pi = 0.5 * (symbol(params, th) / lam[:, None, None] + np.eye(2))
    c = symbol_commutator(params, k, th)
    out = np.einsum("nij,nji->n", pi, c).real
    return out if np.ndim(theta) else float(out[0])


def fourier_mourre_deviation(params: ModelParams, k: int, n_theta: int = 4096) -> dict:
    """Max deviations between ``g_k(lambda(theta))`` and the two density routes."""
    th = np.linspace(-np.pi, np.pi, n_theta, endpoint=False)
    lam = band_function(params, th)
    keep = lam > 1e-8
    th, lam = th[keep], lam[keep]
    g = g_k_eval(params, k, lam)
    dens = fourier_commutator_density(params, k, th)
    proj = projected_symbol_density(params, k, th)
    return {
        "max_dev_density": float(np.max(np.abs(g - dens))),
        "max_dev_projected_symbol": float(np.max(np.abs(g - proj))),
        "n_theta": int(th.size),
    }


def inf_g_on(params: ModelParams, k: int, interval: Interval, samples: int = 20001) -> float:
    """Dense-sampling infimum of ``|g_k|``-signed values on a closed interval avoiding 0."""
    t = np.linspace(interval[0], interval[1], samples)
    t = t[t != 0.0]
    return float(np.min(g_k_eval(params, k, t)))
