"""Eigenvalues with truncation-artifact control, edge states, LAP sweeps.

Finite sections of operators on the line have discrete spectra and
artificial edges.  An eigenvalue is kept as genuine when it moves less
than ``STABLE_TOL`` under ``N -> 2N`` and its eigenvector is not stuck to
an artificial edge of the window.
"""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, TextIO

import numpy as np

from . import linalg_kernel as lk
from .errors import ConvergenceFailure, NoConvergence, NoEdgeState, ValidationError
from .lattice_ops import BandedHermitian, LatticeWindow, build_H0
from .model_core import CriticalSet, ModelParams, spectral_bands

logger = logging.getLogger(__name__)

STABLE_TOL = 1e-8
MATCH_TOL = 1e-6
SIDE_MASS = 0.8
DECAY_CUTOFF = 1e-12
LAP_COLUMNS = ["x", "epsilon", "s", "N", "norm", "iters", "converged"]
EIG_COLUMNS = ["lambda", "stable", "decay_ratio", "side"]


def fmt(x) -> str:
    """17 significant digits (round-trip safe)."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x) + 0.0, ".17g")  # no negative zero


@dataclass
class EigReport:
    """Eigenvalues with optional stability flags and localization data."""

    eigenvalues: np.ndarray
    stability_flags: Optional[np.ndarray] = None
    decay_ratios: Optional[np.ndarray] = None
    sides: Optional[list] = None
    vectors: Optional[np.ndarray] = None
    N: Optional[int] = None
    discarded: int = 0

    def stable(self) -> np.ndarray:
        if self.stability_flags is None:
            return np.zeros(0)
        return self.eigenvalues[self.stability_flags]

    def to_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EIG_COLUMNS)
        for i, lam in enumerate(self.eigenvalues):
            st = bool(self.stability_flags[i]) if self.stability_flags is not None else False
            dr = self.decay_ratios[i] if self.decay_ratios is not None else float("nan")
            side = self.sides[i] if self.sides is not None else ""
            w.writerow([fmt(lam), fmt(st), fmt(dr), side])


def hermitian_eigs(M: BandedHermitian, want_vectors: bool = False, interval=None) -> EigReport:
    """Raw eigen-decomposition of a truncation (dense up to the dense limit)."""
    if M.dim <= lk.DENSE_LIMIT:
        out = lk.hermitian_dense_eig(M.to_dense(), want_vectors)
        vals, vecs = out if want_vectors else (out, None)
        if interval is not None:
            sel = (vals > interval[0]) & (vals <= interval[1])
            vals = vals[sel]
            vecs = vecs[:, sel] if vecs is not None else None
    else:
        out = lk.hermitian_banded_eig(M.ab, want_vectors, interval)
        vals, vecs = out if want_vectors else (out, None)
    if vecs is not None and vals.size:
        scale = max(1.0, float(np.max(np.abs(vals))))
        res = np.linalg.norm(M.matvec(vecs) - vecs * vals[None, :], axis=0)
        if np.max(res) > 1e-10 * scale:
            raise ConvergenceFailure(f"eigenpair residual {np.max(res):.3e}")
    return EigReport(np.asarray(vals, dtype=float), vectors=vecs, N=M.window.n_hi)


def localization(vec: np.ndarray, window: LatticeWindow) -> tuple[str, float]:
    """Side (``left``/``center``/``right``/``extended``) and decay ratio of an eigenvector.

    The decay ratio is ``(|v(m)| / |v(peak)|)^{1/(m - peak)}`` going away from
    the localization side, over sites with magnitude above ``1e-12`` of the peak.
    """
    mass = np.abs(vec[0::2]) ** 2 + np.abs(vec[1::2]) ** 2
    total = mass.sum()
    n = mass.size
    thirds = np.array_split(np.arange(n), 3)
    frac = [mass[t].sum() / total for t in thirds]
    side = "extended"
    for name, f in zip(("left", "center", "right"), frac):
        if f >= SIDE_MASS:
            side = name
    mag = np.sqrt(mass)
    peak = int(np.argmax(mag))
    if side == "right":
        mag, peak = mag[::-1], n - 1 - peak
    above = np.nonzero(mag[peak:] > DECAY_CUTOFF * mag[peak])[0]
    last = int(above[-1]) if above.size else 0
    if last == 0:
        return side, float("nan")
    return side, float((mag[peak + last] / mag[peak]) ** (1.0 / last))


def _is_artifact(side: str, window: LatticeWindow) -> bool:
    if window.kind == "unilateral":
        return side == "right"
    return side in ("left", "right")


def _kept_eigs(M: BandedHermitian, target: tuple[float, float]):
    rep = hermitian_eigs(M, want_vectors=True, interval=target)
    vals, sides, ratios = [], [], []
    dropped = 0
    for i, lam in enumerate(rep.eigenvalues):
        side, ratio = localization(rep.vectors[:, i], M.window)
        if _is_artifact(side, M.window):
            dropped += 1
            continue
        vals.append(lam)
        sides.append(side)
        ratios.append(ratio)
    return np.asarray(vals), sides, np.asarray(ratios), dropped


def truncation_stable_eigs(
    builder: Callable[[int], BandedHermitian],
    target_window: tuple[float, float],
    N_list: Sequence[int],
    threads: int = 1,
) -> EigReport:
    """Eigenvalues of the largest truncation in ``target_window`` with stability flags.

    Each eigenvalue is matched to the nearest kept eigenvalue of every
    smaller truncation (within ``MATCH_TOL``); it is flagged stable when
    all consecutive moves are below ``STABLE_TOL`` and its eigenvector is
    localized.  Modes stuck to an artificial edge are discarded first.
    """
    N_list = [int(N) for N in N_list]
    if len(N_list) < 2 or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValidationError("N_list must be increasing with at least two entries")

    def run(N):
        return _kept_eigs(builder(N), target_window)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, N_list))
    else:
        results = [run(N) for N in N_list]
    vals, sides, ratios, dropped = results[-1]
    # a genuine eigenvector is square summable: extended modes are band states
    flags = np.array([s != "extended" for s in sides], dtype=bool)
    for i, lam in enumerate(vals):
        if not flags[i]:
            continue
        cur = lam
        for prev_vals, *_ in reversed(results[:-1]):
            if prev_vals.size == 0:
                flags[i] = False
                break
            j = int(np.argmin(np.abs(prev_vals - cur)))
            d = abs(prev_vals[j] - cur)
            if d > MATCH_TOL or d >= STABLE_TOL:
                flags[i] = False
                break
            cur = prev_vals[j]
    return EigReport(vals, flags, ratios, sides, N=N_list[-1], discarded=dropped)


def edge_state_check(params: ModelParams, N: int = 400) -> tuple[float, float]:
    """Half-line edge eigenvalue ``-alpha`` and its decay ratio (``~ |a|/|b|``)."""
    if not params.abs_b > params.abs_a:
        raise NoEdgeState("an edge state needs |b| > |a| > 0")
    gap = spectral_bands(params).lambda_min
    rep = truncation_stable_eigs(
        lambda n: build_H0(params, LatticeWindow.unilateral(n)), (-gap, gap), [N // 2, N]
    )
    cand = [
        i for i in range(rep.eigenvalues.size)
        if rep.stability_flags[i] and rep.sides[i] == "left"
    ]
    if not cand:
        raise ConvergenceFailure("no stable left-localized eigenvalue found in the gap")
    i = min(cand, key=lambda c: abs(rep.eigenvalues[c] + params.alpha))
    return float(rep.eigenvalues[i]), float(rep.decay_ratios[i])


# --------------------------------------------------------------------------
# weighted resolvent norms
# --------------------------------------------------------------------------
def weight_vector(window: LatticeWindow, s: float) -> np.ndarray:
    """``<n>^{-s}`` on both spin components of every site."""
    return (1.0 + window.coord_sites().astype(float) ** 2) ** (-s / 2)


def weighted_resolvent_norm(
    H: BandedHermitian,
    s: float,
    z: complex,
    tol: float = 1e-6,
    iter_cap: int = 500,
    seed: int = lk.DEFAULT_SEED,
    strict: bool = True,
) -> tuple[float, int, bool]:
    """``|| <X>^{-s} (H - z)^{-1} <X>^{-s} ||`` by power iteration on the Gram map.

    Each application costs one solve with ``H - z`` and one with its adjoint
    from a single banded LU factorization.
    """
    if complex(z).imag == 0.0:
        raise ValidationError("Im z must be nonzero")
    if s <= 0:
        raise ValidationError("weight exponent s must be positive")
    lu = lk.banded_lu(H, z)
    d = weight_vector(H.window, s)
    d2 = d * d

    def gram(v):
        y = lu.solve(d * v)
        return d * lu.solve_adjoint(d2 * y)

    sigma, iters, ok = lk.power_iteration_norm(gram, H.dim, tol, iter_cap, seed)
    if strict and not ok:
        raise NoConvergence(f"power iteration did not converge at z={z!r}")
    return sigma, iters, ok


@dataclass(frozen=True)
class LapRow:
    x: float
    epsilon: float
    s: float
    N: int
    norm: float
    iters: int
    converged: bool


@dataclass
class LapScanGrid:
    rows: list
    eig_distance: dict = field(default_factory=dict)

    def column(self, x: float) -> list:
        """Rows at ``x`` ordered by decreasing epsilon."""
        return sorted((r for r in self.rows if r.x == x), key=lambda r: -r.epsilon)

    def norms(self, x: float) -> np.ndarray:
        return np.array([r.norm for r in self.column(x)])

    def ratio(self, x: float) -> float:
        n = self.norms(x)
        return float(n[-1] / n[0])

    def plateau(self, x: float, tol: float = 0.1) -> bool:
        n = self.norms(x)
        return bool(abs(n[-1] - n[-2]) / n[-2] < tol)

    def to_csv(self, fh: TextIO) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LAP_COLUMNS)
        for r in self.rows:
            w.writerow([fmt(r.x), fmt(r.epsilon), fmt(r.s), fmt(r.N), fmt(r.norm), fmt(r.iters), fmt(r.converged)])


def lap_scan(
    H: BandedHermitian,
    s: float,
    x_grid: Sequence[float],
    eps_list: Sequence[float],
    tol: float = 1e-6,
    iter_cap: int = 500,
    threads: Optional[int] = None,
    eigenvalues: Optional[Sequence[float]] = None,
) -> LapScanGrid:
    """Weighted resolvent norms on the grid ``x + i eps``; cells run in parallel."""
    cells = [(float(x), float(e)) for x in x_grid for e in eps_list]
    if any(e <= 0 for _, e in cells):
        raise ValidationError("epsilons must be positive")

    def run(cell):
        x, e = cell
        nrm, it, ok = weighted_resolvent_norm(H, s, complex(x, e), tol, iter_cap, strict=False)
        return LapRow(x, e, float(s), H.window.n_hi, nrm, it, ok)

    threads = threads or os.cpu_count() or 1
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    dist = {}
    if eigenvalues is not None:
        ev = np.asarray(eigenvalues, dtype=float)
        for x in x_grid:
            dist[float(x)] = float(np.min(np.abs(ev - x))) if ev.size else float("inf")
    return LapScanGrid(rows, dist)


# --------------------------------------------------------------------------
# accumulation of eigenvalues near critical energies
# --------------------------------------------------------------------------
def default_controls(kappa: CriticalSet) -> list:
    """Midpoints between consecutive same-sign critical points."""
    pts = list(kappa.points)
    return [0.5 * (p + q) for p, q in zip(pts, pts[1:]) if p * q > 0]


def accumulation_scan(
    builder: Callable[[int], BandedHermitian],
    kappa: CriticalSet,
    radii: Sequence[float],
    N_list: Sequence[int],
    controls: Optional[Sequence[float]] = None,
    threads: int = 1,
) -> dict:
    """Counts of stable eigenvalues within each radius of each critical and control point."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValidationError("radii must be decreasing")
    controls = default_controls(kappa) if controls is None else list(controls)
    pts = list(kappa.points)
    span = max(abs(p) for p in pts + controls) + max(radii) + 1e-9
    rep = truncation_stable_eigs(builder, (-span, span), N_list, threads)
    stable = rep.stable()

    def counts(centers):
        return {
            float(c): {r: int(np.sum(np.abs(stable - c) < r)) for r in radii} for c in centers
        }

    return {"critical": counts(pts), "control": counts(controls), "n_stable": int(stable.size)}


def band_eigenvalue_count(M: BandedHermitian, params: ModelParams) -> int:
    """Number of eigenvalues of a truncation inside the closed bands."""
    b = spectral_bands(params)
    vals = hermitian_eigs(M).eigenvalues
    inside = ((vals >= b.i_plus[0]) & (vals <= b.i_plus[1])) | ((vals >= b.i_minus[0]) & (vals <= b.i_minus[1]))
    return int(np.sum(inside))
