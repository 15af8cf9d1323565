"""Seminorms, finite-horizon class membership tests and the counterexample.

Verdicts are evidence at a finite horizon, never certificates.  Every
verdict carries the numbers it was based on.

Shift convention: ``(tau^p W)(n) = W(n - p)``; on the half-line the value
is 0 for ``n < p``.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterator, Optional, TextIO

import numpy as np

from .errors import AllZero, BadAnnulus, NotAlternatingAdmissible, ValidationError
from .lattice_ops import MatrixSequence, PotentialSpec

logger = logging.getLogger(__name__)

CAUCHY_TOL = 1e-3  # last-decade relative increment for "stabilized"
R2_MIN = 0.99
P_DIVERGE = 1.2  # increments ~ 1/(ln R)^p with p <= this => diverging
P_CONVERGE = 1.5
S_CONVERGE = 0.25  # increments ~ R^{-s} with s >= this => converging
S_FLAT = 0.02  # octave increments not decaying => diverging
RMS_MAX = 0.02  # alternative fit-quality test (log increments within 2%)
PTS_PER_DECADE = 64
CHUNK = 1 << 18


class Verdict(str, Enum):
    MEMBER = "member"
    NONMEMBER = "nonmember"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class ClassVerdict:
    verdict: Verdict
    witness: dict
    horizon: int

    @property
    def is_member(self) -> bool:
        return self.verdict is Verdict.MEMBER

    def as_dict(self) -> dict:
        return {"verdict": self.verdict.value, "witness": dict(self.witness), "horizon": self.horizon}


# --------------------------------------------------------------------------
# elementwise helpers
# --------------------------------------------------------------------------
def mat_norm(M: np.ndarray) -> np.ndarray:
    """Spectral norm of each trailing 2x2 block (closed form)."""
    M = np.asarray(M)
    fro2 = np.sum(np.abs(M) ** 2, axis=(-2, -1))
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    disc = np.sqrt(np.maximum(fro2 * fro2 - 4 * np.abs(det) ** 2, 0.0))
    return np.sqrt(0.5 * (fro2 + disc))


def tau(W: MatrixSequence, ns: np.ndarray, p: int, lattice: str = "bilateral") -> np.ndarray:
    """``(tau^p W)(n) = W(n - p)``, zero for ``n < p`` on the half-line."""
    ns = np.asarray(ns, dtype=np.int64)
    if p == 0:
        return W.values(ns)
    if lattice == "unilateral":
        out = np.zeros(ns.shape + (2, 2), dtype=complex)
        ok = ns - p >= 0
        if np.any(ok):
            out[ok] = W.values(ns[ok] - p)
        return out
    return W.values(ns - p)


def _chunks(lo: int, hi: int, size: int = CHUNK) -> Iterator[np.ndarray]:
    for start in range(lo, hi + 1, size):
        yield np.arange(start, min(start + size, hi + 1), dtype=np.int64)


def _per_site(stat: Callable[[np.ndarray], np.ndarray], horizon: int, lattice: str) -> np.ndarray:
    """``m[n] = max(stat(n), stat(-n))`` (bilateral) or ``stat(n)`` for ``0 <= n <= horizon``."""
    out = np.empty(horizon + 1)
    for ns in _chunks(0, horizon):
        v = np.asarray(stat(ns), dtype=float)
        if lattice == "bilateral":
            v = np.maximum(v, np.asarray(stat(-ns), dtype=float))
        out[ns] = v
    return out


def _check_lattice(lattice: str) -> None:
    if lattice not in ("bilateral", "unilateral"):
        raise ValidationError(f"unknown lattice {lattice!r}")


def q0_values(W: MatrixSequence, ns, lattice: str = "bilateral") -> np.ndarray:
    """``|W12| + |W21| + |W11 - W22| + |tau W22 - W11|`` at each ``n``."""
    ns = np.asarray(ns, dtype=np.int64)
    Wn = W.values(ns)
    T = tau(W, ns, 1, lattice)
    return (
        np.abs(Wn[:, 0, 1])
        + np.abs(Wn[:, 1, 0])
        + np.abs(Wn[:, 0, 0] - Wn[:, 1, 1])
        + np.abs(T[:, 1, 1] - Wn[:, 0, 0])
    )


def q0_sequence(W: MatrixSequence, n: int, lattice: str = "bilateral") -> float:
    return float(q0_values(W, [n], lattice)[0])


def _q_stat(W: MatrixSequence, k: int, order: int, lattice: str):
    if order == 1:
        def stat(ns):
            return np.abs(ns) * mat_norm(W.values(ns) - tau(W, ns, k, lattice))
    elif order == 2:
        def stat(ns):
            D = W.values(ns) - 2 * tau(W, ns, k, lattice) + tau(W, ns, 2 * k, lattice)
            return ns.astype(float) ** 2 * mat_norm(D)
    else:
        raise ValidationError("order must be 1 or 2")
    return stat


# --------------------------------------------------------------------------
# running sups
# --------------------------------------------------------------------------
def _decade_sups(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running sup of ``m`` at ``R = 10^i`` and at the horizon."""
    h = m.size - 1
    R = [10**i for i in range(int(math.log10(max(h, 1))) + 1) if 10**i < h] + [h]
    run = np.maximum.accumulate(m)
    return np.asarray(R), run[np.asarray(R)]


def q_seminorm(W: MatrixSequence, k: int, order: int, horizon: int, lattice: str = "bilateral") -> tuple[float, float]:
    """Sup over ``|n| <= horizon`` of the order-1 or order-2 difference seminorm.

    Returns ``(sup_value, tail_trend)`` with ``tail_trend`` the relative
    increase of the running sup over the last decade (0 once stabilized).
    """
    _check_lattice(lattice)
    if k < 1:
        raise ValidationError("q seminorms need k >= 1")
    if horizon < 10 * k:
        raise ValidationError("horizon must be at least 10k")
    m = _per_site(_q_stat(W, k, order, lattice), horizon, lattice)
    return _sup_and_trend(m)


def _sup_and_trend(m: np.ndarray) -> tuple[float, float]:
    h = m.size - 1
    run_h = float(np.max(m))
    run_prev = float(np.max(m[: h // 10 + 1]))
    trend = 0.0 if run_h == 0.0 else (run_h - run_prev) / run_h
    return run_h, trend


def _sup_verdict(ms: dict[str, np.ndarray], horizon: int) -> ClassVerdict:
    witness = {}
    stabilized, growing = True, False
    for name, m in ms.items():
        R, S = _decade_sups(m)
        sup, trend = _sup_and_trend(m)
        witness[f"sup_{name}"] = sup
        witness[f"tail_trend_{name}"] = trend
        if trend >= CAUCHY_TOL:
            stabilized = False
        if S.size >= 3 and S[-3] > 0:
            g1 = math.log(S[-2] / S[-3])
            g2 = math.log(S[-1] / S[-2])
            witness[f"log_growth_last_decades_{name}"] = g2
            if g1 > 1e-2 and g2 > 1e-2 and g2 >= 0.3 * g1:
                growing = True
    if growing:
        v = Verdict.NONMEMBER
    elif stabilized:
        v = Verdict.MEMBER
    else:
        v = Verdict.INCONCLUSIVE
    return ClassVerdict(v, witness, horizon)


def class_Q(W: MatrixSequence, k: int, order: int = 1, horizon: int = 10**6, lattice: str = "bilateral") -> ClassVerdict:
    """Membership in ``Q_{k,order}`` (``k >= 1``) or ``Q_{0,1}`` (``k = 0``)."""
    _check_lattice(lattice)
    if k == 0:
        m = _per_site(lambda ns: np.abs(ns) * q0_values(W, ns, lattice), horizon, lattice)
        return _sup_verdict({"q0": m}, horizon)
    if k < 0:
        raise ValidationError("k must be nonnegative")
    if order not in (1, 2):
        raise ValidationError("order must be 1 or 2")
    ms = {f"q{k}{j}": _per_site(_q_stat(W, k, j, lattice), horizon, lattice) for j in range(1, order + 1)}
    return _sup_verdict(ms, horizon)


# --------------------------------------------------------------------------
# partial sums and integrals: shared decision machinery
# --------------------------------------------------------------------------
def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares slope, R^2 and RMS residual (R^2 = 1 for a constant response)."""
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-12 * max(1.0, float(np.sum(y**2))) else 1.0 - ss_res / ss_tot
    return float(coef[0]), r2, float(np.sqrt(ss_res / y.size))


def decide_growth(R: np.ndarray, P: np.ndarray, horizon: int) -> ClassVerdict:
    """Classify a nondecreasing partial-sum/integral curve ``P(R)``.

    member
        last-decade relative increment below ``CAUCHY_TOL``, or octave
        increments decaying like ``R^{-s}`` (``s >= 0.25``) or
        ``(ln R)^{-p}`` (``p >= 1.5``) with ``R^2 >= 0.99``.
    nonmember
        octave increments fit ``(ln R)^{-p}`` with ``p <= 1.2``, or do not
        decay at all (``s <= 0.02``).

    A fit counts when ``R^2 >= 0.99`` or its RMS log-residual is ``<= 0.02``.
    """
    R = np.asarray(R, dtype=float)
    P = np.asarray(P, dtype=float)
    h = R[-1]
    total = float(P[-1])
    witness: dict = {"total": total}
    if total <= 0.0:
        witness["last_decade_rel"] = 0.0
        return ClassVerdict(Verdict.MEMBER, witness, horizon)
    logR = np.log(R)

    def at(x):
        return float(np.interp(math.log(x), logR, P))

    last = total - at(max(h / 10, R[0]))
    witness["last_decade_increment"] = last
    witness["last_decade_rel"] = last / total
    if last / total < CAUCHY_TOL:
        return ClassVerdict(Verdict.MEMBER, witness, horizon)

    # octaves over the last three decades, away from small-R transients
    i0 = max(4, int(math.ceil(math.log2(R[0]))) + 1, int(math.ceil(math.log2(h / 1000.0))))
    i1 = int(math.floor(math.log2(h)))
    octs = np.array([2.0**i for i in range(i0, i1 + 1)])
    if octs.size < 6:
        return ClassVerdict(Verdict.INCONCLUSIVE, witness, horizon)
    Pv = np.array([at(x) for x in octs])
    D = np.diff(Pv)
    mid = np.sqrt(octs[1:] * octs[:-1])
    if np.any(D <= 0):
        witness["nonpositive_octaves"] = int(np.sum(D <= 0))
        return ClassVerdict(Verdict.INCONCLUSIVE, witness, horizon)
    y = np.log(D)
    slope_pow, r2_pow, rms_pow = _fit(np.log(mid), y)
    slope_log, r2_log, rms_log = _fit(np.log(np.log(mid)), y)
    s, p = -slope_pow, -slope_log
    good_pow = r2_pow >= R2_MIN or rms_pow <= RMS_MAX
    good_log = r2_log >= R2_MIN or rms_log <= RMS_MAX
    witness.update(
        s_pow=s,
        r2_pow=r2_pow,
        rms_pow=rms_pow,
        p_log=p,
        r2_log=r2_log,
        rms_log=rms_log,
        growth_per_decade=float(np.mean(D[-3:]) / math.log10(2.0)),
    )
    if (good_log and p <= P_DIVERGE) or (good_pow and s <= S_FLAT):
        return ClassVerdict(Verdict.NONMEMBER, witness, horizon)
    if (good_pow and s >= S_CONVERGE) or (good_log and p >= P_CONVERGE):
        return ClassVerdict(Verdict.MEMBER, witness, horizon)
    return ClassVerdict(Verdict.INCONCLUSIVE, witness, horizon)


def _log_grid(lo: float, hi: float) -> np.ndarray:
    n = max(int(math.ceil(PTS_PER_DECADE * math.log10(hi / lo))), 2) + 1
    return np.geomspace(lo, hi, n)


def _annulus_sup(m: np.ndarray, r: np.ndarray, beta: float, gamma: float) -> np.ndarray:
    """``sup_{beta r < n < gamma r} m[n]`` for each ``r`` (0 for empty annuli)."""
    h = m.size - 1
    lo = np.floor(beta * r).astype(np.int64) + 1
    hi = np.ceil(gamma * r).astype(np.int64)  # exclusive
    lo = np.clip(lo, 0, h + 1)
    hi = np.clip(hi, 0, h + 1)
    cuts = np.unique(np.concatenate([lo, hi, [0, h + 1]]))
    cuts = cuts[cuts <= h]
    seg = np.maximum.reduceat(m, cuts)  # seg[i] = max m[cuts[i]:cuts[i+1]]
    # sparse table over segments for range-max queries
    table = [seg]
    span = 1
    while 2 * span <= seg.size:
        prev = table[-1]
        table.append(np.maximum(prev[:-span], prev[span:]))
        span *= 2
    a = np.searchsorted(cuts, lo)
    b = np.searchsorted(cuts, hi)  # segments a .. b-1
    out = np.zeros(r.size)
    nonempty = b > a
    length = (b - a)[nonempty]
    lev = np.floor(np.log2(length)).astype(int)
    aa = a[nonempty]
    bb = b[nonempty]
    vals = np.empty(length.size)
    for L in np.unique(lev):
        sel = lev == L
        t = table[L]
        vals[sel] = np.maximum(t[aa[sel]], t[bb[sel] - 2**L])
    out[nonempty] = vals
    return out


def _annulus_integral(m: np.ndarray, beta: float, gamma: float, r_lo: float, horizon: int) -> ClassVerdict:
    if not (0 < beta < gamma):
        raise BadAnnulus(f"need 0 < beta < gamma, got ({beta}, {gamma})")
    r_hi = horizon / gamma
    if r_hi <= 10 * r_lo:
        raise ValidationError("horizon too small for the annulus")
    r = _log_grid(r_lo, r_hi)
    f = _annulus_sup(m, r, beta, gamma)
    # trapezoid in ln r:  int f dr = int f r d(ln r)
    g = f * r
    dl = np.diff(np.log(r))
    P = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * dl)])
    v = decide_growth(r, P, horizon)
    v.witness.update(beta=beta, gamma=gamma, integral=float(P[-1]))
    return v


def class_S(W: MatrixSequence, beta: float = 1.0, gamma: float = 2.0, horizon: int = 10**6, lattice: str = "bilateral") -> ClassVerdict:
    """``int_1^inf sup_{beta r < |n| < gamma r} ||W(n)|| dr < inf``."""
    _check_lattice(lattice)
    if not (0 < beta < gamma):
        raise BadAnnulus(f"need 0 < beta < gamma, got ({beta}, {gamma})")
    m = _per_site(lambda ns: mat_norm(W.values(ns)), horizon, lattice)
    return _annulus_integral(m, beta, gamma, 1.0, horizon)


def class_M(W: MatrixSequence, k: int = 1, beta: float = 1.0, gamma: float = 2.0, horizon: int = 10**6, lattice: str = "bilateral") -> ClassVerdict:
    """``int sup ||(tau^k W - W)(n)|| dr < inf`` (``k >= 1``) or the ``q_0`` version (``k = 0``)."""
    _check_lattice(lattice)
    if not (0 < beta < gamma):
        raise BadAnnulus(f"need 0 < beta < gamma, got ({beta}, {gamma})")
    if k == 0:
        m = _per_site(lambda ns: q0_values(W, ns, lattice), horizon, lattice)
        return _annulus_integral(m, beta, gamma, 1.0 / (gamma - beta), horizon)
    if k < 0:
        raise ValidationError("k must be nonnegative")
    m = _per_site(lambda ns: mat_norm(tau(W, ns, k, lattice) - W.values(ns)), horizon, lattice)
    return _annulus_integral(m, beta, gamma, 1.0, horizon)


def series_verdict(terms: np.ndarray, horizon: Optional[int] = None) -> ClassVerdict:
    """Convergence test for ``sum_{n >= 0} terms[n]`` of nonnegative terms."""
    terms = np.asarray(terms, dtype=float)
    P = np.cumsum(terms)
    n = P.size
    R = np.unique(np.round(_log_grid(1.0, float(n))).astype(np.int64))
    R = R[(R >= 1) & (R <= n)]
    return decide_growth(R.astype(float), P[R - 1], horizon if horizon is not None else n - 1)


def l1_difference_test(
    W: MatrixSequence,
    p: int,
    component: tuple[int, int] = (0, 0),
    horizon: int = 10**6,
    lattice: str = "unilateral",
) -> ClassVerdict:
    """Is ``W^{ij} - tau^p W^{ij}`` summable?"""
    _check_lattice(lattice)
    if p < 1:
        raise ValidationError("p must be positive")
    i, j = component
    terms = _per_site(lambda ns: np.abs(W.values(ns)[:, i, j] - tau(W, ns, p, lattice)[:, i, j]), horizon, "unilateral")
    if lattice == "bilateral":
        terms = terms + np.concatenate([[0.0], _per_site(
            lambda ns: np.abs(W.values(-ns)[:, i, j] - tau(W, -ns, p, lattice)[:, i, j]), horizon, "unilateral")[1:]])
    v = series_verdict(terms, horizon)
    v.witness.update(p=p, component=f"{i + 1}{j + 1}")
    return v


def decay_rate_estimate(W: MatrixSequence, horizon: int = 10**6, lattice: str = "bilateral") -> float:
    """Log-log slope of the tail envelope ``sup_{R <= |n| <= horizon} max_ij |W_ij(n)|``
    over the last two decades."""
    m = _per_site(lambda ns: np.max(np.abs(W.values(ns)), axis=(-2, -1)), horizon, lattice)
    if not np.any(m > 0):
        raise AllZero("sequence vanishes on the horizon")
    env = np.maximum.accumulate(m[::-1])[::-1]
    R = np.unique(np.round(np.geomspace(max(horizon / 100, 1), horizon, 65)).astype(np.int64))
    E = env[R]
    if np.any(E <= 0):
        return float("inf")
    slope, _, _ = _fit(np.log(R.astype(float)), np.log(E))
    return -slope


def appendix_sanity(a: Callable[[np.ndarray], np.ndarray], beta: float = 1.0, gamma: float = 2.0, horizon: int = 10**6) -> dict:
    """Cross-check: a class-S member must have bounded ``n a_n`` and summable ``a_n``."""
    ns = np.arange(0, horizon + 1)
    av = np.asarray(a(ns), dtype=float)
    seq = MatrixSequence.scalar(lambda n: av[np.abs(n)], label="appendix")
    s = class_S(seq, beta, gamma, horizon, lattice="unilateral")
    report = {"class_S": s.verdict.value, "applicable": s.is_member}
    if not s.is_member:
        return report
    na = ns * av
    sup, trend = _sup_and_trend(na)
    series = series_verdict(av[1:], horizon)
    report.update(
        sup_n_a=sup,
        sup_trend=trend,
        bounded=trend < CAUCHY_TOL,
        series=series.verdict.value,
        series_converges=series.is_member,
    )
    report["passed"] = bool(report["bounded"] and report["series_converges"])
    return report


# --------------------------------------------------------------------------
# long-range weights
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class WeightSpec:
    l: int
    r: float

    def __post_init__(self):
        if self.l < 0:
            raise ValidationError("l must be a nonnegative integer")
        if not math.isfinite(self.r):
            raise ValidationError("r must be finite")


def iterated_log(p: int, x):
    """``ln_0 = 1``, ``ln_1(x) = ln(1 + x)``, ``ln_p = ln(1 + ln_{p-1})``."""
    x = np.asarray(x, dtype=float)
    if p == 0:
        return np.ones_like(x)
    v = np.log1p(x)
    for _ in range(p - 1):
        v = np.log1p(v)
    return v


def omega_weight(spec: WeightSpec, x):
    """``omega_l^r(x) = ln_{l+1}(<x>)^r * prod_{p=0}^l ln_p(<x>)``."""
    bx = np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)
    out = iterated_log(spec.l + 1, bx) ** spec.r
    for p in range(spec.l + 1):
        out = out * iterated_log(p, bx)
    return out if np.ndim(out) else float(out)


def _rate(spec: WeightSpec):
    def d(ns):
        return 1.0 / (np.sqrt(1.0 + ns.astype(float) ** 2) * omega_weight(spec, ns))
    return d


class _KDifferenceTable:
    """``W`` with ``W(n) - W(n - k) = d(n)``, ``W = 0`` on ``[-k, -1]``.

    ``W(n) = sum_{0 <= j <= n, j = n mod k} d(j)`` for ``n >= 0`` and
    ``-sum_{n < j <= -1, j = n mod k} d(j)`` for ``n < 0``.
    """

    def __init__(self, d, k: int):
        self.d, self.k = d, k
        self.pos = np.zeros(0)
        self.neg = np.zeros(0)

    def _extend(self, M: int) -> None:
        if self.pos.size > M:
            return
        M = max(M + 1, 2 * self.pos.size, 1024)
        k = self.k
        js = np.arange(M)
        dv = self.d(js)
        pos = np.empty(M)
        for r in range(k):
            pos[r::k] = np.cumsum(dv[r::k])
        # negative side: index i <-> n = -(i + 1)
        dn = self.d(-(js + 1))
        neg = np.zeros(M)
        for r in range(k):
            # chain i = r, r + k, ...: W(-(i + 1)) = -(sum of dn over earlier chain entries)
            idx = np.arange(r, M, k)
            neg[idx] = -np.concatenate([[0.0], np.cumsum(dn[idx])[:-1]])
        self.pos, self.neg = pos, neg

    def __call__(self, ns: np.ndarray) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        self._extend(int(np.max(np.abs(ns))) + 1 if ns.size else 0)
        out = np.empty(ns.shape)
        nn = ns >= 0
        out[nn] = self.pos[ns[nn]]
        out[~nn] = self.neg[-ns[~nn] - 1]
        return out


def make_longrange_example(spec: WeightSpec, mode: str = "S_rate", k: int = 1) -> MatrixSequence:
    """``I_2 / (<n> omega(n))`` (S_rate) or a sequence whose k-difference has that rate (Mk_rate)."""
    d = _rate(spec)
    if mode == "S_rate":
        return MatrixSequence.scalar(d, label=f"omega_rate(l={spec.l},r={spec.r})")
    if mode == "Mk_rate":
        if k < 1:
            raise ValidationError("Mk_rate needs k >= 1")
        return MatrixSequence.scalar(_KDifferenceTable(d, k), label=f"omega_Mk(l={spec.l},r={spec.r},k={k})")
    raise ValidationError(f"unknown mode {mode!r}")


# --------------------------------------------------------------------------
# subordinate families and the counterexample
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class SubordinateFamily:
    """Partition blocks ``P_n = [alpha_n, beta_n]`` with nonnegative profiles ``f_n``."""

    alphas: tuple[int, ...]
    profiles: tuple[np.ndarray, ...]
    norms_1: tuple[float, ...] = field(init=False)
    norms_inf: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if len(self.alphas) != len(self.profiles) or not self.alphas:
            raise ValidationError("need one profile per block")
        if self.alphas[0] != 0:
            raise ValidationError("the partition must start at 0")
        for n in range(len(self.alphas) - 1):
            if self.alphas[n] + len(self.profiles[n]) != self.alphas[n + 1]:
                raise ValidationError("blocks must be contiguous: beta_n = alpha_{n+1} - 1")
        sizes = [len(f) for f in self.profiles]
        if any(sizes[n + 1] <= sizes[n] for n in range(1, len(sizes) - 1)):
            raise ValidationError("block sizes must increase strictly for n >= 1")
        profs = tuple(np.asarray(f, dtype=float) for f in self.profiles)
        if any(np.any(f < 0) for f in profs):
            raise ValidationError("profiles must be nonnegative")
        n1 = tuple(float(f.sum()) for f in profs)
        if any(v <= 0 for v in n1):
            raise ValidationError("every profile needs positive mass")
        object.__setattr__(self, "profiles", profs)
        object.__setattr__(self, "norms_1", n1)
        object.__setattr__(self, "norms_inf", tuple(float(f.max()) for f in profs))

    @property
    def n_blocks(self) -> int:
        return len(self.alphas)

    @property
    def betas(self) -> tuple[int, ...]:
        return tuple(a + len(f) - 1 for a, f in zip(self.alphas, self.profiles))

    def f(self, n: int, j: int) -> float:
        a = self.alphas[n]
        prof = self.profiles[n]
        return float(prof[j - a]) if a <= j < a + len(prof) else 0.0

    def starts_at_zero(self) -> bool:
        return all(f[0] == 0.0 for f in self.profiles)


def dyadic_tent_family(n_max: int) -> SubordinateFamily:
    """``P_0 = {0, 1}``, ``P_n = [2^n, 2^{n+1})`` with tents ``min(j - 2^n, 2^{n+1} - j)``."""
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    alphas = [0]
    profs = [np.array([0.0, 1.0])]
    for n in range(1, n_max + 1):
        j = np.arange(2**n, 2 ** (n + 1))
        alphas.append(2**n)
        profs.append(np.minimum(j - 2**n, 2 ** (n + 1) - j).astype(float))
    return SubordinateFamily(tuple(alphas), tuple(profs))


def random_subordinate_family(rng: np.random.Generator, n_max: int, start_at_zero: bool = True) -> SubordinateFamily:
    """Random partition with strictly growing blocks and random nonnegative profiles."""
    sizes = [int(rng.integers(2, 4))]
    size = int(rng.integers(2, 4))
    for _ in range(n_max):
        sizes.append(size)
        size = size + 1 + int(rng.integers(0, max(size // 2, 1) + 1))
    alphas, profs, a = [], [], 0
    for s in sizes:
        f = rng.uniform(0.0, 1.0, size=s)
        if start_at_zero:
            f[0] = 0.0
        f[1 + int(rng.integers(0, s - 1))] += 0.5
        alphas.append(a)
        profs.append(f)
        a += s
    return SubordinateFamily(tuple(alphas), tuple(profs))


def alternating_tail(a: Callable[[np.ndarray], np.ndarray], m: int, terms: int = 48) -> float:
    """``sum_{k >= m} (-1)^k a_k`` by repeated averaging of partial sums."""
    ks = np.arange(m, m + terms)
    s = np.cumsum((-1.0) ** ks * np.asarray(a(ks), dtype=float))
    while s.size > 1:
        s = 0.5 * (s[1:] + s[:-1])
    return float(s[0])


@dataclass(frozen=True)
class CounterexampleSeq:
    """``b_j = (-1)^n a_n f_n(j) / ||f_n||_1`` for ``j`` in ``P_n``."""

    b: np.ndarray
    a_values: np.ndarray
    family: SubordinateFamily
    a: Callable[[np.ndarray], np.ndarray]
    L1: Optional[float]
    L2: Optional[float]
    limit: float
    block_of: np.ndarray


def _validate_alternating(a, n_max: int) -> None:
    ns = np.arange(0, n_max + 2)
    av = np.asarray(a(ns), dtype=float)
    if np.any(~np.isfinite(av)) or np.any(av <= 0):
        raise NotAlternatingAdmissible("a_n must be positive")
    if np.any(np.diff(av) > 1e-15 * av[:-1]):
        raise NotAlternatingAdmissible("a_n must be nonincreasing")
    far = np.unique(np.geomspace(n_max + 1, 1e12, 40).astype(np.int64))
    af = np.asarray(a(far), dtype=float)
    if np.any(np.diff(af) > 1e-15 * af[:-1]) or af[-1] > 0.5 * av[0]:
        raise NotAlternatingAdmissible("a_n does not decrease to 0")
    s = series_verdict(np.asarray(a(np.arange(0, 1 << 20)), dtype=float))
    if s.is_member:
        raise NotAlternatingAdmissible("sum a_n converges absolutely; the alternating series must be conditionally convergent")


def build_counterexample(family: SubordinateFamily, a: Callable[[np.ndarray], np.ndarray]) -> CounterexampleSeq:
    """Blockwise-rescaled alternating sequence of the subordinate family."""
    _validate_alternating(a, family.n_blocks)
    av = np.asarray(a(np.arange(family.n_blocks)), dtype=float)
    parts, owner = [], []
    for n, prof in enumerate(family.profiles):
        parts.append((-1.0) ** n * av[n] * prof / family.norms_1[n])
        owner.append(np.full(prof.size, n))
    b = np.concatenate(parts)
    L1 = L2 = None
    if family.starts_at_zero():
        betas = np.asarray(family.betas, dtype=float)
        n1 = np.asarray(family.norms_1)
        L1 = float(np.max(betas * av * np.asarray(family.norms_inf) / n1))
        maxM = np.array([max(float(np.max(np.abs(np.diff(f)))) if f.size > 1 else 0.0, float(f[-1])) for f in family.profiles])
        L2 = float(np.max(betas**2 * av * maxM / n1))
    limit = float(np.sum((-1.0) ** np.arange(family.n_blocks) * av)) + alternating_tail(a, family.n_blocks)
    return CounterexampleSeq(b, av, family, a, L1, L2, limit, np.concatenate(owner))


def verify_counterexample(seq: CounterexampleSeq, p_max: int = 8, horizon: Optional[int] = None) -> dict:
    """Check the three properties of the sequence ``b`` up to ``horizon``.

    (i) block-end partial sums equal the alternating partial sums, contract
    to the limit within ``a_{n+1}`` and bound the partial sums inside the
    next block; (ii) the ``p``-window absolute sums dominate
    ``sum_{n >= n_p} a_n`` and diverge; (iii) ``sup |j b_j| <= L1`` and
    ``sup |j^2 (b_j - b_{j+1})| <= L2``.
    """
    fam = seq.family
    b = seq.b
    J = b.size if horizon is None else min(int(horizon), b.size)
    betas = [bt for bt in fam.betas if bt < J]
    if len(betas) < 12:
        raise ValidationError("horizon must cover at least 12 blocks")
    av = seq.a_values
    S = np.cumsum(b[:J])
    # (i)
    alt = np.cumsum((-1.0) ** np.arange(len(betas)) * av[: len(betas)])
    Sb = S[np.asarray(betas)]
    dev_alt = float(np.max(np.abs(Sb - alt)))
    err = np.abs(Sb - seq.limit)
    bound_ok = bool(np.all(err[:-1] <= av[1 : len(betas)] * (1 + 1e-12) + 1e-15))
    between = True
    for n in range(len(betas) - 1):
        seg = S[betas[n] : betas[n + 1] + 1]
        lo, hi = sorted((Sb[n], Sb[n + 1]))
        between &= bool(np.all((seg >= lo - 1e-14) & (seg <= hi + 1e-14)))
    item_i = {
        "max_dev_block_sums": dev_alt,
        "limit": seq.limit,
        "tail_bound_holds": bound_ok,
        "monotone_within_blocks": between,
        "final_error": float(err[-1]),
        "passed": bool(dev_alt <= 1e-12 and bound_ok and between),
    }
    # (ii)
    sizes = [len(f) for f in fam.profiles]
    B = np.concatenate([[0.0], np.cumsum(b)])
    per_p = {}
    ok_ii = True
    for p in range(1, p_max + 1):
        n_p = next(n for n, s in enumerate(sizes) if p < s)
        last = max(n for n, bt in enumerate(fam.betas) if bt + p <= b.size - 1 and bt < J)
        window = np.abs(B[p:] - B[:-p])  # |b_j + ... + b_{j+p-1}| for j = 0..
        lhs = np.cumsum(window)
        Ns = np.arange(n_p + 1, last + 1)
        L = lhs[np.asarray(fam.betas)[Ns]]
        Rr = np.array([np.sum(av[n_p : N + 1]) for N in Ns])
        dominates = bool(np.all(L >= Rr * (1 - 1e-12)))
        growth = series_verdict(window[: fam.betas[last] + 1])
        per_p[p] = {
            "n_p": n_p,
            "dominates_alternating_tail_sums": dominates,
            "min_margin": float(np.min(L - Rr)) if L.size else float("nan"),
            "verdict": growth.verdict.value,
            "partial_sum": float(lhs[fam.betas[last]]),
        }
        ok_ii &= dominates and growth.verdict is Verdict.NONMEMBER
    item_ii = {"per_p": per_p, "passed": bool(ok_ii)}
    # (iii)
    j = np.arange(J)
    jb = float(np.max(np.abs(j * b[:J])))
    bn = np.append(b, 0.0)[1 : J + 1]
    j2 = float(np.max(np.abs(j.astype(float) ** 2 * (b[:J] - bn))))
    item_iii = {"sup_j_b": jb, "L1": seq.L1, "sup_j2_diff": j2, "L2": seq.L2}
    if seq.L1 is not None:
        item_iii["passed"] = bool(jb <= seq.L1 * (1 + 1e-12) and j2 <= seq.L2 * (1 + 1e-12))
    else:
        item_iii["passed"] = False
    return {"i": item_i, "ii": item_ii, "iii": item_iii, "horizon": J,
            "passed": bool(item_i["passed"] and item_ii["passed"] and item_iii["passed"])}


def counterexample_potential(seq: CounterexampleSeq) -> PotentialSpec:
    """``V0^{11}(n) = -sum_{j >= n} b_j`` on ``n >= 0``, zero for ``n < 0``.

    Defined for ``0 <= n <= len(b)``; the tail beyond the tabulated blocks
    is the accelerated alternating tail of ``a``.
    """
    b = seq.b
    fam = seq.family
    nb = fam.n_blocks
    tails = np.empty(nb + 1)  # tails[m] = sum_{k >= m} (-1)^k a_k
    tails[nb] = alternating_tail(seq.a, nb)
    for m in range(nb - 1, -1, -1):
        tails[m] = (-1.0) ** m * seq.a_values[m] + tails[m + 1]
    V = np.empty(b.size + 1)
    for m, (alpha, prof) in enumerate(zip(fam.alphas, fam.profiles)):
        blk = b[alpha : alpha + prof.size]
        within = np.cumsum(blk[::-1])[::-1]  # sum_{j=n}^{beta_m} b_j
        V[alpha : alpha + prof.size] = -(within + tails[m + 1])
    V[b.size] = -tails[nb]
    J = b.size

    def v11(ns):
        ns = np.asarray(ns, dtype=np.int64)
        if np.any(ns > J):
            raise ValidationError(f"counterexample potential tabulated only up to n = {J}")
        out = np.zeros(ns.shape)
        pos = ns >= 0
        out[pos] = V[ns[pos]]
        return out

    return PotentialSpec(v0=MatrixSequence.entry(0, 0, v11, label="counterexample", support_hint=(0, J)))


# --------------------------------------------------------------------------
# named families and CSV I/O
# --------------------------------------------------------------------------
def _bracket(ns):
    return np.sqrt(1.0 + np.asarray(ns, dtype=float) ** 2)


def harmonic(ns):
    """``a_n = 1 / (n + 1)``."""
    return 1.0 / (np.asarray(ns, dtype=float) + 1.0)


A_FAMILIES = {
    "harmonic": harmonic,
    "inv_sqrt": lambda ns: 1.0 / np.sqrt(np.asarray(ns, dtype=float) + 1.0),
    "inv_log": lambda ns: 1.0 / np.log(np.asarray(ns, dtype=float) + 2.0),
}


def named_sequence(name: str, **params) -> MatrixSequence:
    """Bundled sequence families by name."""
    if name == "kopylova":
        return MatrixSequence.scalar(lambda n: 1.0 / omega_weight(WeightSpec(0, 1.0), n), label="kopylova")
    if name == "omega_rate":
        spec = WeightSpec(int(params.get("l", 0)), float(params.get("r", 2.0)))
        return make_longrange_example(spec, params.get("mode", "S_rate"), int(params.get("k", 1)))
    if name == "harmonic":
        return MatrixSequence.scalar(lambda n: 1.0 / (1.0 + np.abs(n)), label="harmonic")
    if name == "inverse_square":
        return MatrixSequence.scalar(lambda n: _bracket(n) ** -2, label="inverse_square")
    if name == "inverse_power":
        s = float(params.get("s", 0.5))
        return MatrixSequence.scalar(lambda n: _bracket(n) ** -s, label=f"inverse_power({s})")
    if name == "sin_power":
        s = float(params.get("s", 0.1))
        return MatrixSequence.scalar(lambda n: np.sin(n) * _bracket(n) ** -s, label=f"sin_power({s})")
    if name == "constant":
        c = float(params.get("c", 1.0))
        return MatrixSequence.constant(c * np.eye(2))
    if name == "counterexample":
        n_max = int(params.get("n_max", 19))
        fam = dyadic_tent_family(n_max)
        a = A_FAMILIES[params.get("a", "harmonic")]
        return counterexample_potential(build_counterexample(fam, a)).v0
    raise ValidationError(f"unknown sequence family {name!r}")


CSV_COLUMNS = ["n", "w11_re", "w11_im", "w12_re", "w12_im", "w21_re", "w21_im", "w22_re", "w22_im"]


def dump_sequence_csv(W: MatrixSequence, n_lo: int, n_hi: int, fh: TextIO) -> None:
    """Tabulate ``W`` on ``[n_lo, n_hi]`` with round-trip exact floats."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for ns in _chunks(n_lo, n_hi):
        V = W.values(ns)
        for n, M in zip(ns, V):
            row = [str(int(n))]
            for i in range(2):
                for j in range(2):
                    row += [format(float(M[i, j].real), ".17g"), format(float(M[i, j].imag), ".17g")]
            writer.writerow(row)


def load_sequence_csv(fh: TextIO, label: str = "csv") -> MatrixSequence:
    """Tabulated sequence from CSV; evaluation outside the table is an error."""
    reader = csv.reader(fh)
    header = next(reader)
    if [h.strip() for h in header] != CSV_COLUMNS:
        raise ValidationError(f"CSV header must be {','.join(CSV_COLUMNS)}")
    rows = [r for r in reader if r]
    if not rows:
        raise ValidationError("empty sequence CSV")
    data = np.array([[float(x) for x in r] for r in rows])
    ns = data[:, 0].astype(np.int64)
    order = np.argsort(ns)
    ns, data = ns[order], data[order]
    if np.any(np.diff(ns) != 1):
        raise ValidationError("CSV rows must cover a contiguous range of n")
    vals = (data[:, 1::2] + 1j * data[:, 2::2]).reshape(-1, 2, 2)
    lo, hi = int(ns[0]), int(ns[-1])

    def fn(q):
        q = np.asarray(q, dtype=np.int64)
        if q.size and (q.min() < lo or q.max() > hi):
            raise ValidationError(f"sequence tabulated only on [{lo}, {hi}]")
        return vals[q - lo]

    return MatrixSequence(fn, (lo, hi), label)
