"""Acceptance criteria, each checked at its stated tolerance.

Every test records one ``CRITERION n: PASS|FAIL`` line; pytest prints them
in the terminal summary and ``python tests/test_acceptance.py`` prints them
directly.
"""
from __future__ import annotations

import cmath
import math
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from artifact import perturbation_classes as pc
from artifact import spectral_probe as sprobe
from artifact.lattice_ops import (
    LatticeWindow,
    MatrixSequence,
    PotentialSpec,
    build_Ak,
    build_H0,
    build_potential,
    check_A0_commutator,
    check_A0_identity,
    check_Ak_first_commutator,
    projected_commutator_min_eig,
)
from artifact.model_core import (
    fourier_mourre_deviation,
    g_k_eval,
    inf_g_on,
    kappa_k,
    make_params,
    spectral_bands,
)
from artifact.perturbation_classes import Verdict

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # pragma: no cover - script mode without the tests dir on sys.path
    ACCEPTANCE_LINES = []

DIRAC = make_params(1.0, 1.0, -1.0)
SSH = make_params(0.0, 1.0, 2.0)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _gapless_draw(rng):
    r = rng.uniform(0.3, 2.0)
    return make_params(0.0, cmath.rect(r, rng.uniform(-math.pi, math.pi)), cmath.rect(r, rng.uniform(-math.pi, math.pi)))


def _random_W(rng):
    G = [rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)) for _ in range(2)]
    G = [0.5 * (g + g.conj().T) for g in G]
    w, ph, s = rng.uniform(0.1, 2.0), rng.uniform(0, 6), rng.uniform(0.2, 1.5)

    def fn(ns):
        n = ns.astype(float)[:, None, None]
        return G[0] * np.sin(w * n + ph) / (1 + n * n) ** (s / 2) + G[1] / (1 + np.abs(n))

    return MatrixSequence(fn, label="random")


# ---------------------------------------------------------------------------
def test_criterion_1_exact_commutator_identity():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    devs = [check_A0_identity(_gapless_draw(rng), LatticeWindow.bilateral(200), margin=4) for _ in range(10)]
    dt = time.perf_counter() - t0
    ok = max(devs) <= 1e-12 and dt < 5.0
    record(1, ok, f"max deviation {max(devs):.3e} (<= 1e-12) over 10 gapless draws, {dt:.2f} s (< 5 s)")


def test_criterion_2_fourier_mourre_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for p in (DIRAC, SSH):
        for k in (1, 2, 3):
            d = fourier_mourre_deviation(p, k, 4096)
            # two independent routes: displayed density and trace of the projected symbol commutator
            worst = max(worst, d["max_dev_density"], d["max_dev_projected_symbol"])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    record(2, ok, f"max |g_k - density| {worst:.3e} (<= 1e-12) over both routes, {dt:.3f} s (< 1 s)")


def _bisection_zero_set(p, k):
    b = spectral_bands(p)
    zs = [b.lambda_min, b.lambda_max]
    t = np.linspace(b.lambda_min, b.lambda_max, 4001)[1:-1]
    g = g_k_eval(p, k, t)
    for i in np.nonzero(np.sign(g[1:]) != np.sign(g[:-1]))[0]:
        zs.append(brentq(lambda s: g_k_eval(p, k, s), t[i], t[i + 1], xtol=1e-14, rtol=1e-15))
    zs = sorted(set(np.round(zs, 12)))
    return sorted([-z for z in zs] + zs)


def test_criterion_3_kappa_sets():
    e1 = max(abs(x - y) for x, y in zip(kappa_k(DIRAC, 1).points, (-math.sqrt(5), -1.0, 1.0, math.sqrt(5))))
    ok1 = len(kappa_k(DIRAC, 1).points) == 4 and e1 <= 1e-12
    ok2 = kappa_k(make_params(0.0, 1.0, 1.0), 0).points == (-2.0, 2.0)
    worst = 0.0
    ok3 = True
    for p in (DIRAC, SSH, make_params(-0.4, 2 - 1j, 0.7j)):
        for k in range(1, 9):
            ref = _bisection_zero_set(p, k)
            got = kappa_k(p, k).points
            if len(ref) != len(got):
                ok3 = False
                continue
            worst = max(worst, float(np.max(np.abs(np.array(ref) - np.array(got)))))
    ok3 = ok3 and worst <= 1e-9
    record(3, ok1 and ok2 and ok3,
           f"kappa_1(Dirac) err {e1:.1e}; kappa_0 = {{+-2}}: {ok2}; bisection match k<=8 max err {worst:.1e} (<= 1e-9)")


def test_criterion_4_truncated_mourre_positivity():
    t0 = time.perf_counter()
    lam = (1.2, 2.0)
    oracle = inf_g_on(DIRAC, 1, lam)
    vals = {}
    for N in (300, 600):
        win = LatticeWindow.bilateral(N)
        vals[N], _ = projected_commutator_min_eig(build_H0(DIRAC, win), build_Ak(DIRAC, 1, win), lam)
    dt = time.perf_counter() - t0
    d300, d600 = abs(vals[300] - oracle), abs(vals[600] - oracle)
    ok = (
        all(v >= 0.27 for v in vals.values())
        and all(abs(v - oracle) <= 0.05 for v in vals.values())
        and d600 < d300
        and dt < 30.0
    )
    record(4, ok, f"min_eig N=300 {vals[300]:.5f}, N=600 {vals[600]:.5f}; inf g_1 = {oracle:.5f}; "
                  f"distance {d300:.2e} -> {d600:.2e}; {dt:.1f} s (< 30 s)")


def test_criterion_5_edge_state():
    lam, ratio = sprobe.edge_state_check(make_params(0.5, 1.0, 2.0), 400)
    ok1 = abs(lam + 0.5) <= 1e-8 and abs(ratio - 0.5) <= 1e-3
    q = make_params(0.5, 2.0, 1.0)
    gap = spectral_bands(q).lambda_min
    rep = sprobe.truncation_stable_eigs(lambda n: build_H0(q, LatticeWindow.unilateral(n)), (-gap, gap), [400, 800])
    ok2 = rep.stable().size == 0
    record(5, ok1 and ok2, f"eigenvalue {lam:.12f}, decay ratio {ratio:.6f}; reversed moduli stable gap eigenvalues: {rep.stable().size}")


def test_criterion_6_closed_forms_with_potentials():
    rng = np.random.default_rng(6)
    t0 = time.perf_counter()
    worst_k = worst_0 = 0.0
    win = LatticeWindow.bilateral(300)
    for _ in range(20):
        a = cmath.rect(rng.uniform(0.3, 2.0), rng.uniform(-math.pi, math.pi))
        b = cmath.rect(rng.uniform(0.3, 2.0), rng.uniform(-math.pi, math.pi))
        p = make_params(rng.uniform(-1.5, 1.5), a, b)
        k = int(rng.integers(1, 4))
        worst_k = max(worst_k, check_Ak_first_commutator(p, k, _random_W(rng), win))
        worst_0 = max(worst_0, check_A0_commutator(_gapless_draw(rng), _random_W(rng), win))
    dt = time.perf_counter() - t0
    ok = worst_k <= 1e-12 and worst_0 <= 1e-12 and dt < 60.0
    record(6, ok, f"A_k closed form {worst_k:.2e}, A_0 closed form {worst_0:.2e} (<= 1e-12) on 20 draws, {dt:.1f} s (< 60 s)")


def test_criterion_7_classifier_fixtures():
    kop = pc.named_sequence("kopylova")
    q = pc.class_Q(kop, 1, 2)
    rho = pc.decay_rate_estimate(kop)
    # rho ~ 0: the log-derivative of 1/ln<n> on the fit range [10^4, 10^6] is at most 1/ln 10^4
    ok_kop = q.verdict is Verdict.MEMBER and 0.0 <= rho <= 1.0 / math.log(1e4)
    omega = pc.named_sequence("omega_rate", l=0, r=2.0)
    harm = pc.named_sequence("harmonic")
    verdicts = {}
    details = []
    ok_ann = True
    for beta, gamma in ((1.0, 2.0), (0.5, 3.0)):
        vo = pc.class_S(omega, beta, gamma)
        vh = pc.class_S(harm, beta, gamma)
        verdicts[(beta, gamma)] = (vo.verdict, vh.verdict)
        # logarithmic divergence: constant growth per decade ~ ln(10)/beta and log-model exponent <= 1.2
        g = vh.witness.get("growth_per_decade", float("nan"))
        ok_ann &= abs(g - math.log(10) / beta) <= 0.05 * math.log(10) / beta and vh.witness.get("p_log", 9) <= 1.2
        details.append(f"({beta},{gamma}): omega {vo.verdict.value}, harmonic {vh.verdict.value} [{g:.3f}/decade]")
    ok_omega = all(v[0] is Verdict.MEMBER for v in verdicts.values())
    ok_harm = all(v[1] is Verdict.NONMEMBER for v in verdicts.values())
    ok_inv = verdicts[(1.0, 2.0)] == verdicts[(0.5, 3.0)]
    record(7, ok_kop and ok_omega and ok_harm and ok_ann and ok_inv,
           f"kopylova Q12 {q.verdict.value}, rho {rho:.4f}; " + "; ".join(details))


def test_criterion_8_counterexample_pipeline():
    t0 = time.perf_counter()
    seq = pc.build_counterexample(pc.dyadic_tent_family(19), pc.harmonic)
    rep = pc.verify_counterexample(seq, p_max=8, horizon=2**20)
    V = pc.counterexample_potential(seq).v0
    h = min(2**20, seq.b.size)
    q = pc.class_Q(V, 1, 2, h, "unilateral")
    l1 = {p: pc.l1_difference_test(V, p, (0, 0), h, "unilateral").verdict for p in range(1, 9)}
    dt = time.perf_counter() - t0
    ok = (
        rep["i"]["passed"] and rep["ii"]["passed"] and rep["iii"]["passed"]
        and q.verdict is Verdict.MEMBER
        and all(v is Verdict.NONMEMBER for v in l1.values())
        and dt < 60.0
    )
    record(8, ok, f"items (i) {rep['i']['passed']} (ii) {rep['ii']['passed']} (iii) {rep['iii']['passed']} "
                  f"[sup|j b_j| {rep['iii']['sup_j_b']:.3f} <= {seq.L1}, sup|j^2 db| {rep['iii']['sup_j2_diff']:.3f} <= {seq.L2}]; "
                  f"potential Q12 {q.verdict.value}, l1 p=1..8 {sorted({v.value for v in l1.values()})}; {dt:.1f} s (< 60 s)")


def _dense_weighted(H, s, z):
    d = sprobe.weight_vector(H.window, s)
    R = np.linalg.inv(H.to_dense() - z * np.eye(H.dim))
    return np.linalg.norm(d[:, None] * R * d[None, :], 2)


@pytest.mark.slow
def test_criterion_9_lap_plateau_vs_blowup():
    t0 = time.perf_counter()
    eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3]
    # route check at N = 400: banded LU + power iteration against dense inverse + SVD
    H4 = build_H0(DIRAC, LatticeWindow.bilateral(400))
    g4 = sprobe.lap_scan(H4, 1.0, [1.5, 1.0], eps, tol=1e-10, iter_cap=20000)
    dense = {(x, e): _dense_weighted(H4, 1.0, complex(x, e)) for x in (1.5, 1.0) for e in eps}
    route = max(abs(r.norm - dense[(r.x, r.epsilon)]) / dense[(r.x, r.epsilon)] for r in g4.rows)
    H = build_H0(DIRAC, LatticeWindow.bilateral(4000))
    g = sprobe.lap_scan(H, 1.0, [1.5, 1.0], eps)
    dt = time.perf_counter() - t0
    plateau, growth = g.ratio(1.5), g.ratio(1.0)
    ok = plateau <= 1.5 and growth >= 5.0 and route <= 1e-6 and all(r.converged for r in g.rows) and dt < 300
    record(9, ok, f"x=1.5 last/first {plateau:.3f} (<= 1.5); x=1.0 growth {growth:.2f} (>= 5); "
                  f"dense route deviation at N=400 {route:.1e}; {dt:.1f} s (< 300 s)")


@pytest.mark.slow
def test_criterion_10_no_singular_surrogate():
    counts = []
    stable = []
    kop = pc.named_sequence("kopylova")
    for N in (200, 400, 800):
        win = LatticeWindow.bilateral(N)
        H0 = build_H0(DIRAC, win)
        HV = H0 + build_potential(PotentialSpec(v0=kop), win)
        c0 = sprobe.band_eigenvalue_count(H0, DIRAC)
        cV = sprobe.band_eigenvalue_count(HV, DIRAC)
        counts.append((N, c0, cV, abs(cV - c0) / c0))
    rep = sprobe.truncation_stable_eigs(lambda n: build_H0(DIRAC, LatticeWindow.bilateral(n)), (-1.0, 1.0), [200, 400, 800])
    stable = rep.stable()
    ok1 = stable.size == 0
    ok2 = all(rel <= 0.02 for *_, rel in counts)
    changes = ", ".join(f"N={N}: {c0}->{cV} ({100 * rel:.1f}%)" for N, c0, cV, rel in counts)
    record(10, ok1 and ok2, f"free Dirac stable gap eigenvalues: {stable.size}; band counts with potential {changes} (<= 2%)")


if __name__ == "__main__":  # pragma: no cover
    import sys

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
