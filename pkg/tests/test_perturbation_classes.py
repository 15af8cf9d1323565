"""Decision procedures for the perturbation classes and the counterexample."""
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact import perturbation_classes as pc
from artifact.errors import AllZero, BadAnnulus, NotAlternatingAdmissible, ValidationError
from artifact.lattice_ops import MatrixSequence
from artifact.perturbation_classes import Verdict

H5 = 10**5


def bracket(n):
    return np.sqrt(1.0 + np.asarray(n, dtype=float) ** 2)


# ------------------------------------------------------------------ elementwise helpers
@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8))
def test_mat_norm_is_spectral_norm(xs):
    M = (np.array(xs[:4]) + 1j * np.array(xs[4:])).reshape(2, 2)
    assert pc.mat_norm(M[None])[0] == pytest.approx(np.linalg.norm(M, 2), abs=1e-9)


def test_tau_conventions():
    W = MatrixSequence.scalar(lambda n: n.astype(float))
    ns = np.array([0, 1, 5, -3])
    assert np.allclose(pc.tau(W, ns, 2, "bilateral")[:, 0, 0], [-2, -1, 3, -5])
    assert np.allclose(pc.tau(W, ns[:3], 2, "unilateral")[:, 0, 0], [0, 0, 3])
    assert np.allclose(pc.tau(W, ns, 0)[:, 1, 1], ns)


def test_q0_frozen_value():
    W = MatrixSequence.scalar(lambda n: 1.0 / bracket(n))
    # [DERIVED] scalar W: only |tau W22 - W11| = |1/<n-1> - 1/<n>| survives
    assert pc.q0_sequence(W, 5) == pytest.approx(abs(1 / math.sqrt(17) - 1 / math.sqrt(26)), abs=1e-15)
    # off-diagonal and diagonal-difference terms
    V = MatrixSequence.constant([[1.0, 2.0], [3.0j, -1.0]])
    assert pc.q0_sequence(V, 0) == pytest.approx(2 + 3 + 2 + 2)


def test_iterated_log_and_omega():
    e1 = math.e - 1
    assert pc.iterated_log(0, 7.0) == 1.0
    assert pc.iterated_log(1, e1) == pytest.approx(1.0)
    assert pc.iterated_log(2, e1) == pytest.approx(math.log(2))
    assert pc.omega_weight(pc.WeightSpec(0, 2.0), 0) == pytest.approx(math.log(2) ** 2)
    # l = 1: ln_2(<x>)^r * ln_0 * ln_1
    x = 10.0
    bx = math.sqrt(101)
    ref = math.log1p(math.log1p(bx)) ** 1.5 * math.log1p(bx)
    assert pc.omega_weight(pc.WeightSpec(1, 1.5), x) == pytest.approx(ref)
    with pytest.raises(ValidationError):
        pc.WeightSpec(-1, 1.0)


@settings(max_examples=30, deadline=None)
@given(
    m=st.lists(st.floats(0, 10), min_size=5, max_size=80),
    beta=st.floats(0.1, 2.0),
    ratio=st.floats(1.1, 4.0),
)
def test_annulus_sup_matches_brute_force(m, beta, ratio):
    m = np.array(m)
    gamma = beta * ratio
    r = np.geomspace(0.5, m.size, 17)
    got = pc._annulus_sup(m, r, beta, gamma)
    for ri, g in zip(r, got):
        idx = [n for n in range(m.size) if beta * ri < n < gamma * ri]
        assert g == (max(m[idx]) if idx else 0.0)


def test_k_difference_table():
    W = pc.make_longrange_example(pc.WeightSpec(0, 2.0), "Mk_rate", 3)
    d = pc._rate(pc.WeightSpec(0, 2.0))
    ns = np.arange(-40, 40)
    diff = W.values(ns)[:, 0, 0] - W.values(ns - 3)[:, 0, 0]
    assert np.allclose(diff, d(ns))
    assert np.allclose(W.values(np.array([-3, -2, -1]))[:, 0, 0], 0.0)


# ------------------------------------------------------------------ growth decisions
def series(terms_fn, n=10**6):
    return pc.series_verdict(terms_fn(np.arange(1, n + 1, dtype=float)))


def test_series_verdicts_synthetic():
    assert series(lambda n: n**-1.5).verdict is Verdict.MEMBER
    assert series(lambda n: 1 / n).verdict is Verdict.NONMEMBER
    assert series(lambda n: 1 / ((n + 1) * np.log(n + 1) ** 2)).verdict is Verdict.MEMBER
    assert series(lambda n: 1 / ((n + 1) * np.log(n + 1))).verdict is Verdict.NONMEMBER
    assert series(lambda n: n**-0.5).verdict is Verdict.NONMEMBER
    assert series(lambda n: np.ones_like(n)).verdict is Verdict.NONMEMBER
    assert series(lambda n: np.exp(-n)).verdict is Verdict.MEMBER


def test_harmonic_series_witness():
    v = series(lambda n: 1 / n)
    # [DERIVED] partial sums grow by ln 10 per decade
    assert v.witness["growth_per_decade"] == pytest.approx(math.log(10), rel=1e-3)


# ------------------------------------------------------------------ class fixtures
def test_kopylova_in_Q12_with_zero_rate():
    W = pc.named_sequence("kopylova")
    assert pc.class_Q(W, 1, 2).verdict is Verdict.MEMBER
    rho = pc.decay_rate_estimate(W)
    # [DERIVED] log-derivative of 1/ln<n> on [10^4, 10^6] is at most 1/ln 10^4
    assert 0 <= rho <= 1 / math.log(1e4)


def test_kopylova_in_M1_not_S():
    W = pc.named_sequence("kopylova")
    assert pc.class_M(W, 1, horizon=H5).verdict is Verdict.MEMBER
    assert pc.class_S(W, horizon=H5).verdict is Verdict.NONMEMBER


def test_decay_rate_inverse_square():
    assert pc.decay_rate_estimate(pc.named_sequence("inverse_square"), H5) == pytest.approx(2.0, abs=1e-3)
    with pytest.raises(AllZero):
        pc.decay_rate_estimate(MatrixSequence.constant(np.zeros((2, 2))), 1000)


@pytest.mark.parametrize("beta,gamma", [(1.0, 2.0), (0.5, 3.0)])
def test_omega_rate_family(beta, gamma):
    member = pc.named_sequence("omega_rate", l=0, r=2.0)
    assert pc.class_S(member, beta, gamma).verdict is Verdict.MEMBER
    slow = pc.named_sequence("omega_rate", l=0, r=0.5)
    assert pc.class_S(slow, beta, gamma).verdict is Verdict.NONMEMBER


@pytest.mark.parametrize("beta,gamma", [(1.0, 2.0), (0.5, 3.0)])
def test_harmonic_not_in_S(beta, gamma):
    v = pc.class_S(pc.named_sequence("harmonic"), beta, gamma)
    assert v.verdict is Verdict.NONMEMBER
    # [DERIVED] the annulus sup of 1/(1+n) is about 1/(beta r): ln(10)/beta per decade
    assert v.witness["growth_per_decade"] == pytest.approx(math.log(10) / beta, rel=0.05)


def test_mk_rate_in_M1_not_S():
    W = pc.named_sequence("omega_rate", l=0, r=2.0, mode="Mk_rate", k=1)
    assert pc.class_M(W, 1, horizon=H5).verdict is Verdict.MEMBER
    assert pc.class_S(W, horizon=H5).verdict is Verdict.NONMEMBER


def test_Q_power_and_oscillating():
    assert pc.class_Q(pc.named_sequence("inverse_power", s=0.5), 1, 2, H5).verdict is Verdict.MEMBER
    assert pc.class_Q(pc.named_sequence("sin_power", s=0.1), 1, 1, H5).verdict is Verdict.NONMEMBER


def test_Q0_uses_q0():
    W = MatrixSequence.scalar(lambda n: 1.0 / bracket(n))
    assert pc.class_Q(W, 0, horizon=H5).verdict is Verdict.MEMBER
    off = MatrixSequence.entry(0, 1, lambda n: 1.0 / bracket(n) ** 0.5)
    herm = MatrixSequence(lambda ns: off.fn(ns) + np.conj(np.swapaxes(off.fn(ns), -1, -2)))
    assert pc.class_Q(herm, 0, horizon=H5).verdict is Verdict.NONMEMBER


@settings(max_examples=5, deadline=None)
@given(c=st.floats(0.01, 100.0))
def test_verdicts_scale_invariant(c):
    for name, fn in (("omega", lambda W: pc.class_S(W, horizon=H5)), ("Q", lambda W: pc.class_Q(W, 1, 2, H5))):
        for W in (pc.named_sequence("omega_rate", l=0, r=2.0), pc.named_sequence("harmonic")):
            assert fn(W.scaled(c)).verdict is fn(W).verdict


def test_class_validation():
    W = pc.named_sequence("harmonic")
    with pytest.raises(BadAnnulus):
        pc.class_S(W, 2.0, 1.0, H5)
    with pytest.raises(ValidationError):
        pc.class_Q(W, 1, 3, H5)
    with pytest.raises(ValidationError):
        pc.class_Q(W, -1, 1, H5)
    with pytest.raises(ValidationError):
        pc.class_S(W, horizon=H5, lattice="ring")
    with pytest.raises(ValidationError):
        pc.class_S(W, horizon=10)
    with pytest.raises(ValidationError):
        pc.l1_difference_test(W, 0, horizon=H5)
    with pytest.raises(ValidationError):
        pc.named_sequence("nope")


def test_appendix_sanity():
    rep = pc.appendix_sanity(lambda n: 1.0 / (1.0 + n) ** 2, horizon=H5)
    assert rep["applicable"] and rep["passed"]
    rep = pc.appendix_sanity(lambda n: 1.0 / (1.0 + n), horizon=H5)
    assert not rep["applicable"]


def test_l1_difference_simple():
    W = MatrixSequence.scalar(lambda n: 1.0 / bracket(n))
    assert pc.l1_difference_test(W, 1, horizon=H5).verdict is Verdict.MEMBER
    osc = MatrixSequence.scalar(lambda n: (-1.0) ** n / (1.0 + np.abs(n)))
    assert pc.l1_difference_test(osc, 1, horizon=H5).verdict is Verdict.NONMEMBER
    # even shifts see (-1)^n cancel and become summable
    assert pc.l1_difference_test(osc, 2, horizon=H5).verdict is Verdict.MEMBER


# ------------------------------------------------------------------ counterexample
@pytest.fixture(scope="module")
def dyadic_seq():
    return pc.build_counterexample(pc.dyadic_tent_family(16), pc.harmonic)


def test_dyadic_frozen_values(dyadic_seq):
    s = dyadic_seq
    # [DERIVED] block 1 = {2, 3}, tent (0, 1), a_1 = 1/2, sign -1
    assert s.b[3] == -0.5 and s.b[2] == 0.0 and s.b[1] == 1.0
    assert (s.L1, s.L2) == (1.5, 4.5)
    assert s.limit == pytest.approx(math.log(2), abs=1e-12)


def test_dyadic_items(dyadic_seq):
    rep = pc.verify_counterexample(dyadic_seq, p_max=4)
    assert rep["i"]["passed"] and rep["iii"]["passed"]
    assert all(v["dominates_alternating_tail_sums"] for v in rep["ii"]["per_p"].values())


def test_counterexample_potential(dyadic_seq):
    V = pc.counterexample_potential(dyadic_seq).v0
    b = dyadic_seq.b
    ns = np.arange(0, 200)
    v = V.values(ns)[:, 0, 0].real
    # V(n) - V(n + 1) = -b_n
    assert np.allclose(v[:-1] - v[1:], -b[:199], atol=1e-14)
    assert v[0] == pytest.approx(-dyadic_seq.limit, abs=1e-12)
    assert np.all(V.values(np.array([-5, -1]))[:, 0, 0] == 0)
    with pytest.raises(ValidationError):
        V.values(np.array([b.size + 5]))


def test_alternating_admissibility():
    fam = pc.dyadic_tent_family(6)
    with pytest.raises(NotAlternatingAdmissible):
        pc.build_counterexample(fam, lambda n: np.asarray(n, dtype=float) + 1.0)
    with pytest.raises(NotAlternatingAdmissible):
        pc.build_counterexample(fam, lambda n: 1.0 / (np.asarray(n, dtype=float) + 1.0) ** 2)
    with pytest.raises(NotAlternatingAdmissible):
        pc.build_counterexample(fam, lambda n: 0.0 * np.asarray(n, dtype=float))


def test_alternating_tail_matches_closed_form():
    # [DERIVED] sum_{k >= 0} (-1)^k / (k + 1) = ln 2
    assert pc.alternating_tail(pc.harmonic, 0) == pytest.approx(math.log(2), abs=1e-13)
    assert pc.alternating_tail(pc.harmonic, 1) == pytest.approx(math.log(2) - 1, abs=1e-13)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), a=st.sampled_from(sorted(pc.A_FAMILIES)))
def test_random_subordinate_families(seed, a):
    fam = pc.random_subordinate_family(np.random.default_rng(seed), 14)
    seq = pc.build_counterexample(fam, pc.A_FAMILIES[a])
    rep = pc.verify_counterexample(seq, p_max=2)
    assert rep["i"]["passed"]
    assert rep["iii"]["passed"]
    assert all(v["dominates_alternating_tail_sums"] for v in rep["ii"]["per_p"].values())
    # partial sums are Cauchy with limit = the alternating sum of a
    S = np.cumsum(seq.b)
    assert abs(S[-1] - seq.limit) <= seq.a_values[-1] + 1e-12


def test_subordinate_family_validation():
    with pytest.raises(ValidationError):
        pc.SubordinateFamily((1,), (np.ones(2),))
    with pytest.raises(ValidationError):
        pc.SubordinateFamily((0, 2, 5), (np.ones(2), np.ones(3), np.ones(3)))
    with pytest.raises(ValidationError):
        pc.SubordinateFamily((0, 3), (np.ones(2), np.ones(3)))
    with pytest.raises(ValidationError):
        pc.dyadic_tent_family(0)


# ------------------------------------------------------------------ CSV
def test_csv_roundtrip_bit_identical_verdicts():
    W = pc.named_sequence("kopylova")
    h = 20000
    buf = io.StringIO()
    pc.dump_sequence_csv(W, -h, h, buf)
    buf.seek(0)
    assert buf.readline().strip() == ",".join(pc.CSV_COLUMNS)
    buf.seek(0)
    L = pc.load_sequence_csv(buf)
    ns = np.arange(-h, h + 1)
    assert np.array_equal(L.values(ns), W.values(ns))
    for fn in (lambda S: pc.class_Q(S, 1, 2, h // 2), lambda S: pc.class_M(S, 1, horizon=h // 2)):
        a, b = fn(W), fn(L)
        assert a.verdict is b.verdict and a.witness == b.witness
    with pytest.raises(ValidationError):
        L.values(np.array([h + 1]))


def test_csv_rejects_bad_input():
    with pytest.raises(ValidationError):
        pc.load_sequence_csv(io.StringIO("n,x\n0,1\n"))
    head = ",".join(pc.CSV_COLUMNS) + "\n"
    with pytest.raises(ValidationError):
        pc.load_sequence_csv(io.StringIO(head))
    row = ",0,0,0,0,0,0,0,0\n"
    with pytest.raises(ValidationError):
        pc.load_sequence_csv(io.StringIO(head + "0" + row + "2" + row))
