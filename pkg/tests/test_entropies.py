import math

import numpy as np
import pytest
from oracles import (
    binary_entropy,
    classical_dmax_smooth_grid,
    classical_hmin,
    classical_hmin_smooth_grid,
    h0_smooth_exhaustive,
)

from stateredist import entropies as en
from stateredist.tensor import (
    DensityOperator,
    LayoutError,
    PureStateVector,
    StateError,
    SystemLayout,
    basis_state,
    maximally_entangled,
    maximally_mixed,
    partial_trace,
    random_density,
    random_pure_state,
    tensor,
)
from stateredist.states import ghz


def diag_state(probs, layout):
    return DensityOperator(layout, np.diag(np.asarray(probs, dtype=float).reshape(-1)))


# -- exact quantities ---------------------------------------------------------


def test_von_neumann_examples():
    assert en.von_neumann(basis_state([("A", 3)], 1)) == pytest.approx(0.0, abs=1e-12)
    assert en.von_neumann(maximally_mixed([("A", 4)])) == pytest.approx(2.0, abs=1e-12)
    assert en.von_neumann(maximally_mixed([("A", 2)])) == pytest.approx(1.0, abs=1e-12)
    assert en.von_neumann(diag_state([0.25, 0.75], [("A", 2)])) == pytest.approx(0.811278, abs=1e-6)
    with pytest.raises(StateError):
        en.von_neumann(DensityOperator([("A", 2)], np.diag([0.2, 0.3])))


def test_conditional_entropy_examples(rng):
    assert en.conditional_entropy(maximally_entangled(2), ["B"]) == pytest.approx(-1.0, abs=1e-12)
    prod = tensor(maximally_mixed([("A", 2)]), random_density([("B", 3)], rng))
    assert en.conditional_entropy(prod, ["B"]) == pytest.approx(1.0, abs=1e-12)
    p = np.array([[0.1, 0.3], [0.4, 0.2]])  # p[a, b]
    classical = sum(p[:, b].sum() * binary_entropy(p[0, b] / p[:, b].sum()) for b in range(2))
    assert en.conditional_entropy(diag_state(p, [("A", 2), ("B", 2)]), ["B"]) == pytest.approx(classical, abs=1e-12)
    with pytest.raises(LayoutError):
        en.conditional_entropy(prod, ["Z"])


def test_cmi_examples(rng):
    lay = [("A", 2), ("B", 2), ("C", 2)]
    prod = tensor(tensor(random_density(lay[:1], rng), random_density(lay[1:2], rng)), random_density(lay[2:], rng))
    assert en.cmi(prod, (["A"], ["B"], ["C"])) == pytest.approx(0.0, abs=1e-12)
    # the classical (dephased) GHZ mixture has no conditional correlation; the pure GHZ vector has one bit
    dephased = DensityOperator(lay, np.diag(np.diag(ghz(3, 2).density().matrix)))
    assert en.cmi(dephased, (["A"], ["B"], ["C"])) == pytest.approx(0.0, abs=1e-12)
    assert en.cmi(ghz(3, 2), (["A"], ["B"], ["C"])) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(LayoutError):
        en.cmi(prod, (["A"], ["A"], ["C"]))


@pytest.mark.parametrize("seed", range(50))
def test_cmi_chain_identity_on_pure_states(seed):
    psi = random_pure_state([("A", 2), ("B", 2), ("C", 2), ("R", 8)], np.random.default_rng(seed))
    lhs = en.cmi(psi, (["A"], ["R"], ["B"]))
    rhs = en.conditional_entropy(partial_trace(psi, ["A", "B"]), ["B"]) - en.conditional_entropy(
        partial_trace(psi, ["A", "B", "R"]), ["B", "R"]
    )
    assert lhs == pytest.approx(rhs, abs=1e-9)
    assert lhs >= -1e-9


def test_rel_entropy_family(rng):
    r = random_density([("A", 3)], rng).matrix
    assert en.rel_entropy(r, r) == pytest.approx(0.0, abs=1e-10)
    assert en.rel_entropy_variance(r, r) == pytest.approx(0.0, abs=1e-10)
    for p in (0.1, 0.37, 0.5):
        assert en.rel_entropy(np.diag([p, 1 - p]), np.eye(2) / 2) == pytest.approx(1 - binary_entropy(p), abs=1e-12)
    p, q = np.array([0.2, 0.5, 0.3]), np.array([0.4, 0.4, 0.2])
    llr = np.log2(p / q)
    assert en.rel_entropy_variance(np.diag(p), np.diag(q)) == pytest.approx(np.sum(p * llr**2) - np.sum(p * llr) ** 2, abs=1e-12)
    assert en.frak_s(np.diag(p), np.diag(q)) == pytest.approx(math.sqrt(np.sum(p * llr**2) - np.sum(p * llr) ** 2), abs=1e-12)
    with pytest.raises(en.SupportError):
        en.rel_entropy(np.diag([0.5, 0.5]), np.diag([1.0, 0.0]))


def test_dmax_examples(rng):
    r = random_density([("A", 3)], rng).matrix
    assert en.dmax(r, r).value == pytest.approx(0.0, abs=1e-9)
    assert en.dmax(np.diag([1.0, 0.0]), np.eye(2) / 2).value == pytest.approx(1.0, abs=1e-12)
    s = random_density([("A", 3)], rng).matrix
    assert en.dmax(r, s).value == pytest.approx(en.dmax_sdp(r, s).value, abs=1e-6)
    assert en.dmax(r, s).value >= en.rel_entropy(r, s) - 1e-6
    bad = en.dmax(np.diag([0.5, 0.5]), np.diag([1.0, 0.0]))
    assert bad.value == math.inf and bad.status == "support_violation"


# -- min-entropy ----------------------------------------------------------------


@pytest.mark.parametrize("d", [2, 3, 4])
def test_hmin_maximally_entangled(d):
    assert en.hmin(maximally_entangled(d), ["B"]).value == pytest.approx(-math.log2(d), abs=1e-5)


@pytest.mark.parametrize("da, db", [(2, 2), (3, 2), (2, 3)])
def test_hmin_product_with_maximally_mixed(rng, da, db):
    rho = tensor(maximally_mixed([("A", da)]), random_density([("B", db)], rng))
    assert en.hmin(rho, ["B"]).value == pytest.approx(math.log2(da), abs=1e-5)


@pytest.mark.parametrize("seed", range(8))
def test_hmin_classical_exhaustive(seed):
    gen = np.random.default_rng(seed)
    p = gen.dirichlet(np.ones(6)).reshape(3, 2)
    rho = diag_state(p, [("A", 3), ("B", 2)])
    assert en.hmin(rho, ["B"]).value == pytest.approx(classical_hmin(p), abs=1e-6)


def test_hmin_smooth_at_zero_is_hmin():
    assert en.hmin_smooth(maximally_entangled(2), ["B"], 0.0).value == pytest.approx(-1.0, abs=1e-5)


@pytest.mark.parametrize("seed", range(5))
def test_hmin_smooth_above_hmin(seed):
    rho = random_density([("A", 2), ("B", 2)], np.random.default_rng(seed))
    assert en.hmin_smooth(rho, ["B"], 0.2).value >= en.hmin(rho, ["B"]).value - 1e-7


@pytest.mark.parametrize("table", [[[0.4, 0.1], [0.2, 0.3]], [[0.7, 0.05], [0.05, 0.2]], [[0.25, 0.25], [0.3, 0.2]]])
def test_hmin_smooth_classical_grid(table):
    p = np.array(table)
    rho = diag_state(p, [("A", 2), ("B", 2)])
    got = en.hmin_smooth(rho, ["B"], 0.1).value
    assert got == pytest.approx(classical_hmin_smooth_grid(p, 0.1), abs=1e-3)


def test_hmin_smooth_monotone(rng):
    rho = random_density([("A", 2), ("B", 2)], rng)
    vals = [en.hmin_smooth(rho, ["B"], e).value for e in np.arange(0.0, 0.31, 0.05)]
    assert all(b >= a - 1e-7 for a, b in zip(vals, vals[1:]))


def test_hmin_rejects_bad_eps(rng):
    rho = random_density([("A", 2), ("B", 2)], rng)
    with pytest.raises(ValueError):
        en.hmin_smooth(rho, ["B"], 1.0)


# -- smooth max-relative entropy --------------------------------------------------


def test_dmax_smooth_zero_and_monotone(rng):
    r = random_density([("A", 3)], rng).matrix
    w = random_density([("A", 3)], rng).matrix
    assert en.dmax_smooth(r, w, 0.0).value == pytest.approx(en.dmax(r, w).value, abs=1e-12)
    vals = [en.dmax_smooth(r, w, e).value for e in np.arange(0.0, 0.31, 0.05)]
    assert all(b <= a + 1e-7 for a, b in zip(vals, vals[1:]))
    assert all(math.isfinite(v) for v in vals)
    assert math.isfinite(en.dmax_smooth(r, w, 0.99).value)


@pytest.mark.parametrize("p, q", [(0.3, 0.5), (0.8, 0.4), (0.55, 0.1)])
def test_dmax_smooth_classical_grid(p, q):
    got = en.dmax_smooth(np.diag([p, 1 - p]), np.diag([q, 1 - q]), 0.1).value
    assert got == pytest.approx(classical_dmax_smooth_grid(p, q, 0.1), abs=1e-3)


def test_dmax_smooth_identical_states_is_log_of_ball_mass():
    # subnormalized rho_bar = (1 - eps^2) rho is in the ball, and no smaller multiple is
    p = np.diag([0.3, 0.7])
    assert en.dmax_smooth(p, p, 0.3).value == pytest.approx(math.log2(1 - 0.09), abs=1e-6)


# -- max-entropy by duality ---------------------------------------------------------


def test_hmax_examples():
    a = random_pure_state([("A", 2)], np.random.default_rng(1))
    bc = random_pure_state([("B", 2), ("C", 2)], np.random.default_rng(2))
    assert en.hmax_smooth(tensor(a, bc), ["A"], ["C"], ["B"], 0.0).value == pytest.approx(0.0, abs=1e-5)
    phi0 = tensor(maximally_entangled(2), basis_state([("C", 2)], 0))
    assert en.hmax_smooth(phi0, ["A"], ["C"], ["B"], 0.0).value == pytest.approx(1.0, abs=1e-5)


@pytest.mark.parametrize("seed", range(10))
def test_hmax_duality_self_consistency(seed):
    psi = random_pure_state([("A", 2), ("B", 2), ("C", 2)], np.random.default_rng(seed))
    hmax = en.hmax_smooth(psi, ["A"], ["C"], ["B"], 0.1).value
    hmin = en.hmin_smooth(partial_trace(psi, ["A", "B"]), ["B"], 0.1).value
    assert hmax + hmin == pytest.approx(0.0, abs=1e-12)


def test_hmax_rejects_mixed_and_bad_partition(rng):
    with pytest.raises(StateError):
        en.hmax_smooth(random_density([("A", 2), ("B", 2), ("C", 2)], rng), ["A"], ["C"], ["B"], 0.1)
    psi = random_pure_state([("A", 2), ("B", 2), ("C", 2)], rng)
    with pytest.raises(LayoutError):
        en.hmax_smooth(psi, ["A"], ["C"], ["A"], 0.1)


# -- Renyi-0 -----------------------------------------------------------------------


def test_h0_examples():
    pure = random_pure_state([("A", 2), ("B", 2)], np.random.default_rng(3))
    prod = tensor(basis_state([("A", 2)], 0), basis_state([("B", 2)], 1))
    for eps in (0.0, 0.3, 0.7):
        assert en.h0_smooth(prod, ["A"], eps) == 0.0
    assert en.h0(pure, ["A"]) == pytest.approx(1.0)
    assert en.h0(maximally_mixed([("A", 4)]), ["A"]) == 2.0
    assert en.h0_smooth(maximally_mixed([("A", 4)]), ["A"], 0.0) == 2.0


def test_h0_smooth_truncation_example():
    eps = math.sqrt(1 - 0.85**2)
    rho = diag_state([0.7, 0.2, 0.1], [("A", 3)])
    assert en.h0_smooth(rho, ["A"], eps) == pytest.approx(1.0)


@pytest.mark.parametrize("probs", [[0.7, 0.2, 0.1], [0.5, 0.3, 0.2], [0.9, 0.06, 0.04], [0.4, 0.35, 0.25]])
@pytest.mark.parametrize("eps", [0.1, 0.3, 0.45, 0.7])
def test_h0_smooth_matches_exhaustive(probs, eps):
    rho = diag_state(probs, [("A", 3)])
    assert en.h0_smooth(rho, ["A"], eps) == pytest.approx(h0_smooth_exhaustive(np.array(probs), eps))


# -- identities ------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_pure_state_conditional_entropy_duality(seed):
    psi = random_pure_state([("A", 2), ("B", 2), ("C", 2), ("R", 8)], np.random.default_rng(100 + seed))
    h_cr = en.conditional_entropy(partial_trace(psi, ["A", "C", "R"]), ["C", "R"])
    h_b = en.conditional_entropy(partial_trace(psi, ["A", "B"]), ["B"])
    assert h_cr == pytest.approx(-h_b, abs=1e-9)


def test_marginal_minimizes_relative_entropy(rng):
    psi = random_pure_state([("A", 2), ("B", 2), ("C", 2), ("R", 8)], rng)
    rho_ab = partial_trace(psi, ["A", "B"]).matrix
    base = en.rel_entropy(rho_ab, np.kron(np.eye(2), partial_trace(psi, ["B"]).matrix))
    for _ in range(20):
        sigma = random_density([("B", 2)], rng).matrix
        assert en.rel_entropy(rho_ab, np.kron(np.eye(2), sigma)) >= base - 1e-9
