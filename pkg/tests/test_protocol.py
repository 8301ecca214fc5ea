import math

import numpy as np
import pytest

from stateredist import protocol as pr
from stateredist.asymptotics import thm1_cost
from stateredist.states import bundled_example, to_pure
from stateredist.tensor import (
    LayoutError,
    PureStateVector,
    SystemLayout,
    apply_local,
    fidelity,
    haar_unitary,
    maximally_entangled,
    partial_trace,
    random_pure_state,
    tensor,
)

ABR = SystemLayout([("A", 4), ("B", 2), ("R", 4)])


def pure_a_times(rest, seed=0):
    gen = np.random.default_rng(seed)
    return tensor(random_pure_state([("A", 4)], gen), random_pure_state(rest, gen))


# -- merging ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_full_transfer_is_perfect(seed):
    psi = random_pure_state(ABR, np.random.default_rng(seed))
    res = pr.merge_trial(psi, 2, seed)
    assert res.achieved_fidelity >= 1 - 1e-9
    assert res.qubits_sent == 2 and res.seed == seed


@pytest.mark.parametrize("seed", range(5))
def test_pure_uncorrelated_a_kept_whole(seed):
    # sigma_{A1 R} is product but A1 is pure, so the overlap with pi_{A1} (x) psi_R is 1/sqrt(d_A)
    res = pr.merge_trial(pure_a_times([("B", 2), ("R", 2)], seed), 0, seed)
    assert res.achieved_fidelity == pytest.approx(0.5, abs=1e-9)
    assert res.decoupling_error == pytest.approx(0.75, abs=1e-9)


def test_trivial_sender_merges_for_free():
    gen = np.random.default_rng(0)
    psi = tensor(random_pure_state([("A", 1)], gen), random_pure_state([("B", 2), ("R", 2)], gen))
    assert pr.merge_trial(psi, 0, 3).achieved_fidelity == pytest.approx(1.0, abs=1e-9)


def test_bell_pair_with_reference_cannot_merge_for_free():
    psi = tensor(maximally_entangled(2, ("A", "R")), random_pure_state([("B", 2)], np.random.default_rng(0)))
    summary = pr.merge_stats(psi, 0, 1000, 0.1, 2024)
    # sigma_AR stays the Bell state whatever U is; F(Phi, I/4) = 1/2
    assert summary.mean_fidelity == pytest.approx(0.5, abs=1e-9)
    assert summary.success_fraction == 0.0


def test_merge_argument_checks():
    psi = random_pure_state([("A", 3), ("B", 2), ("R", 3)], np.random.default_rng(0))
    with pytest.raises(ValueError, match="power of 2"):
        pr.merge_trial(psi, 0, 1)
    with pytest.raises(ValueError, match="q must lie"):
        pr.merge_trial(random_pure_state(ABR, np.random.default_rng(0)), 3, 1)


def test_merge_stats_contract():
    psi = random_pure_state(ABR, np.random.default_rng(3))
    full = pr.merge_stats(psi, 2, 20, 0.1, 5)
    assert full.success_fraction == 1.0
    fracs = [pr.merge_stats(psi, q, 50, 0.2, 5).success_fraction for q in range(3)]
    assert all(b >= a for a, b in zip(fracs, fracs[1:]))
    a = pr.merge_stats(psi, 1, 30, 0.1, 77)
    b = pr.merge_stats(psi, 1, 30, 0.1, 77)
    assert a.mean_fidelity == b.mean_fidelity and a.results == b.results
    with pytest.raises(ValueError):
        pr.merge_stats(psi, 1, 0, 0.1, 77)


def test_per_seed_monotone_in_q():
    psi = random_pure_state(ABR, np.random.default_rng(4))
    seeds = pr.trial_seeds(99, 100)
    mono = 0
    for s in seeds:
        f = [pr.merge_trial(psi, q, s).achieved_fidelity for q in range(3)]
        mono += all(y >= x - 1e-12 for x, y in zip(f, f[1:]))
    assert mono >= 90


def test_fuchs_van_de_graaf_per_trial():
    psi = random_pure_state(ABR, np.random.default_rng(6))
    for q in range(3):
        for r in pr.merge_stats(psi, q, 30, 0.1, 6).results:
            assert r.achieved_fidelity >= 1 - r.decoupling_error - 1e-9
            assert 0.0 <= r.achieved_fidelity <= 1.0 + 1e-12


def test_trial_seeds_independent_of_count():
    assert pr.trial_seeds(7, 5) == pr.trial_seeds(7, 10)[:5]
    assert len(set(pr.trial_seeds(7, 100))) == 100


def test_trial_log_format(tmp_path):
    psi = random_pure_state(ABR, np.random.default_rng(1))
    res = pr.merge_stats(psi, 1, 3, 0.1, 11).results
    text = pr.write_trial_log(res, tmp_path / "log.csv")
    lines = text.splitlines()
    assert lines[0] == "seed,q,decoupling_error,fidelity"
    assert len(lines) == 4
    seed, q, err, fid = lines[1].split(",")
    assert int(seed) == res[0].seed and int(q) == 1
    assert float(fid) == res[0].achieved_fidelity
    assert (tmp_path / "log.csv").read_text() == text


# -- Uhlmann decoder -----------------------------------------------------------------


def test_decoder_identical_states():
    psi = random_pure_state([("A", 2), ("B", 4)], np.random.default_rng(0))
    v = pr.construct_uhlmann_decoder(psi, psi, ["B"])
    out = apply_local(psi, v, ["B"])
    assert fidelity(out, psi) == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-10)


def test_decoder_undoes_bob_unitary():
    gen = np.random.default_rng(1)
    psi = random_pure_state([("A", 2), ("R", 2), ("B", 4)], gen)
    moved = apply_local(psi, haar_unitary(4, gen), ["B"])
    v = pr.construct_uhlmann_decoder(moved, psi, ["B"])
    assert fidelity(apply_local(moved, v, ["B"]), psi) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_decoder_attains_marginal_fidelity(seed):
    gen = np.random.default_rng(seed)
    psi = random_pure_state([("A", 2), ("R", 2), ("B", 4)], gen)
    noise = random_pure_state(psi.layout, gen).amplitudes
    # perturb until the marginals are roughly 0.1 apart in trace distance
    phi_vec = psi.amplitudes + 0.12 * noise
    phi = PureStateVector(psi.layout, phi_vec / np.linalg.norm(phi_vec))
    v = pr.construct_uhlmann_decoder(psi, phi, ["B"])
    out = apply_local(psi, v, ["B"])
    marginal = fidelity(partial_trace(psi, ["A", "R"]), partial_trace(phi, ["A", "R"]))
    assert fidelity(out, phi) == pytest.approx(marginal, abs=1e-6)


def test_decoder_dimension_shortfall():
    psi = random_pure_state([("A", 2), ("B", 4)], np.random.default_rng(2))
    target = random_pure_state([("A", 2), ("B2", 2)], np.random.default_rng(3))
    with pytest.raises(pr.DecoderDimensionError):
        pr.construct_uhlmann_decoder(psi, target, ["B"])
    with pytest.raises(LayoutError):
        pr.construct_uhlmann_decoder(psi, random_pure_state([("A", 4), ("B", 2)], np.random.default_rng(3)), ["B"])


# -- redistribution ----------------------------------------------------------------


ABCR = SystemLayout([("A", 2), ("B", 2), ("C", 2), ("R", 8)])


def test_redistribute_uncorrelated_pure_a():
    gen = np.random.default_rng(0)
    psi = tensor(random_pure_state([("A", 2)], gen), random_pure_state([("B", 2), ("C", 2), ("R", 2)], gen))
    out = pr.redistribute(psi, 0, 0, 0.1, 3)
    assert out.final_fidelity == pytest.approx(1.0, abs=1e-9)
    assert out.qubits_physically_sent == 0


@pytest.mark.parametrize("seed", range(4))
def test_redistribute_full_transfer(seed):
    psi = random_pure_state(ABCR, np.random.default_rng(seed))
    out = pr.redistribute(psi, 1, 0, 0.1, seed)
    assert out.final_fidelity >= 1 - 1e-9
    assert out.entanglement_cost == out.ebits_consumed - out.ebits_returned


@pytest.mark.parametrize("seed", range(4))
def test_redistribute_purity_and_accounting(seed):
    psi = random_pure_state(ABCR, np.random.default_rng(10 + seed))
    for q_budget, ebits in ((0, 0), (0, 1), (1, 1)):
        out = pr.redistribute(psi, q_budget, ebits, 0.2, seed)
        assert all(abs(st["norm"] - 1) <= 1e-9 for st in out.per_stage)
        assert [st["stage"] for st in out.per_stage] == ["input", "relay_merge", "repackage", "merge_to_bob"]
        assert 0.0 <= out.final_fidelity <= 1.0 + 1e-12
        # every ebit handed out is either spent in the relay or still present at the end
        m = out.per_stage[-1]["ebits_generated"]
        assert out.ebits_returned == ebits - out.relay_ebits + m
        assert out.relay_ebits <= ebits


def test_redistribute_relay_state_uses_no_qubits():
    """A maximally entangled with C and B, R uncorrelated: the relay pays one ebit and nothing is sent."""
    gen = np.random.default_rng(0)
    psi = tensor(maximally_entangled(2, ("A", "C")), random_pure_state([("B", 2), ("R", 2)], gen))
    out = pr.redistribute(psi, 0, 1, 0.1, 5)
    assert out.relay_ebits == 1
    assert out.qubits_physically_sent == 0
    assert out.final_fidelity == pytest.approx(1.0, abs=1e-9)
    assert out.entanglement_cost == 1


def test_redistribute_errors():
    psi = random_pure_state(ABCR, np.random.default_rng(0))
    with pytest.raises(pr.InsufficientEbits):
        pr.redistribute(psi, 0, 0, 0.1, 1, relay_ebits=1)
    with pytest.raises(ValueError):
        pr.redistribute(psi, -1, 0, 0.1, 1)
    bad = random_pure_state([("A", 3), ("B", 2), ("C", 2), ("R", 2)], np.random.default_rng(0))
    with pytest.raises(ValueError, match="power of 2"):
        pr.redistribute(bad, 0, 0, 0.1, 1)
    with pytest.raises(LayoutError):
        pr.redistribute(random_pure_state([("A", 2), ("B", 2), ("X", 2)], np.random.default_rng(0)), 0, 0, 0.1, 1)


def test_redistribute_deterministic():
    psi = random_pure_state(ABCR, np.random.default_rng(8))
    a = pr.redistribute(psi, 0, 1, 0.2, 42)
    b = pr.redistribute(psi, 0, 1, 0.2, 42)
    assert a.final_fidelity == b.final_fidelity and a.per_stage == b.per_stage


def test_relay_budget_not_above_direct_budget_on_ghz():
    psi = to_pure(bundled_example())
    rep = thm1_cost(psi, 0.3)
    n_qubits = 1
    relay = pr.round_budget(rep.one_shot_cost, n_qubits)
    direct = pr.round_budget(rep.delta_q, n_qubits)
    assert relay <= direct
    out = pr.redistribute(psi, relay, 0, 0.3, 7)
    assert out.final_fidelity >= 1 - 0.3


@pytest.mark.parametrize("bound, expected", [(-2.0, 0), (0.0, 0), (0.2, 1), (1.0, 1), (1.0 + 1e-12, 1), (2.5, 2), (13.7, 2)])
def test_round_budget(bound, expected):
    assert pr.round_budget(bound, 2) == expected
