"""Monte-Carlo simulation of coherent state merging and redistribution.

Merging (sender A, receiver holds every label outside A and the reference):
the sender applies a Haar-random unitary to A, keeps the leading factor A1
and sends the trailing ``q`` qubits A2. The receiver holds a purification
of ``sigma_{A1 R}``, so by Uhlmann's theorem the best decoder reaches
exactly ``F(sigma_{A1 R}, pi_{A1} (x) psi_R)`` against the ideal output
(maximally entangled A1 pair times the original state held by the receiver).

Redistribution follows the relay construction: A is merged into the
holder of C, the ebits this creates are swapped for pre-shared ones and
the relay decoder is undone, after which the remainder of A is merged to
Bob with the qubit budget.

Per-trial seeds come from ``np.random.SeedSequence(master).spawn(trials)``;
trial k uses the first 64-bit word of child k's state, so results do not
depend on execution order.

Trial logs are CSV with the header ``seed,q,decoupling_error,fidelity``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .tensor import (
    LayoutError,
    PureStateVector,
    StateError,
    SystemLayout,
    apply_local,
    as_density,
    basis_state,
    fidelity,
    haar_unitary,
    hermitian_eig,
    maximally_entangled,
    maximally_mixed,
    partial_trace,
    rename,
    split_subsystem,
    tensor,
    trace_distance,
)

PURITY_TOL = 1e-9
CSV_HEADER = ("seed", "q", "decoupling_error", "fidelity")


class DecoderDimensionError(ValueError):
    """Bob's output space is smaller than his input; an ancilla B' is needed."""


class InsufficientEbits(ValueError):
    pass


@dataclass(frozen=True)
class MergeTrialResult:
    qubits_sent: int
    decoupling_error: float
    achieved_fidelity: float
    seed: int | None


@dataclass(frozen=True)
class MergeSummary:
    q: int
    trials: int
    mean_fidelity: float
    min_fidelity: float
    max_fidelity: float
    success_fraction: float
    results: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class RedistributionOutcome:
    qubits_physically_sent: int
    ebits_consumed: int
    ebits_returned: int
    final_fidelity: float
    per_stage: list
    relay_ebits: int = 0
    seed: int | None = None

    @property
    def entanglement_cost(self) -> int:
        return self.ebits_consumed - self.ebits_returned


def _rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    seed = int(rng)
    return np.random.default_rng(seed), seed


def _log2_exact(d: int, what: str) -> int:
    k = int(d).bit_length() - 1
    if d < 1 or (1 << k) != d:
        raise ValueError(f"{what} must be a power of 2, got {d}")
    return k


def round_budget(bound: float, n_qubits: int) -> int:
    """Integer qubit budget for an analytic bound: ceil, clipped to ``[0, n_qubits]``.

    A budget of ``n_qubits`` is full state transfer, which always succeeds.
    """
    if math.isnan(bound):
        raise ValueError("bound is NaN")
    return int(min(max(math.ceil(bound - 1e-9), 0), n_qubits))


def trial_seeds(master: int, trials: int) -> list[int]:
    """Independent 64-bit seeds for ``trials`` trials derived from ``master``."""
    kids = np.random.SeedSequence(int(master)).spawn(int(trials))
    return [int(k.generate_state(1, dtype=np.uint64)[0]) for k in kids]


def _check_pure(psi) -> PureStateVector:
    if not isinstance(psi, PureStateVector):
        raise StateError("a pure state vector is required")
    return psi


# ---------------------------------------------------------------------------
# merging


def _scramble(psi: PureStateVector, sender: str, q: int, u: np.ndarray, kept: str, sent: str) -> PureStateVector:
    d = psi.layout.dim(sender)
    out = apply_local(psi, u, [sender])
    return split_subsystem(out, sender, [(kept, d >> q), (sent, 1 << q)])


def _decoupling(psi: PureStateVector, kept: str, reference: Sequence[str], ideal_ref) -> tuple[float, float]:
    """Trace distance and fidelity of ``sigma_{kept,ref}`` against ``pi (x) psi_ref``."""
    sigma = partial_trace(psi, [kept] + list(reference)).permute([kept] + list(reference))
    ideal = np.kron(np.eye(psi.layout.dim(kept)) / psi.layout.dim(kept), ideal_ref)
    return trace_distance(sigma.matrix, ideal), fidelity(sigma.matrix, ideal)


def merge_trial(psi, q: int, rng, sender: str = "A", reference: Sequence[str] = ("R",)) -> MergeTrialResult:
    """One Haar-random merging attempt sending ``q`` qubits of ``sender``.

    ``rng`` is a seed (recorded in the result) or a Generator. The same seed
    draws the same unitary for every q, so fidelity is monotone in q per seed.
    """
    psi = _check_pure(psi)
    reference = list(reference)
    d = psi.layout.dim(sender)
    n_qubits = _log2_exact(d, f"dimension of {sender}")
    if not 0 <= q <= n_qubits:
        raise ValueError(f"q must lie in [0, {n_qubits}], got {q}")
    gen, seed = _rng(rng)
    u = haar_unitary(d, gen)
    out = _scramble(psi, sender, q, u, "_kept", "_sent")
    psi_r = partial_trace(psi, reference).permute(reference).matrix
    err, fid = _decoupling(out, "_kept", reference, psi_r)
    return MergeTrialResult(int(q), err, fid, seed)


def merge_stats(psi, q: int, trials: int, eps: float, rng, sender: str = "A", reference: Sequence[str] = ("R",)) -> MergeSummary:
    """Fidelity statistics over ``trials`` independent unitaries; ``rng`` is the master seed."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    master = rng if not isinstance(rng, np.random.Generator) else int(rng.integers(2**63))
    results = tuple(merge_trial(psi, q, s, sender, reference) for s in trial_seeds(master, trials))
    f = np.array([r.achieved_fidelity for r in results])
    return MergeSummary(
        q=int(q),
        trials=int(trials),
        mean_fidelity=float(f.mean()),
        min_fidelity=float(f.min()),
        max_fidelity=float(f.max()),
        success_fraction=float(np.mean(f >= 1.0 - eps)),
        results=results,
    )


def write_trial_log(results: Iterable[MergeTrialResult], out=None) -> str:
    """CSV rows ``seed,q,decoupling_error,fidelity``; floats use ``repr`` so reruns are byte-identical."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in results:
        w.writerow(["" if r.seed is None else r.seed, r.qubits_sent, repr(r.decoupling_error), repr(r.achieved_fidelity)])
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", newline="") as fh:
                fh.write(text)
    return text


# ---------------------------------------------------------------------------
# Uhlmann decoder


def construct_uhlmann_decoder(psi_before, target, bob_labels: Sequence[str], bob_out_labels: Sequence[str] | None = None) -> np.ndarray:
    """Isometry V on Bob's systems maximizing ``|<target| (I (x) V) |psi_before>|``.

    Non-Bob labels must agree (names and dimensions) between the two states.
    With ``G = Phi^dag Psi`` (both reshaped as non-Bob x Bob matrices) and the
    thin SVD ``G = P S Q^dag``, ``V = conj(P) Q^T`` attains ``sum(S)``, the
    fidelity of the non-Bob marginals. V maps Bob's input (``bob_labels``
    order) to his output (``bob_out_labels`` order, default: target order).
    """
    psi_before, target = _check_pure(psi_before), _check_pure(target)
    bob_in = list(bob_labels)
    others = [lab for lab in psi_before.labels if lab not in bob_in]
    for lab in bob_in:
        psi_before.layout.index(lab)
    if bob_out_labels is None:
        bob_out = [lab for lab in target.labels if lab not in others]
    else:
        bob_out = list(bob_out_labels)
    for lab in others:
        if psi_before.layout.dim(lab) != target.layout.dim(lab):
            raise LayoutError(f"non-Bob system {lab!r} differs between the two states")
    if set(others) | set(bob_out) != set(target.labels):
        raise LayoutError("target labels must be the non-Bob labels plus Bob's outputs")
    d_other = psi_before.layout.sub(others).total_dim
    d_in = psi_before.layout.sub(bob_in).total_dim
    d_out = target.layout.sub(bob_out).total_dim
    if d_out < d_in:
        raise DecoderDimensionError(f"Bob's output dimension {d_out} is below his input dimension {d_in}; add an ancilla")
    big_psi = psi_before.permute(others + bob_in).amplitudes.reshape(d_other, d_in)
    big_phi = target.permute(others + bob_out).amplitudes.reshape(d_other, d_out)
    g = big_phi.conj().T @ big_psi
    p, _, qh = np.linalg.svd(g, full_matrices=False)
    return p.conj() @ qh.conj()


def _decode(psi: PureStateVector, v: np.ndarray, bob_in: Sequence[str], out_layout: SystemLayout) -> PureStateVector:
    return apply_local(psi, v, list(bob_in), out_layout)


# ---------------------------------------------------------------------------
# redistribution


def _compress_sender(psi: PureStateVector, label: str) -> tuple[PureStateVector, int]:
    """Restrict ``label`` to the support of its marginal, padded to a power of 2."""
    rho = partial_trace(psi, [label]).matrix
    w, v = hermitian_eig(rho)
    rank = int(np.sum(w > 1e-10 * w[-1]))
    qubits = max(0, math.ceil(math.log2(rank))) if rank > 1 else 0
    basis = v[:, ::-1][:, : 1 << qubits]
    out = apply_local(psi, basis.conj().T, [label], [(label, 1 << qubits)])
    amps = out.amplitudes / np.linalg.norm(out.amplitudes)
    return PureStateVector(out.layout, amps, check=False), qubits


def _unitary_completion(v: np.ndarray, d_junk: int) -> np.ndarray:
    """Unitary whose columns ``i * d_junk + 0`` are the columns of the isometry v."""
    n_out, n_in = v.shape
    if n_out != n_in * d_junk:
        raise ValueError("junk dimension does not complete the isometry")
    comp = sla.null_space(v.conj().T)
    full = np.zeros((n_out, n_out), dtype=complex)
    cols = np.arange(n_out).reshape(n_in, d_junk)
    full[:, cols[:, 0]] = v
    full[:, cols[:, 1:].reshape(-1)] = comp
    return full


def _norm_entry(stage: str, psi: PureStateVector, **extra) -> dict:
    nrm = float(np.linalg.norm(psi.amplitudes))
    if abs(nrm - 1.0) > PURITY_TOL:
        raise StateError(f"global purity lost at stage {stage!r}: norm {nrm:.12f}")
    return {"stage": stage, "norm": nrm, **extra}


def _ideal(psi: PureStateVector, pairs: Sequence[tuple[str, str, int]], zeros: Sequence[tuple[str, int]], mapping: dict) -> PureStateVector:
    """psi (relabelled) times maximally entangled pairs times |0> registers."""
    state = rename(psi, mapping)
    for a, b, d in pairs:
        state = tensor(state, maximally_entangled(d, (a, b)))
    for lab, d in zeros:
        state = tensor(state, basis_state([(lab, d)], 0))
    return state


def redistribute(psi, q_budget: int, initial_ebits: int, eps: float, rng, relay_ebits: int | None = None) -> RedistributionOutcome:
    """Simulate relay-assisted redistribution of A from the sender (holding A, C) to Bob (holding B).

    Step 1 merges A into the holder of C, leaving ``e`` ebits between A1
    and C1. Step 2 swaps C1 for the holder's half of ``e`` pre-shared ebits
    with Bob and applies the inverse of the relay decoder (completed to a
    unitary with a junk register J). Step 3 merges the rest of A to Bob
    with ``q_budget`` qubits. ``e`` is the largest value not above
    ``initial_ebits`` whose step-1 fidelity is at least ``1 - eps/2``,
    unless ``relay_ebits`` fixes it.
    """
    psi = _check_pure(psi)
    if sorted(psi.labels) != ["A", "B", "C", "R"]:
        raise LayoutError(f"redistribute expects labels A, B, C, R; got {list(psi.labels)}")
    for lab in ("A", "B", "C"):
        _log2_exact(psi.layout.dim(lab), f"dimension of {lab}")
    if initial_ebits < 0 or q_budget < 0:
        raise ValueError("q_budget and initial_ebits must be non-negative")
    gen, seed = _rng(rng)
    psi = psi.permute(["A", "B", "C", "R"])
    work, a = _compress_sender(psi, "A")
    d_a, d_b, d_c = 1 << a, psi.layout.dim("B"), psi.layout.dim("C")
    stages = [_norm_entry("input", work, sender_qubits=a)]

    u1 = haar_unitary(d_a, gen)
    u2_seed = int(gen.integers(2**63))
    psi_br = partial_trace(work, ["B", "R"]).matrix

    def step1_fidelity(e):
        out = _scramble(work, "A", a - e, u1, "A1", "A2")
        return _decoupling(out, "A1", ["B", "R"], psi_br)[1]

    if relay_ebits is None:
        e = 0
        for cand in range(min(initial_ebits, a), 0, -1):
            if step1_fidelity(cand) >= 1.0 - eps / 2.0:
                e = cand
                break
    else:
        e = int(relay_ebits)
        if e > initial_ebits:
            raise InsufficientEbits(f"relay needs {e} ebits but only {initial_ebits} are pre-shared")
        if not 0 <= e <= a:
            raise ValueError(f"relay_ebits must lie in [0, {a}]")
    q1 = a - e

    # step 1: merge A into the holder of C
    st = _scramble(work, "A", q1, u1, "A1", "A2")
    ideal1 = _ideal(work, [("A1", "C1", 1 << e)], [], {"A": "SA", "C": "SC"})
    v1 = construct_uhlmann_decoder(st, ideal1, ["A2", "C"], ["C1", "SA", "SC"])
    out1 = SystemLayout([("C1", 1 << e), ("SA", d_a), ("SC", d_c)])
    st = _decode(st, v1, ["A2", "C"], out1)
    f1 = fidelity(st, ideal1.permute(list(st.labels)))
    stages.append(_norm_entry("relay_merge", st, relay_ebits=e, qubits_to_relay=q1, fidelity=f1))

    # step 2: repackaging; C1 is set aside, C0 (entangled with Bob's B0) takes its place
    st = tensor(st, maximally_entangled(1 << e, ("C0", "B0")))
    d_junk = 1 << (2 * e)
    v1_full = _unitary_completion(v1, d_junk)
    back = SystemLayout([("A2", 1 << q1), ("C", d_c), ("J", d_junk)])
    st = apply_local(st, v1_full.conj().T, ["C0", "SA", "SC"], back)
    stages.append(_norm_entry("repackage", st, ebits_swapped=e))

    # step 3: merge A2 to Bob with the qubit budget
    sent = min(int(q_budget), q1)
    u2 = haar_unitary(1 << q1, np.random.default_rng(u2_seed))
    st = _scramble(st, "A2", sent, u2, "K", "T")
    m_qubits = q1 - sent
    ideal = _ideal(
        work,
        [("A1", "C1", 1 << e), ("K", "B1", 1 << m_qubits)],
        [("J", d_junk)],
        {"A": "Ahat"},
    )
    bob_in = ["B", "B0", "T"]
    bob_out = ["B", "Ahat", "B1"]
    v3 = construct_uhlmann_decoder(st, ideal, bob_in, bob_out)
    out3 = SystemLayout([("B", d_b), ("Ahat", d_a), ("B1", 1 << m_qubits)])
    st = _decode(st, v3, bob_in, out3)
    ideal = ideal.permute(list(st.labels))
    global_fid = fidelity(st, ideal)
    # fidelity with Phi^m (x) psi on the systems that the cost criterion refers to
    keep = ["K", "B1", "Ahat", "B", "C", "R"]
    final_fid = fidelity(partial_trace(st, keep).permute(keep).matrix, partial_trace(ideal, keep).permute(keep).matrix)
    stages.append(_norm_entry("merge_to_bob", st, qubits_sent=sent, ebits_generated=m_qubits, global_fidelity=global_fid))

    return RedistributionOutcome(
        qubits_physically_sent=sent,
        ebits_consumed=int(initial_ebits),
        ebits_returned=int(initial_ebits - e + m_qubits),
        final_fidelity=final_fid,
        per_stage=stages,
        relay_ebits=e,
        seed=seed,
    )
