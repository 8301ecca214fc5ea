"""Entropic functionals in bits.

Exact quantities (von Neumann entropy, conditional entropy, conditional
mutual information, relative entropy and its variance) are computed from
eigendecompositions. One-shot quantities (min-entropy, max-relative
entropy and their smoothed versions) are semidefinite programs.

Smoothing is over the fidelity ball of subnormalized states
``{rho_bar : F(rho_bar, rho)^2 >= 1 - eps^2, Tr rho_bar <= 1}``. The
fidelity bound enters the SDPs through the block ``[[I_r, Z], [Z^dag,
rho_bar]] >= 0`` together with ``Re Tr(W Z) >= sqrt(1 - eps^2)``, where
``rho = W W^dag`` is a rank-r factorization of the centre. This is the
usual Uhlmann characterization ``F = max Re Tr X`` over
``[[rho, X], [X^dag, rho_bar]] >= 0`` with ``X = W Z``; factoring out W
keeps the block strictly feasible when ``rho`` is rank deficient. The
block is further recentred and rescaled by eps (see :func:`_add_ball`)
so that small balls stay well conditioned.

Before any SDP is built, both sides of a bipartite operator are
compressed onto the supports of their marginals. Min-entropy and its
smoothed version are invariant under local isometries, so this is
exact, and it keeps problem sizes small (a pure 4-party state with
dimensions 2, 2, 2, 8 gives SDPs on at most 8 dimensions).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import sdp
from .tensor import (
    DensityOperator,
    PureStateVector,
    StateError,
    LayoutError,
    as_density,
    hermitian_eig,
    partial_trace,
    support_basis,
    RANK_TOL,
)

SUPPORT_TOL = 1e-10


class SupportError(ValueError):
    """supp(rho) is not contained in supp(sigma)."""


@dataclass(frozen=True)
class EntropyResult:
    value: float
    solver_status: dict | None = None
    epsilon_used: float = 0.0
    status: str = "ok"

    def __float__(self):
        return float(self.value)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


# ---------------------------------------------------------------------------
# exact quantities


def _spectrum(m: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))


def _shannon_bits(p: np.ndarray) -> float:
    p = p[p > 1e-15]
    return float(-np.sum(p * np.log2(p)))


def _matrix(x) -> np.ndarray:
    if isinstance(x, (DensityOperator, PureStateVector)):
        return as_density(x).matrix
    return np.asarray(x, dtype=complex)


def von_neumann(rho) -> float:
    """``-Tr rho log2 rho`` for a normalized state."""
    rho = as_density(rho)
    if not rho.is_normalized:
        raise StateError("von Neumann entropy requires a normalized state")
    return _shannon_bits(_spectrum(rho.matrix))


def _entropy_of(rho: DensityOperator, labels: Iterable[str]) -> float:
    labels = list(labels)
    if not labels:
        return 0.0
    return _shannon_bits(_spectrum(partial_trace(rho, labels).matrix))


def conditional_entropy(rho, cond: Iterable[str]) -> float:
    """``H(A|B) = H(AB) - H(B)`` where B is ``cond`` and A is every other label."""
    rho = as_density(rho)
    cond = list(cond)
    for lab in cond:
        rho.layout.index(lab)
    return _entropy_of(rho, rho.labels) - _entropy_of(rho, cond)


def cmi(rho, partition: Sequence[Iterable[str]]) -> float:
    """``I(A;B|C) = H(AC) + H(BC) - H(C) - H(ABC)`` for ``partition = (A, B, C)``.

    Labels of ``rho`` outside the partition are traced out.
    """
    rho = as_density(rho)
    a, b, c = (list(g) for g in partition)
    groups = a + b + c
    if len(set(groups)) != len(groups):
        raise LayoutError("partition groups must be disjoint")
    for lab in groups:
        rho.layout.index(lab)
    if not a or not b:
        raise LayoutError("partition groups A and B must be non-empty")
    return (
        _entropy_of(rho, a + c)
        + _entropy_of(rho, b + c)
        - _entropy_of(rho, c)
        - _entropy_of(rho, a + b + c)
    )


def _check_support(rho: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Support projector of sigma; raises if rho leaks outside it."""
    v = support_basis(sigma, SUPPORT_TOL)
    proj = v @ v.conj().T
    leak = float(np.real(np.trace(rho - proj @ rho @ proj)))
    if leak > SUPPORT_TOL * max(1.0, float(np.real(np.trace(rho)))):
        raise SupportError(f"supp(rho) not contained in supp(sigma): leaked weight {leak:.3e}")
    return v


def _log_ratio_terms(rho: np.ndarray, sigma: np.ndarray):
    """Returns (Tr rho log rho - Tr rho log sigma, Tr rho (log rho - log sigma)^2)."""
    _check_support(rho, sigma)
    wr, vr = hermitian_eig(rho)
    ws, vs = hermitian_eig(sigma)
    top_r = max(wr[-1], 0.0)
    top_s = max(ws[-1], 0.0)
    keep_r = wr > RANK_TOL * top_r
    keep_s = ws > RANK_TOL * top_s
    log_r = np.zeros_like(wr)
    log_r[keep_r] = np.log2(wr[keep_r])
    log_s = np.zeros_like(ws)
    log_s[keep_s] = np.log2(ws[keep_s])
    L = (vr * log_r) @ vr.conj().T - (vs * log_s) @ vs.conj().T
    sqrt_r = (vr[:, keep_r] * np.sqrt(wr[keep_r])) @ vr[:, keep_r].conj().T
    first = float(np.real(np.trace(rho @ L)))
    k = L @ sqrt_r
    second = float(np.real(np.sum(np.abs(k) ** 2)))
    return first, second


def rel_entropy(rho, sigma) -> float:
    """``D(rho||sigma) = Tr rho (log rho - log sigma)``; sigma may be any PSD operator."""
    d, _ = _log_ratio_terms(_matrix(rho), _matrix(sigma))
    return d


def rel_entropy_variance(rho, sigma) -> float:
    """``V(rho||sigma) = Tr rho (log rho - log sigma)^2 - D(rho||sigma)^2``."""
    d, m2 = _log_ratio_terms(_matrix(rho), _matrix(sigma))
    return m2 - d * d


def frak_s(rho, sigma) -> float:
    """Square root of the information variance (negative round-off clipped to 0)."""
    return math.sqrt(max(rel_entropy_variance(rho, sigma), 0.0))


# ---------------------------------------------------------------------------
# max-relative entropy


def dmax(rho, omega) -> EntropyResult:
    """``log2 lambda_max(omega^{-1/2} rho omega^{-1/2})`` on the support of omega.

    A support violation returns ``value=inf`` with ``status="support_violation"``.
    """
    r, w = _matrix(rho), _matrix(omega)
    try:
        v = _check_support(r, w)
    except SupportError:
        return EntropyResult(math.inf, None, 0.0, "support_violation")
    wo = v.conj().T @ w @ v
    ro = v.conj().T @ r @ v
    ev, evec = hermitian_eig(wo)
    inv_sqrt = (evec / np.sqrt(ev)) @ evec.conj().T
    lam = _spectrum(inv_sqrt @ ro @ inv_sqrt)[-1]
    if lam <= 0:
        return EntropyResult(-math.inf, None, 0.0, "zero_operator")
    return EntropyResult(math.log2(lam))


def dmax_sdp(rho, omega, tol: float = sdp.DEFAULT_TOL) -> EntropyResult:
    """Epigraph SDP ``min mu s.t. mu * omega >= rho``; an independent route to :func:`dmax`."""
    r, w = _matrix(rho), _matrix(omega)
    try:
        v = _check_support(r, w)
    except SupportError:
        return EntropyResult(math.inf, None, 0.0, "support_violation")
    ro = v.conj().T @ r @ v
    wo = v.conj().T @ w @ v
    d = ro.shape[0]
    p = sdp.SdpProblem("minimize")
    p.add_block("mu", 1)
    p.add_block("S", d)
    p.set_objective({"mu": np.eye(1)})
    p.add_matrix_equality([("S", sdp.adj_identity()), ("mu", sdp.adj_scalar_times(wo, -1.0))], -ro)
    sol = sdp.solve(p, tol=tol)
    if not sol.optimal:
        raise sdp.SolverFailure(sol, "dmax")
    return EntropyResult(math.log2(sol.primal_value), sol.summary())


# ---------------------------------------------------------------------------
# min-entropy


def _split(rho, cond: Iterable[str]):
    """Reorder to (A..., B...) and return (matrix, dA, dB)."""
    rho = as_density(rho)
    cond = set(cond)
    missing = cond - set(rho.labels)
    if missing:
        raise LayoutError(f"unknown conditioning labels {sorted(missing)}")
    cond = [lab for lab in rho.labels if lab in cond]
    target = [lab for lab in rho.labels if lab not in cond]
    if not target:
        raise LayoutError("no target system left after conditioning")
    ordered = rho.permute(target + cond)
    da = int(np.prod([rho.layout.dim(l) for l in target]))
    db = int(np.prod([rho.layout.dim(l) for l in cond])) if cond else 1
    return ordered.matrix, da, db


def _check_labels(rho, cond):
    rho = as_density(rho)
    for lab in cond:
        rho.layout.index(lab)
    return rho


def compress_bipartite(m: np.ndarray, da: int, db: int):
    """Restrict both factors of an operator on A (x) B to the supports of its marginals."""
    t = m.reshape(da, db, da, db)
    ma = np.einsum("aibi->ab", t)
    mb = np.einsum("aiaj->ij", t)
    va = support_basis(ma, RANK_TOL)
    vb = support_basis(mb, RANK_TOL)
    v = np.kron(va, vb)
    return v.conj().T @ m @ v, va.shape[1], vb.shape[1]


def _factor(m: np.ndarray):
    """W with m = W W^dag, keeping eigenvalues above the rank threshold."""
    w, v = hermitian_eig(m)
    top = max(w[-1], 0.0)
    keep = w > RANK_TOL * top
    return v[:, keep] * np.sqrt(w[keep])


def _add_ball(p: sdp.SdpProblem, rho: np.ndarray, eps: float):
    """Add the smoothing ball around ``rho`` (eps > 0) to ``p``.

    With ``rho = W W^dag`` (W is d x r) the Uhlmann block is
    ``[[I, Z], [Z^dag, rho_bar]] >= 0`` with ``Re Tr(W Z) >= sqrt(1 - eps^2)``.
    Near the centre the Schur complement ``rho_bar - Z^dag Z`` is O(eps^2),
    which stalls interior point iterations for small eps. We therefore
    substitute ``Z = W^dag + eps D`` and ``rho_bar = rho + eps (W D + D^dag W^dag) + eps^2 L``,
    an exact change of variables under which the block becomes
    ``N = [[I, D], [D^dag, L]] >= 0`` with O(1) entries.

    Returns ``(adjoint, offset)`` such that ``rho_bar = offset + A(N)`` and
    ``adjoint`` is the adjoint of ``A`` for :meth:`SdpProblem.add_matrix_equality`.
    """
    d = rho.shape[0]
    W = _factor(rho)
    r = W.shape[1]
    n = r + d
    centre = W @ W.conj().T
    t0 = float(np.real(np.trace(centre)))
    p.add_block("M", n)
    p.add_block("s_tr", 1)
    p.add_block("s_fid", 1)
    p.add_matrix_equality([("M", sdp.adj_principal(n, 0, r))], np.eye(r))
    # Re Tr(W D), written on the block
    wd = np.zeros((n, n), dtype=complex)
    wd[:r, r:] = 0.5 * W.conj().T
    wd[r:, :r] = 0.5 * W
    lower = np.zeros((n, n), dtype=complex)
    lower[r:, r:] = np.eye(d)
    # Tr rho_bar <= 1, divided by eps
    p.add_constraint({"M": 2.0 * wd + eps * lower, "s_tr": np.eye(1)}, "==", (1.0 - t0) / eps)
    # Re Tr(W Z) >= sqrt(1 - eps^2), i.e. Re Tr(W D) >= (sqrt(1 - eps^2) - t0) / eps
    shortfall = eps * eps / (1.0 + math.sqrt(1.0 - eps * eps))  # 1 - sqrt(1 - eps^2) without cancellation
    p.add_constraint({"M": wd, "s_fid": -np.eye(1)}, "==", ((1.0 - t0) - shortfall) / eps)

    def adjoint(e):
        out = np.zeros((n, n), dtype=e.dtype)
        g = eps * (e @ W)
        out[r:, :r] = g
        out[:r, r:] = g.conj().T
        out[r:, r:] = eps * eps * e
        return out

    def rho_bar(block):
        dd = block[:r, r:]
        return centre + eps * (W @ dd + dd.conj().T @ W.conj().T) + eps * eps * block[r:, r:]

    return adjoint, centre, rho_bar


def _hmin_sdp(m: np.ndarray, da: int, db: int, eps: float, tol: float) -> sdp.SdpSolution:
    d = da * db
    p = sdp.SdpProblem("minimize")
    p.add_block("Y", db)
    p.add_block("S", d)
    p.set_objective({"Y": np.eye(db)})
    if eps == 0.0:
        # S = I (x) Y - rho
        p.add_matrix_equality([("S", sdp.adj_identity()), ("Y", sdp.adj_kron_identity(da, db, -1.0))], -m)
    else:
        adjoint, centre, _ = _add_ball(p, m, eps)
        # S = I (x) Y - rho_bar
        p.add_matrix_equality(
            [("S", sdp.adj_identity()), ("Y", sdp.adj_kron_identity(da, db, -1.0)), ("M", adjoint)],
            -centre,
        )
    return sdp.solve(p, tol=tol)


def hmin(rho, cond_labels: Iterable[str], tol: float = sdp.DEFAULT_TOL) -> EntropyResult:
    """Conditional min-entropy ``H_min(A|B)`` with B = ``cond_labels``.

    Solved as ``-log2 min{Tr Y_B : I_A (x) Y_B >= rho_AB, Y_B >= 0}``.
    """
    return hmin_smooth(rho, cond_labels, 0.0, tol=tol)


def hmin_smooth(rho, cond_labels: Iterable[str], eps: float, tol: float = sdp.DEFAULT_TOL) -> EntropyResult:
    """Smooth conditional min-entropy ``max over the eps-ball of H_min(A|B)``.

    ``eps = 0`` is the unsmoothed quantity: the ball then contains ``rho``
    alone, so no smoothing variables are introduced.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    rho = _check_labels(rho, cond_labels)
    m, da, db = _split(rho, cond_labels)
    mc, da_c, db_c = compress_bipartite(m, da, db)
    sol = _hmin_sdp(mc, da_c, db_c, eps, tol)
    if not sol.optimal:
        raise sdp.SolverFailure(sol, "min-entropy")
    return EntropyResult(-math.log2(sol.primal_value), sol.summary(), eps)


def dmax_smooth(rho, omega, eps: float, tol: float = sdp.DEFAULT_TOL) -> EntropyResult:
    """``min over the eps-ball of D_max(rho_bar||omega)``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if eps == 0.0:
        return dmax(rho, omega)
    r, w = _matrix(rho), _matrix(omega)
    v = support_basis(w, SUPPORT_TOL)
    ro = v.conj().T @ r @ v
    wo = v.conj().T @ w @ v
    d = ro.shape[0]
    p = sdp.SdpProblem("minimize")
    p.add_block("mu", 1)
    p.add_block("S", d)
    p.set_objective({"mu": np.eye(1)})
    adjoint, centre, _ = _add_ball(p, ro, eps)
    p.add_matrix_equality(
        [("S", sdp.adj_identity()), ("mu", sdp.adj_scalar_times(wo, -1.0)), ("M", adjoint)],
        -centre,
    )
    sol = sdp.solve(p, tol=tol)
    if sol.status == "infeasible":
        # omega's support carries too little of rho for any rho_bar in the ball
        return EntropyResult(math.inf, sol.summary(), eps, "support_violation")
    if not sol.optimal:
        raise sdp.SolverFailure(sol, "smooth max-relative entropy")
    return EntropyResult(math.log2(sol.primal_value), sol.summary(), eps)


def _is_pure(psi) -> bool:
    if isinstance(psi, PureStateVector):
        return True
    w = _spectrum(as_density(psi).matrix)
    return bool(w[-1] > 1 - 1e-9)


def hmax_smooth(psi: PureStateVector, target: Iterable[str], cond: Iterable[str], complement: Iterable[str], eps: float, tol: float = sdp.DEFAULT_TOL) -> EntropyResult:
    """Smooth max-entropy ``H_max(A|C)`` of a pure state on A, B, C by duality.

    Returns ``-H_min^eps(A|B)`` evaluated on the marginal of ``psi`` on
    ``target + complement``.
    """
    if not _is_pure(psi):
        raise StateError("hmax_smooth requires a pure state")
    target, cond, complement = list(target), list(cond), list(complement)
    labels = set(target) | set(cond) | set(complement)
    if labels != set(psi.labels) or len(labels) != len(target) + len(cond) + len(complement):
        raise LayoutError("target, cond and complement must partition the labels of psi")
    marg = partial_trace(psi, target + complement)
    res = hmin_smooth(marg, complement, eps, tol=tol)
    return EntropyResult(-res.value, res.solver_status, eps)


# ---------------------------------------------------------------------------
# Renyi-0


def _marginal_spectrum(rho, target: Iterable[str]) -> np.ndarray:
    rho = as_density(rho)
    marg = partial_trace(rho, list(target))
    return np.sort(np.clip(_spectrum(marg.matrix), 0.0, None))[::-1]


def h0(rho, target: Iterable[str]) -> float:
    """``log2 rank(rho_A)`` with relative rank threshold 1e-10."""
    w = _marginal_spectrum(rho, target)
    if w[0] <= 0:
        raise StateError("zero operator has no rank")
    return math.log2(int(np.sum(w > RANK_TOL * w[0])))


def h0_smooth(rho, target: Iterable[str], eps: float) -> float:
    """Smooth Renyi-0 entropy of the marginal ``rho_A``.

    The smallest rank compatible with the ball is the least r whose top-r
    eigenvalue mass reaches ``1 - eps^2``: any rank-r rho_bar satisfies
    ``F(rho_bar, rho_A)^2 <= Tr(rho_bar) * Tr(P rho_A)`` (P its support
    projector), and the renormalized truncation attains the bound.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if eps == 0.0:
        return h0(rho, target)
    w = _marginal_spectrum(rho, target)
    mass = np.cumsum(w) / np.sum(w)
    r = int(np.searchsorted(mass, 1.0 - eps * eps - 1e-12) + 1)
    return math.log2(min(r, w.size))
