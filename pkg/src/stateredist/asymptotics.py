"""Cost formulas for one-shot state redistribution and their i.i.d. expansions.

All quantities are in bits. A protocol error ``eps`` enters the entropic
formulas through the smoothing parameter ``eps' = eps^2 / (sqrt(5) + 1)^2``.

Four-party states are expected on labels ``A, B, C, R``: Alice sends A,
Bob holds B, C stays with the sender as side information and R purifies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from . import sdp
from .entropies import (
    SupportError,
    cmi,
    conditional_entropy,
    frak_s,
    h0_smooth,
    hmax_smooth,
    hmin_smooth,
    rel_entropy,
)
from .tensor import (
    DensityOperator,
    LayoutError,
    PureStateVector,
    StateError,
    as_density,
    partial_trace,
    purify,
)

_GOLDEN_DEN = (math.sqrt(5.0) + 1.0) ** 2
REMAINDER_NOTE = "O(log n), constant not specified"
CONSISTENCY_TOL = 2e-4
REGION_TOL = 1e-9


class ConsistencyError(RuntimeError):
    """Two mathematically equal evaluations of a cost disagree numerically."""


@dataclass(frozen=True)
class CostReport:
    delta_q: float
    delta_e: float
    one_shot_cost: float
    entanglement_cost: float
    epsilon: float
    epsilon_prime: float
    terms: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ExpansionCoefficients:
    a: float
    b: float
    remainder_note: str = REMAINDER_NOTE
    epsilon: float = float("nan")
    epsilon_prime: float = float("nan")


@dataclass(frozen=True)
class DyRegionPoint:
    Q: float
    E: float
    feasible: bool


class FqswCosts(NamedTuple):
    entanglement_gain: float
    q_cost: float


def epsilon_prime(eps: float) -> float:
    """``eps^2 / (sqrt(5) + 1)^2``.

    Accepts ``0 < eps <= 1``; ``eps = 1`` is allowed because the formula is
    still meaningful there and gives the largest admissible smoothing.
    """
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {eps}")
    return eps * eps / _GOLDEN_DEN


def _check_eps(eps: float, upper: float, inclusive: bool = False) -> float:
    eps = float(eps)
    ok = 0.0 < eps <= upper if inclusive else 0.0 < eps < upper
    if not ok:
        bracket = "]" if inclusive else ")"
        raise ValueError(f"epsilon must lie in (0, {upper}{bracket}, got {eps}")
    return eps


def _require_labels(psi, labels: Sequence[str], what: str):
    have = list(psi.labels)
    if sorted(have) != sorted(labels):
        raise LayoutError(f"{what} expects labels {sorted(labels)}, got {have}")


def _require_pure(psi) -> PureStateVector | DensityOperator:
    if isinstance(psi, PureStateVector):
        return psi
    rho = as_density(psi)
    w = np.linalg.eigvalsh(rho.matrix)
    if w[-1] < 1.0 - 1e-9:
        raise StateError("a pure state is required")
    return rho


def _hmin(psi, target: Sequence[str], cond: Sequence[str], eps: float, tol: float) -> float:
    marg = partial_trace(psi, list(target) + list(cond))
    return hmin_smooth(marg, cond, eps, tol=tol).value


# ---------------------------------------------------------------------------
# one-shot costs


def fqsw_costs(psi, eps: float, reference: Sequence[str] = ("R",), target: Sequence[str] = ("A",), tol: float = sdp.DEFAULT_TOL) -> FqswCosts:
    """Entanglement gain and qubit cost of eps-error coherent state merging of ``target``.

    ``gain = (H0(A) + Hmin(A|R)) / 2 + log eps'`` and
    ``cost = (H0(A) - Hmin(A|R)) / 2 - log eps'`` with both entropies smoothed at eps'.
    Every label not in ``target`` or ``reference`` belongs to the receiver.
    """
    eps = _check_eps(eps, 1.0, inclusive=True)
    psi = _require_pure(psi)
    for lab in list(reference) + list(target):
        psi.layout.index(lab)
    ep = epsilon_prime(eps)
    h0 = h0_smooth(psi, target, ep)
    hm = _hmin(psi, target, reference, ep, tol)
    log_ep = math.log2(ep)
    return FqswCosts(0.5 * (h0 + hm) + log_ep, 0.5 * (h0 - hm) - log_ep)


def decompose_delta(psi, eps: float, tol: float = sdp.DEFAULT_TOL) -> CostReport:
    """Direct merging cost Δq, relay ebit yield Δe and the net cost Δq - Δe.

    Δq merges A straight to Bob (reference CR); Δe is the ebit gain when A
    is first merged to the holder of C (reference BR).
    """
    eps = _check_eps(eps, 1.0, inclusive=True)
    psi = _require_pure(psi)
    _require_labels(psi, "ABCR", "decompose_delta")
    ep = epsilon_prime(eps)
    log_ep = math.log2(ep)
    h0 = h0_smooth(psi, ["A"], ep)
    h_cr = _hmin(psi, ["A"], ["C", "R"], ep, tol)
    h_br = _hmin(psi, ["A"], ["B", "R"], ep, tol)
    dq = 0.5 * (h0 - h_cr) - log_ep
    de = 0.5 * (h0 + h_br) + log_ep
    # ebits spent on repackaging minus ebits left over by the final merge to Bob
    e_cost = de - (0.5 * (h0 + h_cr) + log_ep)
    terms = {"h0_A": h0, "hmin_A_CR": h_cr, "hmin_A_BR": h_br}
    return CostReport(dq, de, dq - de, e_cost, eps, ep, terms)


def thm1_cost(psi, eps: float, tol: float = sdp.DEFAULT_TOL, check_tol: float = CONSISTENCY_TOL) -> CostReport:
    """One-shot redistribution cost ``(Hmax(A|B) - Hmin(A|RB)) / 2 - 2 log eps'``.

    Hmax(A|B) is evaluated by duality on a freshly built purification of
    ψ_AB, which makes it an independent numerical route from the
    ``-Hmin(A|CR)`` appearing in the equivalent form
    ``(-Hmin(A|CR) - Hmin(A|BR)) / 2 - 2 log eps'``. The two forms must
    agree within ``check_tol`` or :class:`ConsistencyError` is raised.
    """
    eps = _check_eps(eps, 1.0, inclusive=True)
    psi = _require_pure(psi)
    _require_labels(psi, "ABCR", "thm1_cost")
    ep = epsilon_prime(eps)
    log_ep = math.log2(ep)

    rho_ab = partial_trace(psi, ["A", "B"])
    fresh = purify(rho_ab, ref_label="E")
    h_max = hmax_smooth(fresh, ["A"], ["B"], ["E"], ep, tol=tol).value
    h_br = _hmin(psi, ["A"], ["B", "R"], ep, tol)
    first = 0.5 * (h_max - h_br) - 2.0 * log_ep

    h_cr = _hmin(psi, ["A"], ["C", "R"], ep, tol)
    second = 0.5 * (-h_cr - h_br) - 2.0 * log_ep
    if abs(first - second) > check_tol:
        raise ConsistencyError(
            f"one-shot cost forms disagree: {first:.8f} vs {second:.8f} (tolerance {check_tol:g})"
        )
    h0 = h0_smooth(psi, ["A"], ep)
    dq = 0.5 * (h0 - h_cr) - log_ep
    de = 0.5 * (h0 + h_br) + log_ep
    terms = {
        "hmax_A_B": h_max,
        "hmin_A_BR": h_br,
        "hmin_A_CR": h_cr,
        "h0_A": h0,
        "second_form": second,
    }
    return CostReport(dq, de, first, 0.5 * (h_br - h_cr), eps, ep, terms)


# ---------------------------------------------------------------------------
# inverse normal CDF

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02, 1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02, 6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00, -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)
_P_LOW = 0.02425


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def inv_norm_cdf(p: float) -> float:
    """Quantile of the standard normal distribution.

    Acklam's rational approximation (relative error about 1e-9) followed by
    one Halley step against ``erfc``.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    # upper tail: work with the complement to keep precision
    e = _norm_cdf(x) - p if p <= 0.5 else (p - 1.0) + 0.5 * math.erfc(x / math.sqrt(2.0))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


# ---------------------------------------------------------------------------
# second order


def thm2_expansion(psi, eps: float) -> ExpansionCoefficients:
    """Coefficients of the bound ``a n + b sqrt(n) + O(log n)`` on the n-copy cost.

    ``a = (D(ψ_ACR||I⊗ψ_CR) + D(ψ_ABR||I⊗ψ_BR)) / 2``, which equals
    ``I(A;R|B) / 2`` for pure ψ, and
    ``b = -Φ^{-1}(eps'^2) (s(ψ_ACR||I⊗ψ_CR) + s(ψ_ABR||I⊗ψ_BR)) / 2``.
    """
    eps = _check_eps(eps, 0.5)
    psi = _require_pure(psi)
    _require_labels(psi, "ABCR", "thm2_expansion")
    ep = epsilon_prime(eps)
    rel, spread = [], []
    for side in (["C", "R"], ["B", "R"]):
        joint = partial_trace(psi, ["A"] + side)
        marg = partial_trace(joint, side)
        da = joint.layout.dim("A")
        ref = np.kron(np.eye(da), marg.matrix)
        rel.append(rel_entropy(joint.matrix, ref))
        spread.append(frak_s(joint.matrix, ref))
    a = 0.5 * sum(rel)
    b = -inv_norm_cdf(ep * ep) * 0.5 * sum(spread)
    return ExpansionCoefficients(a, b, REMAINDER_NOTE, eps, ep)


def dy_min_rate(psi) -> float:
    """Smallest asymptotic qubit rate ``I(A;R|B) / 2`` allowed by the Devetak-Yard region."""
    psi = _require_pure(psi)
    _require_labels(psi, "ABCR", "dy_min_rate")
    return 0.5 * cmi(psi, (["A"], ["R"], ["B"]))


def dy_region(psi, Q: float, E: float) -> DyRegionPoint:
    """Membership of ``(Q, E)`` in ``Q >= I(A;R|B)/2``, ``Q + E >= H(A|B)``."""
    psi = _require_pure(psi)
    _require_labels(psi, "ABCR", "dy_region")
    q_min = 0.5 * cmi(psi, (["A"], ["R"], ["B"]))
    h_ab = conditional_entropy(partial_trace(psi, ["A", "B"]), ["B"])
    ok = Q >= q_min - REGION_TOL and Q + E >= h_ab - REGION_TOL
    return DyRegionPoint(float(Q), float(E), bool(ok))


# ---------------------------------------------------------------------------
# exact classical i.i.d. smooth max-relative entropy


def _types(n: int, k: int):
    """All count vectors of length k summing to n."""
    for cut in itertools.combinations(range(n + k - 1), k - 1):
        c = np.diff((-1,) + cut + (n + k - 1,)) - 1
        yield c


def _type_table(p: np.ndarray, q: np.ndarray, n: int):
    """Per-type log multiplicity, log p^n and log q^n of one sequence."""
    counts = np.array(list(_types(n, p.size)), dtype=float)
    logw = gammaln(n + 1) - np.sum(gammaln(counts + 1), axis=1)
    with np.errstate(divide="ignore"):
        lp_sym = np.log(p)
        lq_sym = np.log(q)
    # 0 * log 0 contributes nothing
    lp = np.where(counts > 0, counts * lp_sym, 0.0).sum(axis=1)
    lq = np.where(counts > 0, counts * lq_sym, 0.0).sum(axis=1)
    return logw, lp, lq


def _max_fidelity(log_mu: float, logw, lp, lq) -> float:
    """Largest ``sum sqrt(pbar p)`` over ``pbar <= mu q`` with total mass at most 1.

    The maximizer is ``pbar = min(t p, mu q)`` (water filling), with t set
    by the mass constraint, or ``pbar = mu q`` if that already fits.
    """
    # arrays are sorted by decreasing log-likelihood ratio
    wp = np.exp(logw + lp)
    wq = np.exp(logw + lq)
    mu = math.exp(log_mu)
    capped_q = np.concatenate([[0.0], np.cumsum(wq)])  # mass of mu q on the first k types
    free_p = np.concatenate([np.cumsum(wp[::-1])[::-1], [0.0]])  # p mass from type k on
    ratio = lp - lq
    m = lp.size
    for k in range(m + 1):
        cap = mu * capped_q[k]
        if cap >= 1.0:
            break
        if free_p[k] <= 0.0:
            k = m
            break
        log_t = math.log1p(-cap) - math.log(free_p[k])
        thr = log_mu - log_t  # types with ratio above thr are capped
        if (k == 0 or ratio[k - 1] >= thr - 1e-12) and (k == m or ratio[k] <= thr + 1e-12):
            lpb = np.minimum(log_t + lp, log_mu + lq)
            return float(np.sum(np.exp(logw + 0.5 * (lpb + lp))))
    # the whole of mu q fits (or overflows): fidelity of mu q, capped by mass
    scale = min(mu, 1.0 / capped_q[m]) if capped_q[m] > 0 else mu
    return float(np.sum(np.exp(logw + 0.5 * (math.log(scale) + lq + lp))))


def dmax_iid_exact_classical(p, q, n: int, eps: float, max_n: int = 14) -> float:
    """Exact ``D_max^eps(p^{⊗n} || q^{⊗n})`` in bits for probability vectors p, q.

    Sequences are grouped by type, sorted by likelihood ratio, and for each
    candidate mu the best smoothed pbar is found by water filling; mu is then
    located by root finding on the monotone map mu -> max fidelity. ``max_n``
    guards against accidental large runs; raise it deliberately for trend
    studies (the computation is polynomial in n for a fixed alphabet).
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValueError("p and q must have the same length")
    if np.any(p < 0) or np.any(q < 0) or abs(p.sum() - 1) > 1e-12 or abs(q.sum() - 1) > 1e-12:
        raise ValueError("p and q must be probability vectors")
    if np.any((p > 0) & (q <= 0)):
        raise SupportError("supp p is not contained in supp q")
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    if n > max_n:
        raise ValueError(f"n = {n} exceeds max_n = {max_n}")
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    keep = p > 0  # outcomes outside supp p never help
    p, q = p[keep], q[keep]
    logw, lp, lq = _type_table(p, q, n)
    order = np.argsort(-(lp - lq), kind="stable")
    logw, lp, lq = logw[order], lp[order], lq[order]
    top = float(np.max(lp - lq))
    if eps == 0.0:
        return top / math.log(2.0)
    target = math.sqrt(1.0 - eps * eps)
    lo = math.log(1.0 - eps * eps)  # fidelity never exceeds sqrt(mu)
    hi = top  # pbar = p is feasible here
    f = lambda lm: _max_fidelity(lm, logw, lp, lq) - target
    if f(lo) >= 0.0:
        return lo / math.log(2.0)
    log_mu = brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return log_mu / math.log(2.0)
