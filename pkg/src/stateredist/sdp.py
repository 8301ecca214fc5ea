"""Dense block semidefinite programs and a primal-dual interior point solver.

Problems are stated in primal block form::

    minimize / maximize   sum_j <C_j, X_j>
    subject to            sum_j <A_ij, X_j>  (==, <=, >=)  b_i     for each i
                          X_j >= 0 (PSD)                            for each block j

with ``<A, X> = Re Tr(A X)`` and Hermitian coefficient matrices. Complex
problems are mapped to real symmetric ones by :func:`embed_complex` before
solving. Inequalities become equalities with 1x1 slack blocks.

The solver is an infeasible-start path-following method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector, using a dense
Cholesky factorization of the Schur complement.

Debug dump format (:func:`dump_problem`), one record per line::

    # sense <minimize|maximize> complex <0|1>
    block <name> <size>
    obj <block> <row> <col> <re> <im>
    con <index> <rel> <rhs>
    coef <index> <block> <row> <col> <re> <im>

Rows and columns are 0-based; only the upper triangle (row <= col) of each
Hermitian coefficient matrix is written.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 200
DEFAULT_SIZE_CAP = 128
# constraints are stored densely; refuse problems whose working set would exceed this
MEMORY_BUDGET = 1 << 30
STEP_FRACTION = 0.98
INFEAS_RATIO = 1e8
REFINE_STEPS = 3


class SdpError(RuntimeError):
    pass


class SizeCapError(SdpError, ValueError):
    pass


class SolverFailure(SdpError):
    """Raised by callers that need an optimal solution and did not get one."""

    def __init__(self, solution: "SdpSolution", what: str = "SDP"):
        self.solution = solution
        super().__init__(f"{what} solve ended with status {solution.status!r}: {solution.diagnostics.get('reason', '')}")


@dataclass
class Constraint:
    coeffs: dict
    rel: str
    rhs: float


class SdpProblem:
    """Builder for a block SDP; see the module docstring for the form."""

    def __init__(self, sense: str = "minimize", is_complex: bool = True, size_cap: int = DEFAULT_SIZE_CAP):
        if sense not in ("minimize", "maximize"):
            raise ValueError(f"sense must be 'minimize' or 'maximize', got {sense!r}")
        self.sense = sense
        self.is_complex = is_complex
        self.size_cap = size_cap
        self.blocks: dict[str, int] = {}
        self.objective: dict[str, np.ndarray] = {}
        self.constraints: list[Constraint] = []

    def add_block(self, name: str, size: int) -> str:
        if name in self.blocks:
            raise ValueError(f"duplicate block {name!r}")
        if size < 1:
            raise ValueError("block size must be positive")
        if size > self.size_cap:
            raise SizeCapError(f"block {name!r} of size {size} exceeds size cap {self.size_cap}")
        self.blocks[name] = int(size)
        return name

    def _check_coeff(self, name: str, mat) -> np.ndarray:
        if name not in self.blocks:
            raise ValueError(f"unknown block {name!r}")
        n = self.blocks[name]
        m = np.atleast_2d(np.asarray(mat, dtype=complex if self.is_complex else float))
        if m.shape != (n, n):
            raise ValueError(f"coefficient for block {name!r} has shape {m.shape}, expected {(n, n)}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(m), initial=0.0)):
            raise ValueError(f"coefficient for block {name!r} is not Hermitian")
        return 0.5 * (m + m.conj().T)

    def set_objective(self, coeffs: Mapping[str, np.ndarray]) -> None:
        self.objective = {k: self._check_coeff(k, v) for k, v in coeffs.items()}

    def add_constraint(self, coeffs: Mapping[str, np.ndarray], rel: str, rhs: float) -> None:
        if rel not in ("==", "<=", ">="):
            raise ValueError(f"relation must be one of ==, <=, >=; got {rel!r}")
        c = {k: self._check_coeff(k, v) for k, v in coeffs.items()}
        self.constraints.append(Constraint(c, rel, float(rhs)))

    def add_matrix_equality(self, terms, rhs: np.ndarray) -> None:
        """Impose ``sum_k L_k(X_{block_k}) == rhs`` entrywise.

        ``terms`` is a list of ``(block, adjoint)`` where ``adjoint(E)`` returns
        the block-shaped matrix ``L_k^*(E)``. One scalar constraint is added per
        element of an orthonormal Hermitian (or symmetric) basis.
        """
        rhs = np.asarray(rhs)
        d = rhs.shape[0]
        for e in hermitian_basis(d, self.is_complex):
            coeffs: dict[str, np.ndarray] = {}
            for name, adj in terms:
                m = adj(e)
                coeffs[name] = coeffs[name] + m if name in coeffs else m
            self.add_constraint(coeffs, "==", float(np.real(np.sum(e.conj() * rhs))))

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)


@dataclass
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    block_values: dict
    iterations: int
    dual_vector: np.ndarray = field(default=None, repr=False)
    dual_blocks: dict = field(default=None, repr=False)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def summary(self) -> dict:
        return {
            "status": self.status,
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "iterations": self.iterations,
        }


def hermitian_basis(d: int, is_complex: bool = True):
    """Orthonormal basis of d x d Hermitian (or real symmetric) matrices under Re Tr(A B)."""
    dt = complex if is_complex else float
    r = 1.0 / np.sqrt(2.0)
    for i in range(d):
        e = np.zeros((d, d), dtype=dt)
        e[i, i] = 1.0
        yield e
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), dtype=dt)
            e[i, j] = e[j, i] = r
            yield e
            if is_complex:
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1j * r
                e[j, i] = -1j * r
                yield e


def _realify(m: np.ndarray) -> np.ndarray:
    re, im = np.real(m), np.imag(m)
    return np.block([[re, -im], [im, re]])


def embed_complex(p: SdpProblem) -> SdpProblem:
    """Real symmetric problem with the same optimal value.

    A complex Hermitian block of size d becomes a real block of size 2d
    holding ``[[Re X, -Im X], [Im X, Re X]]``; coefficients are embedded the
    same way and halved so that inner products are preserved. Real
    problems are returned unchanged.
    """
    if not p.is_complex:
        return p
    q = SdpProblem(p.sense, is_complex=False, size_cap=2 * p.size_cap)
    for name, n in p.blocks.items():
        q.add_block(name, 2 * n)
    q.set_objective({k: 0.5 * _realify(v) for k, v in p.objective.items()})
    for c in p.constraints:
        q.add_constraint({k: 0.5 * _realify(v) for k, v in c.coeffs.items()}, c.rel, c.rhs)
    return q


def recover_complex(y: np.ndarray) -> np.ndarray:
    """Inverse of the real embedding for a (possibly unstructured) real block."""
    d = y.shape[0] // 2
    x = 0.5 * (y[:d, :d] + y[d:, d:]) + 0.5j * (y[d:, :d] - y[:d, d:])
    return 0.5 * (x + x.conj().T)


def dump_problem(p: SdpProblem, path) -> None:
    """Write ``p`` in the plain-text triplet format described in the module docstring."""
    lines = [f"# sense {p.sense} complex {int(p.is_complex)}"]
    for name, n in p.blocks.items():
        lines.append(f"block {name} {n}")

    def triplets(prefix, mats):
        for name, m in mats.items():
            rows, cols = np.nonzero(np.triu(np.abs(m) > 0))
            for i, j in zip(rows, cols):
                v = complex(m[i, j])
                lines.append(f"{prefix} {name} {i} {j} {v.real!r} {v.imag!r}")

    triplets("obj", p.objective)
    for k, c in enumerate(p.constraints):
        lines.append(f"con {k} {c.rel} {c.rhs!r}")
        triplets(f"coef {k}", c.coeffs)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# real solver


def _standard_form(p: SdpProblem):
    """Flatten a real problem into lists of C_j, A_j (m x n_j x n_j) and b."""
    names = list(p.blocks)
    sizes = [p.blocks[k] for k in names]
    m = len(p.constraints)
    sign = 1.0 if p.sense == "minimize" else -1.0
    C = [sign * p.objective.get(k, np.zeros((n, n))).real for k, n in zip(names, sizes)]
    A = [np.zeros((m, n, n)) for n in sizes]
    b = np.zeros(m)
    s_cols = []
    for i, c in enumerate(p.constraints):
        for k, mat in c.coeffs.items():
            A[names.index(k)][i] = np.real(mat)
        b[i] = c.rhs
        if c.rel != "==":
            s_cols.append((i, 1.0 if c.rel == "<=" else -1.0))
    # every slack is its own 1x1 block
    for i, sgn in s_cols:
        a = np.zeros((m, 1, 1))
        a[i, 0, 0] = sgn
        A.append(a)
        C.append(np.zeros((1, 1)))
        sizes.append(1)
    return names, sizes, C, A, b, sign


def _ip(U, V):
    return float(sum(np.sum(u * v) for u, v in zip(U, V)))


def _Aop(A, X):
    return sum(np.tensordot(a, x, axes=([1, 2], [0, 1])) for a, x in zip(A, X))


def _ATop(A, y):
    return [np.tensordot(y, a, axes=(0, 0)) for a in A]


def _max_step(X_chol, dX):
    """Largest alpha with X + alpha dX PSD, given the Cholesky factor of X."""
    li = sla.solve_triangular(X_chol, np.eye(X_chol.shape[0]), lower=True)
    m = li @ dX @ li.T
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _pd_update(X, dX, alpha, shrink=0.8, tries=30):
    """Take the largest step <= alpha (shrinking geometrically) that keeps every block PD."""
    for _ in range(tries):
        new = [x + alpha * dx for x, dx in zip(X, dX)]
        new = [0.5 * (x + x.T) for x in new]
        try:
            for x in new:
                np.linalg.cholesky(x)
            return new, alpha
        except np.linalg.LinAlgError:
            alpha *= shrink
    return None, 0.0


def _solve_real(C, A, b, tol, max_iter, record_history=False):
    nb = len(C)
    m = b.shape[0]
    sizes = [c.shape[0] for c in C]
    N = sum(sizes)

    # row scaling of constraints
    row_norm = np.sqrt(sum(np.sum(a * a, axis=(1, 2)) for a in A))
    row_norm[row_norm == 0] = 1.0
    A = [a / row_norm[:, None, None] for a in A]
    b = b / row_norm

    normb = np.linalg.norm(b)
    normC = np.sqrt(_ip(C, C))
    max_a = max(np.sqrt(np.sum(a * a, axis=(1, 2))).max() if m else 0.0 for a in A) if A else 0.0

    X, S = [], []
    for j, n in enumerate(sizes):
        a_norms = np.sqrt(np.sum(A[j] * A[j], axis=(1, 2)))
        xi = max(10.0, np.sqrt(n), np.max(np.sqrt(n) * (1 + np.abs(b)) / (1 + a_norms)) if m else 0.0)
        eta = max(10.0, np.sqrt(n), max_a, np.linalg.norm(C[j]))
        X.append(xi * np.eye(n))
        S.append(eta * np.eye(n))
    y = np.zeros(m)

    history = []
    status, reason = "max_iter", "iteration limit reached"
    it = 0
    certificate = None
    for it in range(max_iter + 1):
        rp = b - _Aop(A, X)
        ATy = _ATop(A, y)
        Rd = [c - s - aty for c, s, aty in zip(C, S, ATy)]
        pobj = _ip(C, X)
        dobj = float(b @ y)
        xs = _ip(X, S)
        mu = xs / N
        pinf = np.linalg.norm(rp) / (1.0 + normb)
        dinf = np.sqrt(_ip(Rd, Rd)) / (1.0 + normC)
        gap = abs(pobj - dobj)
        if record_history:
            history.append({"pobj": pobj, "dobj": dobj, "pinf": pinf, "dinf": dinf, "xs": xs})
        if pinf <= tol and dinf <= tol and gap <= tol * (1.0 + abs(pobj)) and xs <= tol * (1.0 + abs(pobj)):
            status, reason = "optimal", "converged"
            break
        # infeasibility certificates
        ATy_S = np.sqrt(_ip([a + s for a, s in zip(ATy, S)], [a + s for a, s in zip(ATy, S)]))
        if dobj > 0 and dobj > INFEAS_RATIO * max(ATy_S, 1e-300) / 1.0 and pinf > tol:
            status, reason = "infeasible", "primal infeasible: dual improving ray found"
            certificate = {"kind": "primal_infeasible", "ray_y": y / dobj}
            break
        AX = np.linalg.norm(_Aop(A, X))
        if pobj < 0 and -pobj > INFEAS_RATIO * max(AX, 1e-300) and dinf > tol:
            status, reason = "infeasible", "dual infeasible: primal improving ray found (unbounded)"
            certificate = {"kind": "dual_infeasible", "ray_X": [x / -pobj for x in X]}
            break
        if it == max_iter:
            break

        # Nesterov-Todd scaling per block: W = T T^T, T^{-1} X T^{-T} = T^T S T = diag(lam)
        try:
            Lx = [np.linalg.cholesky(x) for x in X]
            Ls = [np.linalg.cholesky(s) for s in S]
        except np.linalg.LinAlgError:
            status, reason = "max_iter", "numerical breakdown: iterate lost positive definiteness"
            break
        T, Tinv, lam, W = [], [], [], []
        for lx, ls in zip(Lx, Ls):
            u, sv, vt = np.linalg.svd(ls.T @ lx)
            t = lx @ vt.T / np.sqrt(sv)
            T.append(t)
            Tinv.append((u.T @ ls.T) / np.sqrt(sv)[:, None])  # T^{-1} = Sigma^{-1/2} U^T Ls^T
            lam.append(sv)
            W.append(t @ t.T)

        # Schur complement M_ik = sum_j <A_ij, W_j A_kj W_j>
        M = np.zeros((m, m))
        WAW = []
        for a, w in zip(A, W):
            g = np.einsum("ab,kbc,cd->kad", w, a, w, optimize=True)
            WAW.append(g)
            M += a.reshape(m, -1) @ g.reshape(m, -1).T
        M = 0.5 * (M + M.T)
        try:
            cf = sla.cho_factor(M, lower=True, check_finite=False)

            def schur_solve(r):
                return sla.cho_solve(cf, r, check_finite=False)

        except (np.linalg.LinAlgError, sla.LinAlgError):
            reg = 1e-13 * max(1.0, np.max(np.abs(np.diag(M))))
            try:
                cf = sla.cho_factor(M + reg * np.eye(m), lower=True, check_finite=False)

                def schur_solve(r):
                    return sla.cho_solve(cf, r, check_finite=False)

            except (np.linalg.LinAlgError, sla.LinAlgError):
                pinvM = np.linalg.pinv(M)

                def schur_solve(r):
                    return pinvM @ r

        WRdW = [w @ r @ w for w, r in zip(W, Rd)]
        A_WRdW = _Aop(A, WRdW)

        def direction(Rc):
            rhs = rp - _Aop(A, Rc) + A_WRdW
            dy = schur_solve(rhs)
            # iterative refinement against the unreduced primal equation A(dX) = rp
            for k in range(REFINE_STEPS + 1):
                ATdy = _ATop(A, dy)
                dS = [r - a for r, a in zip(Rd, ATdy)]
                dX = [rc - w @ ds @ w for rc, w, ds in zip(Rc, W, dS)]
                dX = [0.5 * (d + d.T) for d in dX]
                if k == REFINE_STEPS:
                    break
                res = rp - _Aop(A, dX)
                if np.linalg.norm(res) <= 1e-15 * (1.0 + np.linalg.norm(rp)):
                    break
                dy = dy + schur_solve(res)
            return dX, dy, dS

        def steps(dX, dS):
            ap = min(np.inf, *[_max_step(lx, dx) for lx, dx in zip(Lx, dX)])
            ad = min(np.inf, *[_max_step(ls, ds) for ls, ds in zip(Ls, dS)])
            return ap, ad

        # predictor
        Rc_aff = [-x for x in X]
        dXa, dya, dSa = direction(Rc_aff)
        ap, ad = steps(dXa, dSa)
        ap, ad = min(1.0, ap), min(1.0, ad)
        mu_aff = _ip([x + ap * dx for x, dx in zip(X, dXa)], [s + ad * ds for s, ds in zip(S, dSa)]) / N
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector, assembled in the scaled space where X and S are diag(lam)
        Rc = []
        for t, ti, lm, dxa, dsa in zip(T, Tinv, lam, dXa, dSa):
            dxs = ti @ dxa @ ti.T
            dss = t.T @ dsa @ t
            R = sigma * mu * np.eye(lm.size) - np.diag(lm * lm) - 0.5 * (dxs @ dss + dss @ dxs)
            D = 2.0 * R / (lm[:, None] + lm[None, :])
            Rc.append(t @ D @ t.T)
        dX, dy, dS = direction(Rc)
        ap, ad = steps(dX, dS)
        ap = min(1.0, STEP_FRACTION * ap)
        ad = min(1.0, STEP_FRACTION * ad)
        X_new, ap = _pd_update(X, dX, ap)
        S_new, ad = _pd_update(S, dS, ad)
        if X_new is None or S_new is None:
            status, reason = "max_iter", "numerical breakdown: no positive definite step"
            break
        X, S = X_new, S_new
        y = y + ad * dy
        if ap < 1e-12 and ad < 1e-12:
            status, reason = "max_iter", "numerical breakdown: step length collapsed"
            break

    y_unscaled = y / row_norm
    diag = {
        "reason": reason,
        "pinf": float(pinf),
        "dinf": float(dinf),
        "gap": float(gap),
        "xs": float(xs),
        "mu": float(mu),
    }
    if certificate is not None:
        diag["certificate"] = certificate
    if record_history:
        diag["history"] = history
    return status, X, y_unscaled, S, pobj, dobj, it, diag


def estimated_bytes(p: SdpProblem) -> int:
    """Rough peak memory of the interior-point working set (three dense m x n x n tensors)."""
    f = 2 if p.is_complex else 1
    m = p.n_constraints
    return 3 * 8 * m * sum((f * n) ** 2 for n in p.blocks.values()) + 8 * m * m


def solve(p: SdpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER, record_history: bool = False) -> SdpSolution:
    """Solve ``p``; returns an :class:`SdpSolution` in the problem's own sense and field."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    for name, n in p.blocks.items():
        if n > p.size_cap:
            raise SizeCapError(f"block {name!r} of size {n} exceeds size cap {p.size_cap}")
    need = estimated_bytes(p)
    if need > MEMORY_BUDGET:
        raise SizeCapError(
            f"problem needs about {need / 2**20:.0f} MiB for dense constraint storage "
            f"({p.n_constraints} constraints), over the {MEMORY_BUDGET / 2**20:.0f} MiB budget"
        )
    q = embed_complex(p)
    names, sizes, C, A, b, sign = _standard_form(q)
    status, X, y, S, pobj, dobj, it, diag = _solve_real(C, A, b, tol, max_iter, record_history)
    blocks, duals = {}, {}
    for k, name in enumerate(names):
        blocks[name] = recover_complex(X[k]) if p.is_complex else X[k]
        duals[name] = recover_complex(S[k]) if p.is_complex else S[k]
    if status != "optimal":
        logger.debug("SDP ended with status %s (%s)", status, diag["reason"])
    return SdpSolution(
        status=status,
        primal_value=sign * pobj,
        dual_value=sign * dobj,
        block_values=blocks,
        iterations=it,
        dual_vector=sign * y,
        dual_blocks=duals,
        diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# adjoint helpers for add_matrix_equality


def adj_identity(scale: float = 1.0) -> Callable:
    return lambda e: scale * e


def adj_principal(n: int, start: int, stop: int, scale: float = 1.0) -> Callable:
    """Adjoint of ``X -> scale * X[start:stop, start:stop]`` for an n x n block."""

    def f(e):
        out = np.zeros((n, n), dtype=e.dtype)
        out[start:stop, start:stop] = scale * e
        return out

    return f


def adj_kron_identity(d_left: int, d_right: int, scale: float = 1.0) -> Callable:
    """Adjoint of ``Y -> scale * (I_left kron Y)``, i.e. a partial trace over the left factor."""

    def f(e):
        t = e.reshape(d_left, d_right, d_left, d_right)
        return scale * np.einsum("aiaj->ij", t)

    return f


def adj_scalar_times(omega: np.ndarray, scale: float = 1.0) -> Callable:
    """Adjoint of ``t -> scale * t * omega`` for a 1x1 block ``t``."""
    return lambda e: np.array([[scale * np.real(np.sum(omega.conj() * e))]], dtype=e.dtype)
