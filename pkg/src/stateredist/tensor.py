"""Dense linear algebra for multipartite quantum states.

Every operator carries a :class:`SystemLayout`, an ordered list of labelled
subsystems. Kronecker products follow the row-major convention: the first
listed label is the most significant tensor factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-12
RANK_TOL = 1e-10
EIG_CLIP = 1e-12


class LayoutError(ValueError):
    """Bad or inconsistent subsystem labels."""


class StateError(ValueError):
    """A matrix or vector violates a state invariant."""


class NotHermitianError(StateError):
    pass


@dataclass(frozen=True)
class SystemLayout:
    """Ordered labelled subsystems, e.g. ``SystemLayout([("A", 2), ("B", 4)])``."""

    subsystems: tuple[tuple[str, int], ...]

    def __init__(self, subsystems: Iterable[Sequence]):
        subs = tuple((str(lab), int(dim)) for lab, dim in subsystems)
        labels = [lab for lab, _ in subs]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate labels in layout {labels}")
        for lab, dim in subs:
            if dim < 1:
                raise LayoutError(f"subsystem {lab!r} has dimension {dim} < 1")
        object.__setattr__(self, "subsystems", subs)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown label {label!r}; layout has {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        return [self.index(lab) for lab in labels]

    def sub(self, labels: Iterable[str]) -> "SystemLayout":
        """Layout restricted to ``labels``, in the order given."""
        return SystemLayout([(lab, self.dim(lab)) for lab in labels])

    def concat(self, other: "SystemLayout") -> "SystemLayout":
        return SystemLayout(self.subsystems + other.subsystems)

    def __iter__(self):
        return iter(self.subsystems)

    def __len__(self):
        return len(self.subsystems)

    def __repr__(self):
        inner = ", ".join(f"{lab}:{dim}" for lab, dim in self.subsystems)
        return f"SystemLayout({inner})"


def _as_layout(layout) -> SystemLayout:
    return layout if isinstance(layout, SystemLayout) else SystemLayout(layout)


@dataclass(frozen=True)
class DensityOperator:
    """A (sub)normalized positive semidefinite operator on a layout.

    Construction validates Hermiticity, positivity and the trace bound.
    ``trace_class`` is ``"normalized"`` or ``"subnormalized"``; if omitted
    it is inferred from the trace.
    """

    layout: SystemLayout
    matrix: np.ndarray = field(repr=False)
    trace_class: str = "normalized"

    def __init__(self, layout, matrix, trace_class: str | None = None, check: bool = True):
        layout = _as_layout(layout)
        m = np.array(matrix, dtype=complex)
        n = layout.total_dim
        if m.shape != (n, n):
            raise StateError(f"matrix shape {m.shape} does not match layout dimension {n}")
        m.setflags(write=False)
        tr = float(np.real(np.trace(m)))
        if trace_class is None:
            trace_class = "normalized" if abs(tr - 1.0) <= TRACE_TOL else "subnormalized"
        if trace_class not in ("normalized", "subnormalized"):
            raise ValueError(f"unknown trace_class {trace_class!r}")
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "trace_class", trace_class)
        if check:
            self.validate()

    def validate(self) -> None:
        m = self.matrix
        herm_err = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if herm_err > HERMITIAN_TOL:
            raise NotHermitianError(f"hermiticity violated: max|M - M^dag| = {herm_err:.3e}")
        evals = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if evals.size and evals[0] < -PSD_TOL:
            raise StateError(f"positivity violated: min eigenvalue {evals[0]:.3e}")
        tr = self.trace
        if tr < -TRACE_TOL or tr > 1.0 + TRACE_TOL:
            raise StateError(f"trace invariant violated: trace = {tr:.12g} not in [0, 1]")
        if self.trace_class == "normalized" and abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"trace invariant violated: normalized state has trace {tr:.12g}")

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def labels(self):
        return self.layout.labels

    @property
    def dims(self):
        return self.layout.dims

    @property
    def is_normalized(self) -> bool:
        return self.trace_class == "normalized"

    def permute(self, order: Sequence[str]) -> "DensityOperator":
        return DensityOperator(
            self.layout.sub(order),
            permute_operator(self.matrix, self.dims, self.layout.indices(order)),
            self.trace_class,
            check=False,
        )

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class PureStateVector:
    """A unit vector on a layout."""

    layout: SystemLayout
    amplitudes: np.ndarray = field(repr=False)

    def __init__(self, layout, amplitudes, check: bool = True):
        layout = _as_layout(layout)
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if v.shape[0] != layout.total_dim:
            raise StateError(f"vector length {v.shape[0]} does not match layout dimension {layout.total_dim}")
        if check:
            nrm = float(np.linalg.norm(v))
            if abs(nrm - 1.0) > NORM_TOL:
                raise StateError(f"norm invariant violated: ||psi|| = {nrm:.15g}")
        v.setflags(write=False)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", v)

    @property
    def labels(self):
        return self.layout.labels

    @property
    def dims(self):
        return self.layout.dims

    def density(self) -> DensityOperator:
        v = self.amplitudes
        return DensityOperator(self.layout, np.outer(v, v.conj()), "normalized", check=False)

    def permute(self, order: Sequence[str]) -> "PureStateVector":
        t = self.amplitudes.reshape(self.dims)
        t = np.transpose(t, self.layout.indices(order))
        return PureStateVector(self.layout.sub(order), t.reshape(-1), check=False)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)


State = Union[DensityOperator, PureStateVector]


def permute_operator(m: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a square operator; ``perm[k]`` is the old index of new factor k."""
    k = len(dims)
    t = np.asarray(m).reshape(tuple(dims) * 2)
    t = np.transpose(t, list(perm) + [k + p for p in perm])
    n = int(np.prod([dims[p] for p in perm], dtype=np.int64)) if k else 1
    return t.reshape(n, n)


def as_density(state: State) -> DensityOperator:
    if isinstance(state, PureStateVector):
        return state.density()
    if isinstance(state, DensityOperator):
        return state
    raise TypeError(f"expected a state, got {type(state).__name__}")


def tensor(a: State, b: State) -> State:
    """Tensor product; pure inputs give a pure output."""
    layout = a.layout.concat(b.layout)
    if isinstance(a, PureStateVector) and isinstance(b, PureStateVector):
        return PureStateVector(layout, np.kron(a.amplitudes, b.amplitudes), check=False)
    a, b = as_density(a), as_density(b)
    trace_class = "normalized" if a.is_normalized and b.is_normalized else "subnormalized"
    return DensityOperator(layout, np.kron(a.matrix, b.matrix), trace_class, check=False)


def partial_trace(state: State, keep: Iterable[str]) -> DensityOperator:
    """Reduced operator on ``keep``, in the original relative order of the layout."""
    keep = set(keep)
    layout = state.layout
    for lab in keep:
        layout.index(lab)
    kept = [lab for lab in layout.labels if lab in keep]
    traced = [lab for lab in layout.labels if lab not in keep]
    dk = int(np.prod([layout.dim(l) for l in kept], dtype=np.int64)) if kept else 1
    dt = int(np.prod([layout.dim(l) for l in traced], dtype=np.int64)) if traced else 1
    order = layout.indices(kept + traced)
    if isinstance(state, PureStateVector):
        t = np.transpose(state.tensor_view(), order).reshape(dk, dt)
        red = t @ t.conj().T
        trace_class = "normalized"
    else:
        k = len(layout)
        t = state.matrix.reshape(layout.dims * 2)
        t = np.transpose(t, order + [k + o for o in order]).reshape(dk, dt, dk, dt)
        red = np.einsum("ajbj->ab", t)
        trace_class = state.trace_class
    return DensityOperator(layout.sub(kept), red, trace_class, check=False)


def hermitian_eig(m: np.ndarray, tol: float = HERMITIAN_TOL):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    err = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
    if err > tol * scale:
        raise NotHermitianError(f"matrix is not Hermitian: max|M - M^dag| = {err:.3e}")
    return np.linalg.eigh(0.5 * (m + m.conj().T))


def funm_herm(m: np.ndarray, fn, clip: float | None = EIG_CLIP) -> np.ndarray:
    """Apply ``fn`` to the spectrum of a Hermitian matrix.

    With ``clip`` set, eigenvalues below it are treated as exact zeros and
    mapped to 0 (so ``log`` acts on the support only).
    """
    w, v = hermitian_eig(m)
    if clip is not None:
        keep = w > clip
        fw = np.zeros_like(w)
        fw[keep] = fn(w[keep])
    else:
        fw = fn(w)
    return (v * fw) @ v.conj().T


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    return funm_herm(m, np.sqrt)


def logm_psd(m: np.ndarray) -> np.ndarray:
    """Base-2 logarithm on the support."""
    return funm_herm(m, np.log2)


def numerical_rank(m: np.ndarray, tol: float = RANK_TOL) -> int:
    w = np.linalg.eigvalsh(0.5 * (m + np.conj(m).T))
    if w.size == 0 or w[-1] <= 0:
        return 0
    return int(np.sum(w > tol * w[-1]))


def support_basis(m: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal columns spanning the support (eigenvalues above ``tol`` relative)."""
    w, v = hermitian_eig(m)
    if w.size == 0 or w[-1] <= 0:
        return v[:, :0]
    return v[:, w > tol * w[-1]][:, ::-1]


def purify(rho: DensityOperator, ref_label: str = "R") -> PureStateVector:
    """Minimal purification; the reference dimension equals the numerical rank of ``rho``."""
    rho = as_density(rho)
    if not rho.is_normalized:
        raise StateError("purify requires a normalized state")
    if ref_label in rho.labels:
        raise LayoutError(f"reference label {ref_label!r} already in layout")
    w, v = hermitian_eig(rho.matrix)
    keep = w > RANK_TOL * w[-1]
    w, v = w[keep][::-1], v[:, keep][:, ::-1]
    amps = (v * np.sqrt(w)).reshape(-1)
    vec = amps / np.linalg.norm(amps)
    layout = rho.layout.concat(SystemLayout([(ref_label, int(keep.sum()))]))
    return PureStateVector(layout, vec)


def _fidelity_matrices(a: np.ndarray, b: np.ndarray) -> float:
    sa = sqrtm_psd(a)
    sb = sqrtm_psd(b)
    return float(np.sum(np.linalg.svd(sa @ sb, compute_uv=False)))


def fidelity(rho: State, sigma: State) -> float:
    """Root fidelity ``Tr sqrt(sqrt(rho) sigma sqrt(rho))``; also used for subnormalized inputs."""
    if isinstance(rho, PureStateVector) and isinstance(sigma, PureStateVector):
        if rho.layout.dims != sigma.layout.dims:
            raise LayoutError("dimension mismatch")
        return float(min(1.0, abs(np.vdot(rho.amplitudes, sigma.amplitudes))))
    a = np.asarray(as_density(rho).matrix if not isinstance(rho, np.ndarray) else rho)
    b = np.asarray(as_density(sigma).matrix if not isinstance(sigma, np.ndarray) else sigma)
    if a.shape != b.shape:
        raise LayoutError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.clip(_fidelity_matrices(a, b), 0.0, 1.0))


def trace_distance(rho: State, sigma: State) -> float:
    a = as_density(rho).matrix if not isinstance(rho, np.ndarray) else rho
    b = as_density(sigma).matrix if not isinstance(sigma, np.ndarray) else sigma
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a complex Ginibre matrix."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_pure_state(layout, rng: np.random.Generator) -> PureStateVector:
    layout = _as_layout(layout)
    v = rng.standard_normal(layout.total_dim) + 1j * rng.standard_normal(layout.total_dim)
    return PureStateVector(layout, v / np.linalg.norm(v))


def random_density(layout, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random state drawn as the marginal of a Haar-random purification of the given rank."""
    layout = _as_layout(layout)
    n = layout.total_dim
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    return DensityOperator(layout, m / np.trace(m).real)


def maximally_entangled(d: int, labels=("A", "B")) -> PureStateVector:
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureStateVector([(labels[0], d), (labels[1], d)], v)


def basis_state(layout, index: int | Sequence[int]) -> PureStateVector:
    layout = _as_layout(layout)
    if not isinstance(index, (int, np.integer)):
        index = int(np.ravel_multi_index(tuple(index), layout.dims))
    v = np.zeros(layout.total_dim, dtype=complex)
    v[index] = 1.0
    return PureStateVector(layout, v)


def maximally_mixed(layout) -> DensityOperator:
    layout = _as_layout(layout)
    n = layout.total_dim
    return DensityOperator(layout, np.eye(n) / n)


def apply_local(psi: PureStateVector, op: np.ndarray, labels: Sequence[str], out_layout=None) -> PureStateVector:
    """Apply an operator (unitary or isometry) acting on ``labels`` of a pure state.

    The output subsystems replace ``labels`` at the position of the first one;
    ``out_layout`` names them (defaults to the input labels and dims).
    """
    labels = list(labels)
    in_layout = psi.layout.sub(labels)
    out_layout = in_layout if out_layout is None else _as_layout(out_layout)
    op = np.asarray(op)
    if op.shape != (out_layout.total_dim, in_layout.total_dim):
        raise LayoutError(f"operator shape {op.shape} incompatible with {in_layout} -> {out_layout}")
    rest = [lab for lab in psi.labels if lab not in labels]
    front = psi.permute(labels + rest)
    mat = front.amplitudes.reshape(in_layout.total_dim, -1)
    out = (op @ mat).reshape(-1)
    pos = psi.labels.index(labels[0])
    rest_before = [lab for lab in psi.labels[:pos] if lab not in labels]
    new_layout = out_layout.concat(psi.layout.sub(rest))
    final_order = rest_before + list(out_layout.labels) + [lab for lab in rest if lab not in rest_before]
    return PureStateVector(new_layout, out, check=False).permute(final_order)


def split_subsystem(psi: PureStateVector, label: str, parts: Sequence[tuple[str, int]]) -> PureStateVector:
    """Reinterpret subsystem ``label`` as the ordered product of ``parts`` (no change of amplitudes)."""
    parts = [(str(l), int(d)) for l, d in parts]
    d = psi.layout.dim(label)
    if int(np.prod([p[1] for p in parts])) != d:
        raise LayoutError(f"parts {parts} do not factor dimension {d} of {label!r}")
    subs = []
    for lab, dim in psi.layout:
        subs.extend(parts if lab == label else [(lab, dim)])
    return PureStateVector(SystemLayout(subs), psi.amplitudes, check=False)


def rename(psi: PureStateVector, mapping: dict) -> PureStateVector:
    """Same vector with subsystem labels renamed according to ``mapping``."""
    subs = [(mapping.get(lab, lab), dim) for lab, dim in psi.layout]
    return PureStateVector(SystemLayout(subs), psi.amplitudes, check=False)
