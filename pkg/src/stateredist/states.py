"""State files and named state generators.

File format (JSON)::

    {"layout": [["A", 2], ["B", 2]],
     "matrix_re": [[...], ...], "matrix_im": [[...], ...]}

with row-major square matrices. ``matrix_im`` may be omitted for real
matrices. Pure states may instead give ``amplitudes_re`` (and optionally
``amplitudes_im``) as flat vectors. A generator shorthand is also accepted::

    {"generator": "ghz", "params": {"parties": 3, "dim": 2}, "seed": 7}

Generators: ``ghz(parties, dim, dims=None)``, ``werner(p, dim=2)``,
``haar_pure(layout)`` (uses ``seed``) and ``maximally_entangled(d)``.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .tensor import (
    DensityOperator,
    PureStateVector,
    StateError,
    SystemLayout,
    random_pure_state,
)
from .tensor import maximally_entangled as _phi

DEFAULT_LABELS = ("A", "B", "C", "R", "D", "E", "F", "G")


class StateFormatError(ValueError):
    """Malformed state description."""


def ghz(parties: int = 3, dim: int = 2, dims=None, labels=None) -> PureStateVector:
    """``sum_i |i...i> / sqrt(dim)``; ``dims`` lets individual parties be larger than ``dim``."""
    parties = int(parties)
    if parties < 2:
        raise StateFormatError("ghz needs at least 2 parties")
    labels = list(labels or DEFAULT_LABELS[:parties])
    dims = [int(dim)] * parties if dims is None else [int(d) for d in dims]
    if len(dims) != parties or len(labels) != parties:
        raise StateFormatError("ghz: dims and labels must have one entry per party")
    if min(dims) < dim:
        raise StateFormatError("ghz: every party needs dimension >= dim")
    v = np.zeros(dims, dtype=complex)
    for i in range(int(dim)):
        v[(i,) * parties] = 1.0
    return PureStateVector(list(zip(labels, dims)), v.reshape(-1) / np.sqrt(dim))


def werner(p: float, dim: int = 2, labels=("A", "B")) -> DensityOperator:
    """``p |psi-><psi-| + (1 - p) I / 4`` on two qubits (``dim`` must be 2)."""
    p = float(p)
    if int(dim) != 2:
        raise StateFormatError("werner is implemented for dim = 2")
    if not 0.0 <= p <= 1.0:
        raise StateFormatError(f"werner weight p must lie in [0, 1], got {p}")
    singlet = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2.0)
    m = p * np.outer(singlet, singlet.conj()) + (1.0 - p) * np.eye(4) / 4.0
    return DensityOperator([(labels[0], 2), (labels[1], 2)], m)


def haar_pure(layout, seed: int | None = None) -> PureStateVector:
    rng = np.random.default_rng(seed)
    return random_pure_state(SystemLayout([tuple(s) for s in layout]), rng)


def maximally_entangled(d: int = 2, labels=("A", "B")) -> PureStateVector:
    return _phi(int(d), tuple(labels))


GENERATORS = {
    "ghz": ghz,
    "werner": werner,
    "haar_pure": haar_pure,
    "maximally_entangled": maximally_entangled,
}


def generate(name: str, params: dict | None = None, seed: int | None = None):
    if name not in GENERATORS:
        raise StateFormatError(f"unknown generator {name!r}; choose from {sorted(GENERATORS)}")
    params = dict(params or {})
    if name == "haar_pure":
        if "layout" not in params:
            raise StateFormatError("haar_pure needs a 'layout' parameter")
        params.setdefault("seed", seed)
    try:
        return GENERATORS[name](**params)
    except TypeError as exc:
        raise StateFormatError(f"bad parameters for generator {name!r}: {exc}") from None


def parse_generator(text: str) -> dict:
    """``name``, ``name:key=value,...`` or a JSON object, as a generator spec dict.

    Values are parsed as JSON where possible (``dims=[2,2,2,8]`` works).
    """
    text = text.strip()
    if text.startswith("{"):
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StateFormatError(f"generator spec is not valid JSON: {exc}") from None
        if "generator" not in spec:
            raise StateFormatError("generator spec needs a 'generator' key")
        return spec
    name, _, rest = text.partition(":")
    params = {}
    for item in _split_top(rest):
        if not item:
            continue
        key, eq, val = item.partition("=")
        if not eq:
            raise StateFormatError(f"generator parameter {item!r} is not key=value")
        try:
            params[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            params[key.strip()] = val.strip()
    spec = {"generator": name.strip(), "params": params}
    if "seed" in params:
        spec["seed"] = params.pop("seed")
    return spec


def _split_top(s: str):
    """Split on commas that are not inside brackets."""
    depth, cur = 0, []
    for ch in s:
        if ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
        if ch == "," and depth == 0:
            yield "".join(cur)
            cur = []
        else:
            cur.append(ch)
    yield "".join(cur)


def _matrix(obj: dict, key: str, shape):
    re = np.asarray(obj[f"{key}_re"], dtype=float)
    im = np.asarray(obj.get(f"{key}_im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise StateFormatError(f"{key}_re and {key}_im have different shapes")
    if shape is not None and re.shape != shape:
        raise StateFormatError(f"{key} has shape {re.shape}, expected {shape}")
    return re + 1j * im


def state_from_dict(obj: dict, seed: int | None = None):
    if not isinstance(obj, dict):
        raise StateFormatError("state description must be a JSON object")
    if "generator" in obj:
        return generate(obj["generator"], obj.get("params"), obj.get("seed", seed))
    if "layout" not in obj:
        raise StateFormatError("state file needs 'layout' (or 'generator')")
    try:
        layout = SystemLayout([(str(l), int(d)) for l, d in obj["layout"]])
    except (TypeError, ValueError) as exc:
        raise StateFormatError(f"bad layout: {exc}") from None
    n = layout.total_dim
    if "amplitudes_re" in obj:
        return PureStateVector(layout, _matrix(obj, "amplitudes", (n,)))
    if "matrix_re" not in obj:
        raise StateFormatError("state file needs 'matrix_re' or 'amplitudes_re'")
    return DensityOperator(layout, _matrix(obj, "matrix", (n, n)))


def load_state(source, seed: int | None = None):
    """Read a state from a path, a JSON string, a dict or a generator spec string.

    Validation failures raise :class:`StateError` (naming the violated
    invariant) or :class:`StateFormatError`.
    """
    if isinstance(source, dict):
        return state_from_dict(source, seed)
    if isinstance(source, Path) or (isinstance(source, str) and Path(source).is_file()):
        try:
            obj = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise StateFormatError(f"{source}: not valid JSON ({exc})") from None
        return state_from_dict(obj, seed)
    if isinstance(source, str):
        if source.lstrip().startswith("{"):
            try:
                return state_from_dict(json.loads(source), seed)
            except json.JSONDecodeError as exc:
                raise StateFormatError(f"not valid JSON: {exc}") from None
        spec = parse_generator(source)
        return generate(spec["generator"], spec.get("params"), spec.get("seed", seed))
    raise StateFormatError(f"cannot load a state from {type(source).__name__}")


def state_to_dict(state) -> dict:
    layout = [[lab, dim] for lab, dim in state.layout]
    if isinstance(state, PureStateVector):
        v = state.amplitudes
        return {"layout": layout, "amplitudes_re": v.real.tolist(), "amplitudes_im": v.imag.tolist()}
    m = state.matrix
    return {"layout": layout, "matrix_re": m.real.tolist(), "matrix_im": m.imag.tolist()}


def to_pure(state, tol: float = 1e-9) -> PureStateVector:
    """Pure-state vector of a rank-one density operator (global phase fixed by the largest entry)."""
    if isinstance(state, PureStateVector):
        return state
    w, v = np.linalg.eigh(state.matrix)
    if w[-1] < 1.0 - tol:
        raise StateError(f"state is not pure: largest eigenvalue {w[-1]:.12f}")
    vec = v[:, -1]
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    return PureStateVector(state.layout, vec / np.linalg.norm(vec))


def bundled_example(name: str = "ghz_abcr.json"):
    """Load a state file shipped with the package."""
    text = resources.files("stateredist.data").joinpath(name).read_text()
    return state_from_dict(json.loads(text))
