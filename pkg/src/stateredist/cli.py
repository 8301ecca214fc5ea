"""Command-line front end.

Usage::

    stateredist COMMAND [--state FILE | --generator SPEC] --epsilon E [options]

Commands: entropy, bound-oneshot, bound-second-order, simulate-merge,
simulate-redistribute, scan, selftest. Results go to ``--out`` (default
stdout) as JSON (default) or CSV. JSON documents carry ``"schema": "1"``
and a ``units`` map; all information quantities are in bits.

Exit codes: 0 success, 1 selftest found a failing criterion, 2 invalid
input, 3 solver failure. Errors are reported as one JSON line on stderr,
e.g. ``{"error": "validation", "message": "..."}``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .asymptotics import (
    ConsistencyError,
    decompose_delta,
    thm1_cost,
    thm2_expansion,
)
from .entropies import SupportError, conditional_entropy, h0_smooth, hmin_smooth, von_neumann
from .protocol import (
    CSV_HEADER,
    DecoderDimensionError,
    InsufficientEbits,
    merge_stats,
    redistribute,
    write_trial_log,
)
from .sdp import SdpError, SizeCapError
from .states import StateFormatError, bundled_example, load_state, parse_generator, generate, to_pure
from .tensor import LayoutError, StateError, partial_trace

SCHEMA = "1"
COMMANDS = (
    "entropy",
    "bound-oneshot",
    "bound-second-order",
    "simulate-merge",
    "simulate-redistribute",
    "scan",
    "selftest",
)

ENTROPY_COLUMNS = ("system", "conditioning", "entropy", "conditional_entropy", "hmin_smooth", "h0_smooth")
ONESHOT_COLUMNS = ("epsilon", "epsilon_prime", "delta_q", "delta_e", "one_shot_cost", "entanglement_cost")
SECOND_ORDER_COLUMNS = ("epsilon", "epsilon_prime", "n", "a", "b", "bound")
REDIST_COLUMNS = (
    "seed",
    "q_budget",
    "initial_ebits",
    "relay_ebits",
    "qubits_sent",
    "ebits_consumed",
    "ebits_returned",
    "entanglement_cost",
    "final_fidelity",
)
SCAN_COLUMNS = ONESHOT_COLUMNS + ("a", "b", "n", "second_order_bound")


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stateredist", description="Quantum state redistribution: entropies, cost bounds, simulation.")
    p.add_argument("--version", action="version", version=f"stateredist {__version__}")
    p.add_argument("command", choices=COMMANDS)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--state", help="JSON state file, or the name of a bundled example (ghz_abcr)")
    src.add_argument("--generator", help="generator spec, e.g. 'ghz:parties=4,dim=2,dims=[2,2,2,8]' or JSON")
    p.add_argument("--epsilon", help="error parameter; scan accepts a comma-separated list")
    p.add_argument("--n", help="comma-separated block lengths for the second-order bound")
    p.add_argument("--qubits", help="qubits sent (merge: comma list, default all) or qubit budget (redistribute)")
    p.add_argument("--ebits", type=int, default=0, help="pre-shared ebits for simulate-redistribute (default 0)")
    p.add_argument("--trials", type=int, default=100, help="merging trials per q (default 100)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    return p


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str | None, what: str) -> list[float]:
    if text is None:
        raise ValidationError(f"--{what} is required for this command")
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"--{what} must be a number or comma-separated numbers, got {text!r}") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"--{what} must contain finite numbers")
    return vals


def _ints(text: str | None, what: str) -> list[int] | None:
    if text is None:
        return None
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"--{what} must be an integer or comma-separated integers, got {text!r}") from None
    if any(v < 0 for v in vals):
        raise ValidationError(f"--{what} must be non-negative")
    return vals


def _single_epsilon(args) -> float:
    vals = _floats(args.epsilon, "epsilon")
    if len(vals) != 1:
        raise ValidationError("--epsilon takes a single value for this command")
    return vals[0]


def _bundled_names() -> list[str]:
    return sorted(p.name for p in resources.files("stateredist.data").iterdir() if p.name.endswith(".json"))


def _state(args):
    if args.generator is not None:
        spec = parse_generator(args.generator)
        return generate(spec["generator"], spec.get("params"), spec.get("seed", args.seed))
    if args.state is None:
        raise ValidationError("one of --state or --generator is required")
    path = Path(args.state)
    if path.is_file():
        return load_state(path, seed=args.seed)
    name = path.name if path.suffix == ".json" else path.name + ".json"
    if len(path.parts) == 1 and name in _bundled_names():
        return bundled_example(name)
    raise ValidationError(f"state file not found: {args.state} (bundled examples: {', '.join(_bundled_names())})")


def _layout(state) -> list:
    return [[lab, dim] for lab, dim in state.layout]


def _num(x):
    """JSON-safe float: non-finite values become strings."""
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def _json(command: str, body: dict, units: dict) -> str:
    doc = {"schema": SCHEMA, "command": command}
    doc.update(body)
    doc["units"] = units
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_entropy(args) -> str:
    eps = _single_epsilon(args)
    if not 0.0 <= eps < 1.0:
        raise ValidationError(f"epsilon must lie in [0, 1) for entropy, got {eps}")
    state = _state(args)
    labels = list(state.labels)
    rows = []
    for lab in labels:
        rest = [l for l in labels if l != lab]
        row = {"system": lab, "conditioning": "".join(rest)}
        row["entropy"] = von_neumann(partial_trace(state, [lab]))
        row["h0_smooth"] = h0_smooth(state, [lab], eps)
        if rest:
            row["conditional_entropy"] = conditional_entropy(state, rest)
            row["hmin_smooth"] = _hmin_of(state, lab, rest, eps)
        rows.append(row)
    if args.format == "csv":
        return _csv(ENTROPY_COLUMNS, rows)
    body = {
        "epsilon": eps,
        "layout": _layout(state),
        "total_entropy": von_neumann(state),
        "systems": [{k: (_num(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows],
    }
    units = {k: "bits" for k in ("total_entropy",) + ENTROPY_COLUMNS[2:]}
    return _json("entropy", body, units)


def _hmin_of(state, lab, rest, eps):
    marg = partial_trace(state, [lab] + rest).permute([lab] + rest)
    return hmin_smooth(marg, rest, eps).value


def _oneshot_row(psi, eps) -> dict:
    rep = thm1_cost(psi, eps)
    return {
        "epsilon": eps,
        "epsilon_prime": rep.epsilon_prime,
        "delta_q": rep.delta_q,
        "delta_e": rep.delta_e,
        "one_shot_cost": rep.one_shot_cost,
        "entanglement_cost": rep.entanglement_cost,
        "_terms": rep.terms,
    }


def cmd_bound_oneshot(args) -> str:
    eps = _single_epsilon(args)
    psi = _state(args)
    row = _oneshot_row(psi, eps)
    terms = row.pop("_terms")
    if args.format == "csv":
        return _csv(ONESHOT_COLUMNS, [row])
    dec = decompose_delta(psi, eps)
    body = {k: _num(v) for k, v in row.items()}
    body["layout"] = _layout(psi)
    body["net_cost_from_decomposition"] = _num(dec.one_shot_cost)
    body["terms"] = {k: _num(v) for k, v in terms.items()}
    units = {k: "bits" for k in ONESHOT_COLUMNS[2:] + ("net_cost_from_decomposition", "terms")}
    units["epsilon"] = units["epsilon_prime"] = "dimensionless"
    return _json("bound-oneshot", body, units)


def cmd_bound_second_order(args) -> str:
    eps = _single_epsilon(args)
    psi = _state(args)
    co = thm2_expansion(psi, eps)
    ns = _ints(args.n, "n") or []
    if any(n < 1 for n in ns):
        raise ValidationError("--n values must be positive")
    rows = [
        {"epsilon": eps, "epsilon_prime": co.epsilon_prime, "n": n, "a": co.a, "b": co.b, "bound": co.a * n + co.b * math.sqrt(n)}
        for n in ns
    ]
    if args.format == "csv":
        return _csv(SECOND_ORDER_COLUMNS, rows or [{"epsilon": eps, "epsilon_prime": co.epsilon_prime, "a": co.a, "b": co.b}])
    body = {
        "epsilon": eps,
        "epsilon_prime": co.epsilon_prime,
        "layout": _layout(psi),
        "a": co.a,
        "b": co.b,
        "remainder_note": co.remainder_note,
        "bounds": [{"n": r["n"], "bound": r["bound"]} for r in rows],
    }
    units = {"a": "bits per copy", "b": "bits per sqrt(copy)", "bound": "bits", "epsilon": "dimensionless", "epsilon_prime": "dimensionless"}
    return _json("bound-second-order", body, units)


def _merge_parties(psi):
    refs = ["C", "R"] if "C" in psi.labels and "R" in psi.labels else ["R"]
    for lab in ["A"] + refs:
        if lab not in psi.labels:
            raise ValidationError(f"simulate-merge needs systems A and R, got {list(psi.labels)}")
    return refs


def cmd_simulate_merge(args) -> str:
    eps = _single_epsilon(args)
    if args.trials < 1:
        raise ValidationError("--trials must be >= 1")
    psi = to_pure(_state(args))
    refs = _merge_parties(psi)
    n_qubits = int(psi.layout.dim("A")).bit_length() - 1
    qs = _ints(args.qubits, "qubits")
    qs = list(range(n_qubits + 1)) if qs is None else qs
    summaries = [merge_stats(psi, q, args.trials, eps, args.seed, reference=refs) for q in qs]
    if args.format == "csv":
        return "".join(
            write_trial_log(s.results) if k == 0 else write_trial_log(s.results).split("\n", 1)[1]
            for k, s in enumerate(summaries)
        )
    body = {
        "epsilon": eps,
        "seed": args.seed,
        "trials": args.trials,
        "layout": _layout(psi),
        "reference": refs,
        "summary": [
            {
                "q": s.q,
                "mean_fidelity": s.mean_fidelity,
                "min_fidelity": s.min_fidelity,
                "max_fidelity": s.max_fidelity,
                "success_fraction": s.success_fraction,
            }
            for s in summaries
        ],
        "trial_log": [
            dict(zip(CSV_HEADER, (r.seed, r.qubits_sent, r.decoupling_error, r.achieved_fidelity)))
            for s in summaries
            for r in s.results
        ],
    }
    units = {"q": "qubits", "fidelity": "dimensionless", "decoupling_error": "trace distance"}
    return _json("simulate-merge", body, units)


def cmd_simulate_redistribute(args) -> str:
    eps = _single_epsilon(args)
    if not 0.0 < eps < 1.0:
        raise ValidationError(f"epsilon must lie in (0, 1), got {eps}")
    psi = to_pure(_state(args))
    qs = _ints(args.qubits, "qubits")
    if qs is None or len(qs) != 1:
        raise ValidationError("simulate-redistribute needs a single --qubits budget")
    out = redistribute(psi, qs[0], args.ebits, eps, args.seed)
    row = {
        "seed": args.seed,
        "q_budget": qs[0],
        "initial_ebits": args.ebits,
        "relay_ebits": out.relay_ebits,
        "qubits_sent": out.qubits_physically_sent,
        "ebits_consumed": out.ebits_consumed,
        "ebits_returned": out.ebits_returned,
        "entanglement_cost": out.entanglement_cost,
        "final_fidelity": out.final_fidelity,
    }
    if args.format == "csv":
        return _csv(REDIST_COLUMNS, [row])
    body = dict(row, epsilon=eps, layout=_layout(psi), success=bool(out.final_fidelity >= 1.0 - eps), stages=out.per_stage)
    units = {
        "q_budget": "qubits",
        "qubits_sent": "qubits",
        "initial_ebits": "ebits",
        "relay_ebits": "ebits",
        "ebits_consumed": "ebits",
        "ebits_returned": "ebits",
        "entanglement_cost": "ebits",
        "final_fidelity": "dimensionless",
    }
    return _json("simulate-redistribute", body, units)


def cmd_scan(args) -> str:
    eps_grid = _floats(args.epsilon, "epsilon")
    ns = _ints(args.n, "n") or [None]
    psi = _state(args)
    rows = []
    for eps in eps_grid:
        base = _oneshot_row(psi, eps)
        base.pop("_terms")
        co = thm2_expansion(psi, eps) if 0.0 < eps < 0.5 else None
        for n in ns:
            row = dict(base)
            if co is not None:
                row.update(a=co.a, b=co.b)
                if n is not None:
                    row.update(n=n, second_order_bound=co.a * n + co.b * math.sqrt(n))
            elif n is not None:
                row["n"] = n
            rows.append(row)
    if args.format == "csv":
        return _csv(SCAN_COLUMNS, rows)
    body = {"layout": _layout(psi), "rows": [{k: _num(v) if isinstance(v, float) else v for k, v in r.items()} for r in rows]}
    units = {c: "bits" for c in SCAN_COLUMNS[2:] if c != "n"}
    units["epsilon"] = units["epsilon_prime"] = "dimensionless"
    units["n"] = "copies"
    return _json("scan", body, units)


def cmd_selftest(args, stdout) -> tuple[str, int]:
    from .acceptance import run_all

    echo = None if args.out is None else (lambda line: print(line, file=stdout, flush=True))
    results = run_all(echo=echo)
    rows = [{"criterion": r.number, "title": r.title, "passed": r.passed, "detail": r.detail} for r in results]
    if args.format == "csv":
        text = _csv(("criterion", "title", "passed", "detail"), rows)
    else:
        text = _json("selftest", {"criteria": rows, "all_passed": all(r.passed for r in results)}, {})
    return text, 0 if all(r.passed for r in results) else 1


HANDLERS = {
    "entropy": cmd_entropy,
    "bound-oneshot": cmd_bound_oneshot,
    "bound-second-order": cmd_bound_second_order,
    "simulate-merge": cmd_simulate_merge,
    "simulate-redistribute": cmd_simulate_redistribute,
    "scan": cmd_scan,
}


def _fail(kind: str, message: str, stderr) -> None:
    stderr.write(json.dumps({"error": kind, "message": " ".join(str(message).split())}) + "\n")


def _emit(text: str, out, stdout) -> None:
    if out is None:
        stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.command == "selftest":
            text, code = cmd_selftest(args, stdout)
        else:
            text, code = HANDLERS[args.command](args), 0
        _emit(text, args.out, stdout)
        return code
    except SizeCapError as exc:
        _fail("validation", exc, stderr)
        return 2
    except (SdpError, ConsistencyError) as exc:
        _fail("solver", exc, stderr)
        return 3
    except (ValidationError, StateFormatError, StateError, LayoutError, SupportError, DecoderDimensionError, InsufficientEbits, ValueError) as exc:
        _fail("validation", exc, stderr)
        return 2
    except OSError as exc:
        _fail("io", exc, stderr)
        return 2


def main() -> None:
    sys.exit(run())
