"""Instance files, matrix/mixture files and JSON report serialization."""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .epi import EpiInstance
from .errors import EpiError
from .mc_entropy import MixtureSpec

SYMMETRY_SILENT = 1e-9
SYMMETRY_MAX = 1e-6
TOOL_NAME = "costa-epi"


class InputFileError(EpiError):
    """Malformed or invalid input file; the message names the field."""


class AsymmetryWarning(UserWarning):
    pass


def _read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def parse_matrix(value, field: str, n: int | None = None) -> np.ndarray:
    """Validate a row-major square array of numbers and symmetrize it.

    Asymmetry up to ``1e-9`` (relative to the largest entry) is averaged away
    silently, up to ``1e-6`` with an :class:`AsymmetryWarning`; larger
    discrepancies are rejected.
    """
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise InputFileError(f"field '{field}': expected a non-empty list of rows")
    size = len(value)
    for i, row in enumerate(value):
        if len(row) != size:
            raise InputFileError(f"field '{field}': row {i} has {len(row)} entries, expected {size}")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise InputFileError(f"field '{field}': entry [{i}][{j}] is not a finite number")
    if n is not None and size != n:
        raise InputFileError(f"field '{field}': expected {n}x{n}, got {size}x{size}")
    m = np.array(value, dtype=float)
    asym = float(np.max(np.abs(m - m.T)))
    rel = asym / max(1.0, float(np.max(np.abs(m))))
    if rel > SYMMETRY_MAX:
        raise InputFileError(f"field '{field}': matrix is not symmetric (max discrepancy {asym:.6g})")
    if rel > SYMMETRY_SILENT:
        warnings.warn(f"field '{field}': symmetrized (max discrepancy {asym:.3g})", AsymmetryWarning, stacklevel=2)
    return 0.5 * (m + m.T)


def instance_from_dict(data: dict, tol: float = 1e-9) -> EpiInstance:
    if not isinstance(data, dict):
        raise InputFileError("instance file must hold a JSON object")
    n = data.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InputFileError("field 'n': expected a positive integer")
    for key in ("sigma_x", "sigma_z"):
        if key not in data:
            raise InputFileError(f"field '{key}': missing")
    if ("a" in data) == ("a_sqrt" in data):
        raise InputFileError("exactly one of fields 'a' and 'a_sqrt' must be given")
    sx = parse_matrix(data["sigma_x"], "sigma_x", n)
    sz = parse_matrix(data["sigma_z"], "sigma_z", n)
    label = data.get("label")
    try:
        if "a_sqrt" in data:
            return EpiInstance.from_a_sqrt(sx, sz, parse_matrix(data["a_sqrt"], "a_sqrt", n), label=label, tol=tol)
        return EpiInstance(sx, sz, parse_matrix(data["a"], "a", n), label=label, tol=tol)
    except (EpiError, ValueError) as exc:
        if isinstance(exc, InputFileError):
            raise
        raise InputFileError(f"invalid instance: {exc}") from exc


def load_instance(path, tol: float = 1e-9) -> EpiInstance:
    data, _ = _read_json(path)
    try:
        return instance_from_dict(data, tol)
    except InputFileError as exc:
        raise InputFileError(f"{path}: {exc}") from exc


def instance_to_dict(inst: EpiInstance) -> dict:
    out = {
        "n": inst.n,
        "sigma_x": inst.sigma_x.tolist(),
        "sigma_z": inst.sigma_z.tolist(),
        "a": inst.a.tolist(),
    }
    if inst.label:
        out["label"] = inst.label
    return out


def save_instance(path, inst: EpiInstance) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)) + "\n", encoding="utf-8")


def load_matrix(path, field: str = "matrix") -> np.ndarray:
    """A bare JSON array of rows, or an object with a ``matrix`` key."""
    data, _ = _read_json(path)
    if isinstance(data, dict):
        if "matrix" not in data:
            raise InputFileError(f"{path}: field 'matrix': missing")
        data = data["matrix"]
    try:
        return parse_matrix(data, field)
    except InputFileError as exc:
        raise InputFileError(f"{path}: {exc}") from exc


def load_mixture(path) -> MixtureSpec:
    data, _ = _read_json(path)
    try:
        comps = data["components"]
        if not isinstance(comps, list) or not comps:
            raise InputFileError("field 'components': expected a non-empty list")
        for i, c in enumerate(comps):
            parse_matrix(c["cov"], f"components[{i}].cov")
        return MixtureSpec.from_dict(data)
    except (KeyError, TypeError) as exc:
        raise InputFileError(f"{path}: malformed mixture ({exc!r})") from exc
    except (EpiError, ValueError) as exc:
        if isinstance(exc, InputFileError):
            raise InputFileError(f"{path}: {exc}") from exc
        raise InputFileError(f"{path}: invalid mixture: {exc}") from exc


def _encode(obj):
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        text = format(x, ".17g")
        # keep floats recognisable as floats
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    if isinstance(obj, complex):
        return _encode([obj.real, obj.imag])
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dumps(obj) -> str:
    """JSON text with every float written to 17 significant digits.

    Non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``.
    """
    return _encode(obj)


def digest(obj) -> str:
    """SHA-256 of the canonical :func:`dumps` text of ``obj``."""
    return "sha256:" + hashlib.sha256(dumps(obj).encode("utf-8")).hexdigest()


def make_report(command: str, result: dict, inputs, seed=None) -> dict:
    report = {
        "tool": TOOL_NAME,
        "version": __version__,
        "command": command,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "input_digest": digest(inputs),
        "result": result,
    }
    if seed is not None:
        report["seed"] = seed
    return report


def load_schema(name: str) -> dict:
    """Bundled JSON Schema: ``"instance"`` or ``"report"``."""
    from importlib.resources import files

    return json.loads(files("costa_epi").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8"))
