"""Reproducible JSON/CSV records: protocols, behaviors, provenance headers."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .channels import ChoiOperator
from .policy import DEFAULT_POLICY, InvariantError, NumericPolicy
from .protocol import Behavior, PreparationFamily, Povm
from .states import DensityOperator

__all__ = [
    "TOOL_NAME",
    "fmt",
    "rounded",
    "dumps",
    "content_hash",
    "provenance",
    "write_json",
    "write_csv",
    "render_csv",
    "meta_lines",
    "matrix_from_dict",
    "encoding_to_dict",
    "protocol_to_dict",
    "protocol_from_dict",
    "state_from_dict",
    "load_json",
    "behavior_rows",
]

TOOL_NAME = "densecoding"
SIG_DIGITS = 12


def fmt(x: float) -> str:
    """Float with 12 significant digits."""
    return f"{float(x):.{SIG_DIGITS}g}"


def rounded(obj):
    """Recursively round floats (and numpy scalars/arrays) to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        x = float(fmt(x))
        return 0.0 if x == 0 else x
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(rounded(obj), sort_keys=True, indent=indent) + "\n"


def content_hash(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj`` (bytes are hashed as-is)."""
    if isinstance(obj, (bytes, bytearray)):
        data = bytes(obj)
    else:
        data = json.dumps(rounded(obj), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(data).hexdigest()


def provenance(seed, input_hash: str, policy: NumericPolicy = DEFAULT_POLICY, **extra) -> dict:
    meta = {
        "tool": TOOL_NAME,
        "version": __version__,
        "seed": seed,
        "numeric_policy": policy.as_dict(),
        "input_hash": input_hash,
    }
    meta.update(extra)
    return meta


def write_json(path, payload: dict) -> None:
    Path(path).write_text(dumps(payload))


def meta_lines(meta: dict) -> list[str]:
    """Provenance entries as ``key: value`` lines (without the ``#`` prefix)."""
    lines = []
    for key in sorted(meta):
        val = meta[key]
        if isinstance(val, dict):
            val = json.dumps(rounded(val), sort_keys=True, separators=(",", ":"))
        lines.append(f"{key}: {val}")
    return lines


def render_csv(columns: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> str:
    buf = io.StringIO()
    for line in meta_lines(meta or {}):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], meta: dict | None = None) -> None:
    Path(path).write_text(render_csv(columns, rows, meta))


def load_json(path) -> tuple[dict, str]:
    """Parse a JSON file; returns the data and the SHA-256 of its bytes."""
    raw = Path(path).read_bytes()
    return json.loads(raw), content_hash(raw)


def matrix_from_dict(data: dict) -> np.ndarray:
    try:
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix record: {exc}") from exc
    if re.shape != im.shape:
        raise ValueError("real and imaginary parts differ in shape")
    return re + 1j * im


def state_from_dict(data: dict, policy: NumericPolicy = DEFAULT_POLICY) -> DensityOperator:
    if "shared_state" in data:
        data = data["shared_state"]
    try:
        d_a, d_b = int(data["d_a"]), int(data.get("d_b", 1))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state record: {exc}") from exc
    return DensityOperator(matrix_from_dict(data), d_a, d_b, policy)


def encoding_to_dict(enc) -> dict:
    if isinstance(enc, ChoiOperator):
        return enc.to_dict()
    u = np.asarray(enc)
    return {"type": "unitary", "re": u.real.tolist(), "im": u.imag.tolist()}


def protocol_to_dict(family: PreparationFamily, povms: Povm | Sequence[Povm]) -> dict:
    if isinstance(povms, Povm):
        povms = [povms]
    return {
        "shared_state": family.shared_state.to_dict(),
        "encodings": [encoding_to_dict(e) for e in family.encodings],
        "povms": [m.to_list() for m in povms],
    }


def protocol_from_dict(data: dict, policy: NumericPolicy = DEFAULT_POLICY
                       ) -> tuple[PreparationFamily, list[Povm]]:
    """Inverse of :func:`protocol_to_dict`.

    Raises ``ValueError`` for structurally malformed records and
    :class:`InvariantError` for well-formed records describing invalid objects.
    """
    if not isinstance(data, dict) or not {"shared_state", "encodings", "povms"} <= data.keys():
        raise ValueError("protocol record needs shared_state, encodings and povms")
    shared = state_from_dict(data["shared_state"], policy)
    encodings = []
    for k, e in enumerate(data["encodings"]):
        kind = e.get("type") if isinstance(e, dict) else None
        if kind == "unitary":
            encodings.append(matrix_from_dict(e))
        elif kind == "choi":
            encodings.append(ChoiOperator(matrix_from_dict(e), int(e["d_in"]),
                                          int(e.get("d_out", e["d_in"])), policy))
        else:
            raise ValueError(f"encoding {k} has unknown type {kind!r}")
    if not encodings:
        raise InvariantError("protocol has no encodings")
    povms = []
    for y, effects in enumerate(data["povms"]):
        if not isinstance(effects, list) or not effects:
            raise ValueError(f"POVM {y} must be a non-empty list of effects")
        povms.append(Povm(np.array([matrix_from_dict(m) for m in effects]), policy))
    if not povms:
        raise ValueError("protocol has no measurements")
    return PreparationFamily(shared, tuple(encodings), policy), povms


def behavior_rows(beh: Behavior) -> list[tuple]:
    """Rows ``(b, x, y, p)`` in ``b``-major order."""
    p = beh.probabilities
    return [(b, x, y, float(p[b, x, y]))
            for b in range(p.shape[0]) for x in range(p.shape[1]) for y in range(p.shape[2])]
