"""Instance file formats and JSON emission.

Instance files are JSON or TOML mappings with a ``kind`` of ``torus`` or
``quiver``.  Exact rationals travel as strings like ``"3/2"`` so that no
float corruption can touch index data; complex matrix entries travel as
pairs of decimal strings whose values round-trip bit-identically at
double precision.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import SchemaError
from .exact import InnerProduct, vec
from .quiver import Quiver, QuiverInstance, QuiverRep
from .torus import StratumIndex, TorusActionSpec


def load_instance_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SchemaError(str(path), f"cannot read file: {exc}") from exc
    if path.suffix.lower() == ".toml":
        try:
            return tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(str(path), f"invalid TOML: {exc}") from exc
    try:
        return json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(str(path), f"invalid JSON: {exc}") from exc


def _need(data: Mapping, key: str, where: str):
    if key not in data:
        raise SchemaError(f"{where}.{key}", "missing required field")
    return data[key]


def _int_list(values, where: str) -> list[int]:
    if not isinstance(values, Sequence) or isinstance(values, (str, bytes)):
        raise SchemaError(where, "expected a list of integers")
    out = []
    for k, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"{where}[{k}]", f"expected an integer, got {v!r}")
        out.append(v)
    return out


def torus_spec_from_dict(data: Mapping, where: str = "torus") -> TorusActionSpec:
    n = _need(data, "n", where)
    if not isinstance(n, int) or n < 1:
        raise SchemaError(f"{where}.n", "rank must be a positive integer")
    weights_raw = _need(data, "weights", where)
    weights = [vec(_int_list(w, f"{where}.weights[{k}]")) for k, w in enumerate(weights_raw)]
    rho = vec(_int_list(_need(data, "rho", where), f"{where}.rho"))
    ip_raw = _need(data, "ip", where)
    ip_list = _int_list(ip_raw, f"{where}.ip")
    if len(ip_list) != n:
        raise SchemaError(f"{where}.ip", f"expected {n} diagonal entries")
    if "labels" in data:
        coords = []
        for k, pair in enumerate(data["labels"]):
            if not isinstance(pair, Sequence) or len(pair) != 2:
                raise SchemaError(f"{where}.labels[{k}]", "expected [label, weight_index]")
            coords.append((str(pair[0]), int(pair[1])))
    else:
        coords = [(f"x{k}", k) for k in range(len(weights))]
    try:
        return TorusActionSpec(
            rank=n,
            weights=tuple(weights),
            rho=rho,
            ip=InnerProduct.diagonal(ip_list),
            coordinates=tuple(coords),
        )
    except ValueError as exc:
        raise SchemaError(where, str(exc)) from exc


def instance_from_dict(data: Mapping, where: str = "quiver") -> QuiverInstance:
    vertices = _need(data, "vertices", where)
    if not isinstance(vertices, Sequence) or not vertices:
        raise SchemaError(f"{where}.vertices", "expected a nonempty list")
    arrows_raw = _need(data, "arrows", where)
    arrows = []
    for k, arr in enumerate(arrows_raw):
        if isinstance(arr, Mapping):
            t, h = _need(arr, "tail", f"{where}.arrows[{k}]"), _need(arr, "head", f"{where}.arrows[{k}]")
        elif isinstance(arr, Sequence) and len(arr) == 2:
            t, h = arr
        else:
            raise SchemaError(f"{where}.arrows[{k}]", "expected {tail, head} or [tail, head]")
        arrows.append((str(t), str(h)))
    d = _int_list(_need(data, "d", where), f"{where}.d")
    theta = _int_list(_need(data, "theta", where), f"{where}.theta")
    alpha = _int_list(_need(data, "alpha", where), f"{where}.alpha")
    try:
        quiver = Quiver(vertices=tuple(str(v) for v in vertices), arrows=tuple(arrows))
        return QuiverInstance(quiver=quiver, dim=tuple(d), theta=tuple(theta), alpha=tuple(alpha))
    except ValueError as exc:
        raise SchemaError(where, str(exc)) from exc


def complex_from_pair(pair, where: str) -> complex:
    if not isinstance(pair, Sequence) or len(pair) != 2:
        raise SchemaError(where, "expected [re, im] decimal strings")
    try:
        return complex(float(pair[0]), float(pair[1]))
    except (TypeError, ValueError) as exc:
        raise SchemaError(where, f"bad complex entry: {exc}") from exc


def complex_to_pair(z: complex) -> list[str]:
    return [repr(float(z.real)), repr(float(z.imag))]


def matrix_from_lists(rows, shape, where: str) -> np.ndarray:
    out = np.zeros(shape, dtype=np.complex128)
    if len(rows) != shape[0]:
        raise SchemaError(where, f"expected {shape[0]} rows, got {len(rows)}")
    for r, row in enumerate(rows):
        if len(row) != shape[1]:
            raise SchemaError(f"{where}[{r}]", f"expected {shape[1]} entries")
        for c, pair in enumerate(row):
            out[r, c] = complex_from_pair(pair, f"{where}[{r}][{c}]")
    return out


def matrix_to_lists(m: np.ndarray) -> list:
    return [[complex_to_pair(m[r, c]) for c in range(m.shape[1])] for r in range(m.shape[0])]


def rep_from_lists(inst: QuiverInstance, mats, where: str) -> QuiverRep:
    if len(mats) != len(inst.quiver.arrows):
        raise SchemaError(where, f"expected {len(inst.quiver.arrows)} matrices")
    return QuiverRep(
        tuple(matrix_from_lists(m, inst.arrow_shape(a), f"{where}[{a}]") for a, m in enumerate(mats))
    )


def rep_to_lists(rep: QuiverRep) -> list:
    return [matrix_to_lists(m) for m in rep.matrices]


def point_from_dict(data: Mapping, where: str) -> dict[str, complex]:
    return {str(k): complex_from_pair(v, f"{where}.{k}") for k, v in data.items()}


def point_to_dict(point: Mapping[str, complex]) -> dict:
    return {k: complex_to_pair(v) for k, v in sorted(point.items())}


def frac_str(x) -> str:
    return str(Fraction(x))


def index_to_dict(idx: StratumIndex) -> dict:
    return {
        "beta": [frac_str(b) for b in idx.beta],
        "lambda": list(idx.lam) if idx.lam is not None else None,
        "d": idx.depth,
        "depth_sq": frac_str(idx.depth_sq),
        "witness": list(idx.witness) if idx.witness is not None else None,
        "semistable": idx.semistable,
    }


def dump_json(data, out=None) -> str:
    text = json.dumps(data, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    return text
