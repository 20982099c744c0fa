"""Portable model files: a text header plus base64 little-endian float64 payload.

Layout::

    pgnkd-model 1
    kind mlp
    param name value          (zero or more)
    array name d0 d1 ...      (one line per array, payload order)
    payload <n_bytes>
    <base64 lines>

Loading never returns a partially built model: the header and the full
payload are validated before any object is constructed.
"""
from __future__ import annotations

import base64
from pathlib import Path

import numpy as np

from ..embedding import PlaceClassifier
from ..student import MlpModel, MlpStudent
from ..teacher import NnqlStore

MAGIC = "pgnkd-model"
FORMAT_VERSION = 1
LE_F64 = np.dtype("<f8")


class ModelFormatError(ValueError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class ShapeMismatchError(ModelFormatError):
    pass


class TruncatedPayloadError(ModelFormatError):
    pass


def _encode(kind: str, arrays: list[tuple[str, np.ndarray]], params: dict | None = None) -> str:
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"kind {kind}"]
    for k, v in (params or {}).items():
        lines.append(f"param {k} {v}")
    chunks = []
    for name, a in arrays:
        a = np.ascontiguousarray(a, dtype=LE_F64)
        lines.append(" ".join(["array", name] + [str(d) for d in a.shape]))
        chunks.append(a.tobytes())
    payload = b"".join(chunks)
    lines.append(f"payload {len(payload)}")
    encoded = base64.b64encode(payload).decode("ascii")
    lines.extend(encoded[i:i + 76] for i in range(0, len(encoded), 76))
    return "\n".join(lines) + "\n"


def _decode(text: str):
    lines = text.splitlines()
    head = lines[0].split() if lines else []
    if len(head) != 2 or head[0] != MAGIC or head[1] != str(FORMAT_VERSION):
        raise VersionMismatchError(f"expected '{MAGIC} {FORMAT_VERSION}' header, got {lines[:1]!r}")
    kind, params, specs = None, {}, []
    i = 1
    while i < len(lines):
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        if parts[0] == "kind" and len(parts) == 2:
            kind = parts[1]
        elif parts[0] == "param" and len(parts) == 3:
            params[parts[1]] = parts[2]
        elif parts[0] == "array" and len(parts) >= 2:
            try:
                shape = tuple(int(d) for d in parts[2:])
            except ValueError:
                raise ShapeMismatchError(f"bad array shape line {lines[i - 1]!r}") from None
            if any(d < 0 for d in shape):
                raise ShapeMismatchError(f"negative dimension in {lines[i - 1]!r}")
            specs.append((parts[1], shape))
        elif parts[0] == "payload" and len(parts) == 2:
            n_bytes = int(parts[1])
            break
        else:
            raise ModelFormatError(f"unrecognized header line {lines[i - 1]!r}")
    else:
        raise TruncatedPayloadError("missing payload section")
    if kind is None:
        raise ModelFormatError("missing kind line")
    expected = sum(int(np.prod(s, dtype=np.int64)) for _, s in specs) * LE_F64.itemsize
    if expected != n_bytes:
        raise ShapeMismatchError(f"declared shapes need {expected} bytes, payload header says {n_bytes}")
    try:
        raw = base64.b64decode("".join(lines[i:]), validate=True)
    except ValueError as exc:
        raise TruncatedPayloadError(f"payload is not valid base64: {exc}") from None
    if len(raw) != n_bytes:
        raise TruncatedPayloadError(f"payload has {len(raw)} bytes, expected {n_bytes}")
    arrays, offset = {}, 0
    for name, shape in specs:
        count = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(raw, LE_F64, count, offset).reshape(shape).astype(float)
        offset += count * LE_F64.itemsize
    return kind, params, arrays


def _expect(arrays: dict, name: str, shape: tuple) -> np.ndarray:
    if name not in arrays:
        raise ShapeMismatchError(f"missing array {name!r}")
    if arrays[name].shape != shape:
        raise ShapeMismatchError(f"{name}: expected shape {shape}, found {arrays[name].shape}")
    return arrays[name]


# -- per-kind encoders -----------------------------------------------------

def dumps(model) -> str:
    if isinstance(model, MlpStudent):
        model = model.model_
    if isinstance(model, MlpModel):
        arrays = []
        for k, (W, b) in enumerate(zip(model.weights, model.biases)):
            arrays += [(f"W{k}", W), (f"b{k}", b)]
        return _encode("mlp", arrays, {"layers": len(model.weights)})
    if isinstance(model, NnqlStore):
        arrays = []
        for a in range(model.n_actions):
            keys, q = model.entries(a)
            arrays += [(f"keys{a}", keys), (f"q{a}", q)]
        return _encode("nnql", arrays, {"dim": model.dim, "actions": model.n_actions})
    if isinstance(model, PlaceClassifier):
        arrays = [("coef", model.coef_), ("intercept", model.intercept_),
                  ("mean", model.mean_), ("scale", model.scale_)]
        return _encode("place_classifier", arrays, {"n_classes": model.n_classes})
    raise TypeError(f"cannot serialize {type(model).__name__}")


def loads(text: str):
    kind, params, arrays = _decode(text)
    if kind == "mlp":
        n = int(params.get("layers", 0))
        if n < 1:
            raise ShapeMismatchError("mlp needs at least one layer")
        weights, biases = [], []
        for k in range(n):
            W = arrays.get(f"W{k}")
            if W is None or W.ndim != 2:
                raise ShapeMismatchError(f"W{k} must be a matrix")
            if weights and weights[-1].shape[1] != W.shape[0]:
                raise ShapeMismatchError(f"W{k} does not chain onto W{k - 1}")
            weights.append(W)
            biases.append(_expect(arrays, f"b{k}", (W.shape[1],)))
        return MlpModel(weights, biases)
    if kind == "nnql":
        dim, n_actions = int(params["dim"]), int(params["actions"])
        store = NnqlStore(dim, n_actions)
        for a in range(n_actions):
            q = arrays.get(f"q{a}")
            if q is None or q.ndim != 1:
                raise ShapeMismatchError(f"q{a} must be a vector")
            keys = _expect(arrays, f"keys{a}", (len(q), dim))
            for s, value in zip(keys, q):
                store.insert(s, a, float(value))
        store.counter = len(store)
        return store
    if kind == "place_classifier":
        n_classes = int(params["n_classes"])
        coef = arrays.get("coef")
        if coef is None or coef.ndim != 2 or coef.shape[1] != n_classes:
            raise ShapeMismatchError(f"coef must be (d, {n_classes})")
        d = coef.shape[0]
        clf = PlaceClassifier(n_classes=n_classes)
        clf.coef_ = coef
        clf.intercept_ = _expect(arrays, "intercept", (n_classes,))
        clf.mean_ = _expect(arrays, "mean", (d,))
        clf.scale_ = _expect(arrays, "scale", (d,))
        clf.classes_ = np.arange(n_classes)
        return clf
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(dumps(model), encoding="ascii")


def load_model(path):
    return loads(Path(path).read_text(encoding="ascii"))
