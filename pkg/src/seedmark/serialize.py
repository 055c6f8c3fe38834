"""Versioned JSON artifacts for models, key-sets, and verifiers.

Float arrays are stored as C99 hex strings (float.hex), so round-trips are
bit-exact regardless of decimal formatting. Every artifact carries a
`format` name and integer `version`; loaders reject anything newer than
they understand.
"""

import json

import numpy as np

from .errors import FormatError
from .nnet import Activation, Dense, Model, ModelSpec, Provenance

MODEL_FORMAT = "seedmark-model"
VERSION = 1


def _encode_array(a: np.ndarray):
    if a.ndim == 1:
        return [float(v).hex() for v in a]
    return [_encode_array(row) for row in a]


def _decode_array(data, shape_hint=None) -> np.ndarray:
    def dec(node):
        if isinstance(node, list):
            return [dec(n) for n in node]
        return float.fromhex(node)

    try:
        return np.array(dec(data), dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"bad float encoding: {exc}") from exc


def _check_envelope(doc, expected_format):
    if not isinstance(doc, dict) or doc.get("format") != expected_format:
        raise FormatError(f"not a {expected_format} artifact")
    version = doc.get("version")
    if version != VERSION:
        raise FormatError(
            f"unsupported {expected_format} version {version!r} (supported: {VERSION})"
        )


def spec_to_obj(spec: ModelSpec):
    layers = []
    for layer in spec.layers:
        if isinstance(layer, Dense):
            layers.append(["dense", layer.in_dim, layer.out_dim])
        else:
            layers.append(["activation", layer.kind])
    return {"layers": layers, "output_classes": spec.output_classes}


def spec_from_obj(obj) -> ModelSpec:
    try:
        layers = []
        for entry in obj["layers"]:
            if entry[0] == "dense":
                layers.append(Dense(int(entry[1]), int(entry[2])))
            elif entry[0] == "activation":
                layers.append(Activation(entry[1]))
            else:
                raise FormatError(f"unknown layer tag {entry[0]!r}")
        return ModelSpec(tuple(layers), int(obj["output_classes"]))
    except (KeyError, IndexError, TypeError) as exc:
        raise FormatError(f"malformed model spec: {exc}") from exc


def dump_model(model: Model) -> str:
    doc = {
        "format": MODEL_FORMAT,
        "version": VERSION,
        "spec": spec_to_obj(model.spec),
        "provenance": {
            "seed": model.provenance.seed,
            "kind": model.provenance.kind,
            "history": list(model.provenance.history),
        },
        "weights": [
            {"w": _encode_array(w), "b": _encode_array(b)} for w, b in model.weights
        ],
    }
    return json.dumps(doc, indent=1)


def parse_model(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"not valid JSON: {exc}") from exc
    _check_envelope(doc, MODEL_FORMAT)
    spec = spec_from_obj(doc.get("spec", {}))
    try:
        weights = tuple(
            (_decode_array(entry["w"]), _decode_array(entry["b"]))
            for entry in doc["weights"]
        )
        prov_obj = doc["provenance"]
        prov = Provenance(
            int(prov_obj["seed"]),
            prov_obj["kind"],
            tuple(prov_obj.get("history", ())),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed model artifact: {exc}") from exc
    try:
        return Model(spec, weights, prov)
    except Exception as exc:
        raise FormatError(f"inconsistent model artifact: {exc}") from exc


def save_model(model: Model, path):
    with open(path, "w") as fh:
        fh.write(dump_model(model))


def load_model(path) -> Model:
    with open(path) as fh:
        return parse_model(fh.read())


def model_digest(model: Model) -> str:
    """Short stable identifier: hash of the serialized spec + weights."""
    import hashlib

    payload = json.dumps(
        {
            "spec": spec_to_obj(model.spec),
            "weights": [
                {"w": _encode_array(w), "b": _encode_array(b)} for w, b in model.weights
            ],
        }
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
