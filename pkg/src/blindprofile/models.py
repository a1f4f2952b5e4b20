"""Server-side model bank: file format, validation, clear scoring.

A model file is one canonical JSON document (sorted keys, no spaces,
shortest round-trip float rendering) so that load -> save -> load is the
identity on bytes. Label semantics ride in the file: which side of the
hyperplane means what is data, not code.

Clear scoring works on the same fixed-point integers as the private
protocol (features normalized with the model's stats, then encoded at
2^frac_bits; the bias at 2^(2 frac_bits)), which makes it an exact
oracle for the private path. The real-valued margin is reported too,
but only for display.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

from .errors import DimensionMismatch, ParseError, ValidationError
from .features import (
    LANDMARK_DIM,
    LANDMARK_SCHEMA,
    TEXT_DIM,
    TEXT_SCHEMA,
    normalize,
)
from .ring import FixedPointParams, RingParams, fxp_encode

MODEL_FORMAT = "svm-model/1"

TASK_AGE1 = "age1"
TASK_AGE2 = "age2"
TASK_AGE3 = "age3"
TASK_GENDER = "gender"
TRAIT_TASKS = (
    "openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism",
)

# Canonical protocol schedule order; bundles are consumed in this order.
TASK_ORDER = (TASK_AGE1, TASK_AGE2, TASK_AGE3, TASK_GENDER) + TRAIT_TASKS

LABEL_VOCABULARY = {
    TASK_AGE1: {"under-27", "27-34"},
    TASK_AGE2: {"under-35", "35-plus"},
    TASK_AGE3: {"44-plus", "35-43"},
    TASK_GENDER: {"female", "male"},
    **{t: {"present", "absent"} for t in TRAIT_TASKS},
}

_TASK_SCHEMA = {
    TASK_AGE1: (LANDMARK_SCHEMA, LANDMARK_DIM),
    TASK_AGE2: (LANDMARK_SCHEMA, LANDMARK_DIM),
    TASK_AGE3: (LANDMARK_SCHEMA, LANDMARK_DIM),
    TASK_GENDER: (LANDMARK_SCHEMA, LANDMARK_DIM),
    **{t: (TEXT_SCHEMA, TEXT_DIM) for t in TRAIT_TASKS},
}


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


@dataclass(frozen=True)
class SvmModel:
    id: str
    task: str
    dim: int
    frac_bits: int
    bound_bits: int
    schema: str
    positive: str
    negative: str
    weights: tuple[float, ...]
    bias: float
    means: tuple[float, ...]
    stds: tuple[float, ...]

    @property
    def fxp(self) -> FixedPointParams:
        return FixedPointParams(frac_bits=self.frac_bits, bound_bits=self.bound_bits)

    def label_for(self, positive_bit: int) -> str:
        return self.positive if positive_bit else self.negative

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "id": self.id,
            "task": self.task,
            "dim": self.dim,
            "frac_bits": self.frac_bits,
            "bound_bits": self.bound_bits,
            "schema": self.schema,
            "labels": {"positive": self.positive, "negative": self.negative},
            "weights": list(self.weights),
            "bias": self.bias,
            "norm": {"means": list(self.means), "stds": list(self.stds)},
        }

    def to_bytes(self) -> bytes:
        return canonical_json(self.to_dict()) + b"\n"


def validate_model(m: SvmModel) -> None:
    if m.task not in TASK_ORDER:
        raise ValidationError(f"unknown task {m.task!r}")
    schema, dim = _TASK_SCHEMA[m.task]
    if m.schema != schema:
        raise ValidationError(f"task {m.task} requires schema {schema}, got {m.schema}")
    if m.dim != dim:
        raise ValidationError(f"task {m.task} requires dim {dim}, got {m.dim}")
    for name, vec in (("weights", m.weights), ("means", m.means), ("stds", m.stds)):
        if len(vec) != m.dim:
            raise ValidationError(f"{name} has {len(vec)} entries for dim {m.dim}")
        if not all(math.isfinite(v) for v in vec):
            raise ValidationError(f"{name} contains non-finite values")
    if not math.isfinite(m.bias):
        raise ValidationError("bias is not finite")
    if not 1 <= m.frac_bits < m.bound_bits <= 62:
        raise ValidationError(f"bad encoding parameters f={m.frac_bits} b={m.bound_bits}")
    vocab = LABEL_VOCABULARY[m.task]
    if {m.positive, m.negative} != vocab:
        raise ValidationError(
            f"task {m.task} labels must be {sorted(vocab)}, got "
            f"{[m.positive, m.negative]}"
        )
    bound = 1 << m.bound_bits
    scale = 1 << m.frac_bits
    for w in m.weights:
        if abs(_round_half_away(w * scale)) > bound:
            raise ValidationError(f"weight {w} exceeds the encoded bound")
    if abs(_round_half_away(m.bias * scale * scale)) > bound * bound:
        raise ValidationError(f"bias {m.bias} exceeds the encoded bound")


def _round_half_away(x: float) -> int:
    m = math.floor(abs(x) + 0.5)
    return m if x >= 0 else -m


def model_from_dict(doc: dict) -> SvmModel:
    try:
        if doc["format"] != MODEL_FORMAT:
            raise ParseError(f"unsupported model format {doc['format']!r}")
        model = SvmModel(
            id=str(doc["id"]),
            task=str(doc["task"]),
            dim=int(doc["dim"]),
            frac_bits=int(doc["frac_bits"]),
            bound_bits=int(doc["bound_bits"]),
            schema=str(doc["schema"]),
            positive=str(doc["labels"]["positive"]),
            negative=str(doc["labels"]["negative"]),
            weights=tuple(float(w) for w in doc["weights"]),
            bias=float(doc["bias"]),
            means=tuple(float(v) for v in doc["norm"]["means"]),
            stds=tuple(float(v) for v in doc["norm"]["stds"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed model document: {exc}") from exc
    validate_model(model)
    return model


def load_model_file(path: str) -> SvmModel:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read model {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def save_model_file(model: SvmModel, path: str) -> None:
    validate_model(model)
    with open(path, "wb") as fh:
        fh.write(model.to_bytes())


def encode_weights(model: SvmModel, ring: RingParams) -> list[int]:
    fxp = model.fxp
    return [fxp_encode(w, fxp, ring) for w in model.weights]


def encode_bias(model: SvmModel, ring: RingParams) -> int:
    """Bias lives at scale 2^(2 frac_bits) to match the product scale."""
    doubled = FixedPointParams(
        frac_bits=2 * model.frac_bits, bound_bits=2 * model.bound_bits
    )
    return fxp_encode(model.bias, doubled, ring)


def encode_features(model, features: list[float], ring: RingParams) -> list[int]:
    """Normalize with the model's stats, then encode; accepts anything with
    dim/frac_bits/bound_bits/means/stds (server models or catalog entries)."""
    if len(features) != model.dim:
        raise DimensionMismatch(f"model {model.id} wants {model.dim} features, got {len(features)}")
    fxp = FixedPointParams(frac_bits=model.frac_bits, bound_bits=model.bound_bits)
    return [fxp_encode(v, fxp, ring) for v in normalize(features, list(model.means), list(model.stds))]


@dataclass(frozen=True)
class ClearScore:
    positive: bool
    margin_encoded: int
    margin_real: float
    label: str


def clear_score(model: SvmModel, features: list[float], ring: RingParams) -> ClearScore:
    """Margin on the encoded integers; the label is + iff strictly positive."""
    x = encode_features(model, features, ring)
    a = encode_weights(model, ring)
    signed = [v - ring.q if v >= ring.half else v for v in x]
    signed_w = [v - ring.q if v >= ring.half else v for v in a]
    margin = sum(p * q for p, q in zip(signed, signed_w))
    b = encode_bias(model, ring)
    margin -= b - ring.q if b >= ring.half else b
    normalized = normalize(features, list(model.means), list(model.stds))
    real = sum(p * q for p, q in zip(normalized, model.weights)) - model.bias
    positive = margin > 0
    return ClearScore(positive, margin, real, model.label_for(int(positive)))


class ModelBank:
    """Immutable collection of models, ordered by the protocol schedule."""

    def __init__(self, models: list[SvmModel]):
        seen = set()
        for m in models:
            if m.id in seen:
                raise ValidationError(f"duplicate model id {m.id!r}")
            seen.add(m.id)
        self.models = sorted(models, key=lambda m: (TASK_ORDER.index(m.task), m.id))

    @classmethod
    def load_dir(cls, path: str) -> "ModelBank":
        if not os.path.isdir(path):
            raise ParseError(f"model bank directory {path} does not exist")
        models = []
        for name in sorted(os.listdir(path)):
            if name.endswith(".json"):
                models.append(load_model_file(os.path.join(path, name)))
        return cls(models)

    def __len__(self) -> int:
        return len(self.models)

    def for_task(self, task: str) -> SvmModel:
        for m in self.models:
            if m.task == task:
                return m
        raise ValidationError(f"no model for task {task!r}")

    @property
    def complete(self) -> bool:
        """True when exactly one model exists for each of the nine tasks."""
        tasks = [m.task for m in self.models]
        return sorted(tasks) == sorted(TASK_ORDER)

    def catalog(self) -> list[dict]:
        """Public per-model metadata: everything the client may learn."""
        return [
            {
                "id": m.id,
                "task": m.task,
                "dim": m.dim,
                "frac_bits": m.frac_bits,
                "bound_bits": m.bound_bits,
                "schema": m.schema,
                "labels": {"positive": m.positive, "negative": m.negative},
                "norm": {"means": list(m.means), "stds": list(m.stds)},
            }
            for m in self.models
        ]

    def catalog_bytes(self) -> bytes:
        return canonical_json({"models": self.catalog()})

    def catalog_hash(self) -> bytes:
        return hashlib.sha256(self.catalog_bytes()).digest()
