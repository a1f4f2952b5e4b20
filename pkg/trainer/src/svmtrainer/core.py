"""Training, export, and conformance checking.

Training follows the serving pipeline exactly: features are standardized
with the training set's column mean/std, a linear-kernel SVM with C = 1 is
fit on the standardized data, and the model ships with those stats so the
serving side normalizes identically. Accuracy is reported from stratified
10-fold cross-validation.

The conformance check compares this package's real-valued scoring against
the serving side's fixed-point integer scoring row by row. The two can
only disagree when a margin falls inside the quantization band (the
worst-case rounding error of the integer path), and the report lists
every such row.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold, cross_val_score
from sklearn.svm import SVC

from blindprofile.features import (
    LANDMARK_DIM,
    LANDMARK_FEATURE_NAMES,
    LANDMARK_SCHEMA,
    TEXT_DIM,
    TEXT_FEATURE_NAMES,
    TEXT_SCHEMA,
)
from blindprofile.models import (
    LABEL_VOCABULARY,
    SvmModel,
    clear_score,
    load_model_file,
    save_model_file,
)
from blindprofile.ring import RingParams


class TrainerError(Exception):
    pass


class BadSchema(TrainerError):
    """CSV header does not match a known feature schema."""


class DegenerateLabels(TrainerError):
    """Fewer than two classes present in the label column."""


# The exported "+" side per task, mirroring the serving fixtures.
POSITIVE_LABEL = {
    "age1": "under-27",
    "age2": "under-35",
    "age3": "44-plus",
    "gender": "female",
    "openness": "present",
    "conscientiousness": "present",
    "extraversion": "present",
    "agreeableness": "present",
    "neuroticism": "present",
}


@dataclass
class TrainingTable:
    schema: str
    features: np.ndarray  # (rows, dim) float64
    labels: list[str]


def load_table(path: str) -> TrainingTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BadSchema(f"{path}: empty file") from None
        rows = list(reader)
    if len(header) - 1 == TEXT_DIM and header[:-1] == list(TEXT_FEATURE_NAMES):
        schema = TEXT_SCHEMA
    elif len(header) - 1 == LANDMARK_DIM and header[:-1] == list(LANDMARK_FEATURE_NAMES):
        schema = LANDMARK_SCHEMA
    else:
        raise BadSchema(
            f"{path}: header must be the {TEXT_DIM} text or {LANDMARK_DIM} landmark "
            "feature names plus a final 'label' column"
        )
    if header[-1] != "label":
        raise BadSchema(f"{path}: last column must be 'label', got {header[-1]!r}")
    dim = len(header) - 1
    feats = np.empty((len(rows), dim), dtype=np.float64)
    labels = []
    for i, row in enumerate(rows):
        if len(row) != dim + 1:
            raise BadSchema(f"{path}: row {i + 2} has {len(row)} fields, want {dim + 1}")
        try:
            feats[i] = [float(v) for v in row[:-1]]
        except ValueError as exc:
            raise BadSchema(f"{path}: row {i + 2}: {exc}") from exc
        if not np.isfinite(feats[i]).all():
            raise BadSchema(f"{path}: row {i + 2} has non-finite values")
        labels.append(row[-1])
    return TrainingTable(schema=schema, features=feats, labels=labels)


@dataclass
class TrainingSummary:
    task: str
    rows: int
    dim: int
    cv_folds: int
    cv_accuracy: float
    out_path: str


def train_and_export(
    csv_path: str,
    task: str,
    out_path: str,
    seed: int = 0,
    frac_bits: int = 16,
    bound_bits: int = 24,
) -> TrainingSummary:
    if task not in POSITIVE_LABEL:
        raise TrainerError(f"unknown task {task!r}")
    table = load_table(csv_path)
    vocab = LABEL_VOCABULARY[task]
    present = set(table.labels)
    if len(present) < 2:
        raise DegenerateLabels(f"need both classes, found only {sorted(present)}")
    if not present <= vocab:
        raise BadSchema(f"labels {sorted(present - vocab)} not in task vocabulary {sorted(vocab)}")
    positive = POSITIVE_LABEL[task]
    y = np.array([1 if lab == positive else 0 for lab in table.labels])

    means = table.features.mean(axis=0)
    stds = table.features.std(axis=0)
    scaled = (table.features - means) / np.maximum(stds, 1e-9)

    svc = SVC(kernel="linear", C=1.0)
    folds = min(10, int(np.bincount(y).min()))
    if folds < 2:
        raise DegenerateLabels("a class has fewer than two rows")
    cv = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    accuracy = float(cross_val_score(svc, scaled, y, cv=cv).mean())
    svc.fit(scaled, y)

    weights = svc.coef_[0]
    bias = -float(svc.intercept_[0])  # margin = <w, x> - b
    (negative,) = vocab - {positive}
    model = SvmModel(
        id=f"trained-{task}",
        task=task,
        dim=scaled.shape[1],
        frac_bits=frac_bits,
        bound_bits=bound_bits,
        schema=table.schema,
        positive=positive,
        negative=negative,
        weights=tuple(float(w) for w in weights),
        bias=bias,
        means=tuple(float(v) for v in means),
        stds=tuple(float(v) for v in stds),
    )
    save_model_file(model, out_path)
    return TrainingSummary(
        task=task,
        rows=len(table.labels),
        dim=scaled.shape[1],
        cv_folds=folds,
        cv_accuracy=accuracy,
        out_path=out_path,
    )


@dataclass
class Disagreement:
    row: int
    real_margin: float
    integer_margin: int
    band: float


@dataclass
class AgreementReport:
    rows: int = 0
    agreeing: int = 0
    disagreements: list[Disagreement] = field(default_factory=list)

    @property
    def agreement(self) -> float | None:
        return self.agreeing / self.rows if self.rows else None

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "agreeing": self.agreeing,
            "agreement": self.agreement,
            "disagreements": [
                {
                    "row": d.row,
                    "real_margin": d.real_margin,
                    "integer_margin": d.integer_margin,
                    "quantization_band": d.band,
                }
                for d in self.disagreements
            ],
        }


def _quantization_band(x_enc: list[int], w_enc: list[int], ring: RingParams) -> float:
    """Worst-case |integer margin - real margin * 4^f| from rounding each
    factor by at most 1/2."""
    signed = lambda v: v - ring.q if v >= ring.half else v
    band = 0.5  # bias rounding
    for xe, we in zip(x_enc, w_enc):
        band += 0.5 * abs(signed(xe)) + 0.5 * abs(signed(we)) + 0.75
    return band


def score_check(model_path: str, csv_path: str, ell: int = 64) -> AgreementReport:
    """Real-domain labels vs the serving side's integer-domain labels."""
    from blindprofile.models import encode_features, encode_weights

    model = load_model_file(model_path)
    table = load_table(csv_path)
    if table.features.shape[0] == 0:
        return AgreementReport()
    if table.features.shape[1] != model.dim:
        raise BadSchema(
            f"model dim {model.dim} vs table dim {table.features.shape[1]}"
        )
    ring = RingParams(ell)
    means = np.array(model.means)
    stds = np.maximum(np.array(model.stds), 1e-9)
    w = np.array(model.weights)
    w_enc = encode_weights(model, ring)
    report = AgreementReport(rows=table.features.shape[0])
    scale_sq = float(1 << (2 * model.frac_bits))
    for i in range(report.rows):
        raw = [float(v) for v in table.features[i]]
        real_margin = float(((table.features[i] - means) / stds) @ w - model.bias)
        real_label = real_margin > 0
        integer = clear_score(model, raw, ring)
        if integer.positive == real_label:
            report.agreeing += 1
        else:
            band = _quantization_band(encode_features(model, raw, ring), w_enc, ring)
            report.disagreements.append(
                Disagreement(
                    row=i,
                    real_margin=real_margin,
                    integer_margin=integer.margin_encoded,
                    band=band,
                )
            )
            # a flip outside the band would mean a scoring bug, not rounding
            if abs(real_margin * scale_sq) > band:
                raise TrainerError(
                    f"row {i}: label flip outside the quantization band "
                    f"({real_margin * scale_sq:.1f} vs {band:.1f})"
                )
    return report
