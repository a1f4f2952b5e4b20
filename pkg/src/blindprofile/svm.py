"""Private SVM classification and the profile session orchestration.

One profile session runs nine SVM pipelines over one multiplexed
connection (sub-session id = model index in schedule order): three age
models, one gender model, five trait models. Each pipeline is inner
product -> bit decomposition -> comparison, leaving each party a share of
the label bit.

Openings are selective: the middle age model's bit is revealed to both
parties (it steers which half of the cascade continues; an inherent and
documented leak of the cascade design), then exactly one of the two side
age bits and all non-age bits are revealed to the client only, as RESULT
frames from the server. The third age result share is discarded unopened.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum

from .errors import HandshakeMismatch, Overflow, ParseError, ProtocolError
from .features import LANDMARK_SCHEMA, TEXT_SCHEMA
from .ring import FixedPointParams, RingParams
from .models import (
    ModelBank,
    TASK_AGE1,
    TASK_AGE2,
    TASK_AGE3,
    TASK_GENDER,
    TASK_ORDER,
    TRAIT_TASKS,
    SvmModel,
    clear_score,
    encode_bias,
    encode_features,
    encode_weights,
)
from .protocols import greater_than_const, shared_inner_product
from .transport import CLEAR_FEATURES, CLEAR_RESULT, Session
from .triples import BASIC


class AgeBracket(Enum):
    B1 = "7-26"
    B2 = "27-34"
    B3 = "35-43"
    B4 = "44-101"


@dataclass(frozen=True)
class ProfileResult:
    gender: str
    age: AgeBracket
    openness: bool
    conscientiousness: bool
    extraversion: bool
    agreeableness: bool
    neuroticism: bool

    def trait_map(self) -> dict[str, bool]:
        return {t: getattr(self, t) for t in TRAIT_TASKS}


@dataclass(frozen=True)
class CatalogEntry:
    """Public model metadata shipped to the client in the handshake."""

    id: str
    task: str
    dim: int
    frac_bits: int
    bound_bits: int
    schema: str
    positive: str
    negative: str
    means: tuple[float, ...]
    stds: tuple[float, ...]

    def label_for(self, positive_bit: int) -> str:
        return self.positive if positive_bit else self.negative


def parse_catalog(data: bytes) -> list[CatalogEntry]:
    import json

    try:
        doc = json.loads(data)
        entries = [
            CatalogEntry(
                id=str(m["id"]),
                task=str(m["task"]),
                dim=int(m["dim"]),
                frac_bits=int(m["frac_bits"]),
                bound_bits=int(m["bound_bits"]),
                schema=str(m["schema"]),
                positive=str(m["labels"]["positive"]),
                negative=str(m["labels"]["negative"]),
                means=tuple(float(v) for v in m["norm"]["means"]),
                stds=tuple(float(v) for v in m["norm"]["stds"]),
            )
            for m in doc["models"]
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed catalog: {exc}") from exc
    return entries


def require_profile_catalog(entries: list[CatalogEntry]) -> list[CatalogEntry]:
    """A profile session needs exactly one model per task, schedule-ordered."""
    if [e.task for e in entries] != list(TASK_ORDER):
        raise HandshakeMismatch(
            f"catalog tasks {[e.task for e in entries]} do not form a full profile"
        )
    return entries


def _select_raw(entry, landmarks: list[float], text_vec: list[float]) -> list[float]:
    if entry.schema == LANDMARK_SCHEMA:
        return landmarks
    if entry.schema == TEXT_SCHEMA:
        return text_vec
    raise HandshakeMismatch(f"unknown feature schema {entry.schema!r}")


# --- one SVM pipeline (both ends) ---

def svm_bit_share_client(
    session: Session, sub: int, x_enc: list[int], variant: str = BASIC
) -> int:
    """Client side: features are the shared X as (x, 0); weights as (0, a)."""
    ip = shared_inner_product(session, sub, x_enc, [0] * len(x_enc))
    return greater_than_const(session, sub, ip, 0, variant)


def svm_bit_share_server(
    session: Session, sub: int, weights_enc: list[int], bias_enc: int, variant: str = BASIC
) -> int:
    ip = shared_inner_product(session, sub, [0] * len(weights_enc), weights_enc)
    margin = (ip - bias_enc) & session.ring.mask
    return greater_than_const(session, sub, margin, 0, variant)


# --- cascade logic (shared by clear and private paths) ---

def bracket_from_labels(age2_label: str, side_label: str) -> AgeBracket:
    if age2_label == "under-35":
        return AgeBracket.B1 if side_label == "under-27" else AgeBracket.B2
    return AgeBracket.B4 if side_label == "44-plus" else AgeBracket.B3


def cascade_winner(age2_label: str) -> str:
    """Which side model gets its result opened."""
    return TASK_AGE1 if age2_label == "under-35" else TASK_AGE3


def profile_from_labels(labels: dict[str, str], age2_label: str, side_label: str) -> ProfileResult:
    traits = {t: labels[t] == "present" for t in TRAIT_TASKS}
    return ProfileResult(
        gender=labels[TASK_GENDER],
        age=bracket_from_labels(age2_label, side_label),
        **traits,
    )


# --- age cascade: selective opening over three computed result shares ---

def age_cascade_client(
    session: Session,
    sub_of: dict[str, int],
    entries_by_sub: dict[int, CatalogEntry],
    w_shares: dict[int, int],
) -> AgeBracket:
    """Open the middle bit to both parties, then receive exactly one side
    bit; the third result share is discarded unopened."""
    age2_sub = sub_of[TASK_AGE2]
    age2_bit = w_shares[age2_sub] ^ session.exchange_result_bit(age2_sub, w_shares[age2_sub])
    age2_label = entries_by_sub[age2_sub].label_for(age2_bit)
    winner_sub = sub_of[cascade_winner(age2_label)]
    side_bit = w_shares[winner_sub] ^ session.recv_result_bit(winner_sub)
    side_label = entries_by_sub[winner_sub].label_for(side_bit)
    return bracket_from_labels(age2_label, side_label)


def age_cascade_server(
    session: Session,
    sub_of: dict[str, int],
    models_by_sub: dict[int, SvmModel],
    w_shares: dict[int, int],
) -> None:
    age2_sub = sub_of[TASK_AGE2]
    age2_bit = w_shares[age2_sub] ^ session.exchange_result_bit(age2_sub, w_shares[age2_sub])
    age2_label = models_by_sub[age2_sub].label_for(age2_bit)
    winner_sub = sub_of[cascade_winner(age2_label)]
    session.send_result_bit(winner_sub, w_shares[winner_sub])


# --- private profile, client side ---

def run_profile_client(
    session: Session,
    catalog: list[CatalogEntry],
    landmarks: list[float],
    text_vec: list[float],
    variant: str = BASIC,
) -> ProfileResult:
    entries = require_profile_catalog(catalog)
    sub_of = {e.task: i for i, e in enumerate(entries)}

    w_shares: dict[int, int] = {}
    for sub, entry in enumerate(entries):
        raw = _select_raw(entry, landmarks, text_vec)
        x_enc = encode_features(entry, raw, session.ring)
        w_shares[sub] = svm_bit_share_client(session, sub, x_enc, variant)

    bracket = age_cascade_client(session, sub_of, dict(enumerate(entries)), w_shares)

    labels: dict[str, str] = {}
    for task in (TASK_GENDER, *TRAIT_TASKS):
        sub = sub_of[task]
        bit = w_shares[sub] ^ session.recv_result_bit(sub)
        labels[task] = entries[sub].label_for(bit)

    session.send_bye()
    session.recv_bye()
    traits = {t: labels[t] == "present" for t in TRAIT_TASKS}
    return ProfileResult(gender=labels[TASK_GENDER], age=bracket, **traits)


# --- private profile, server side ---

def run_profile_server(
    session: Session, bank: ModelBank, variant: str = BASIC
) -> None:
    models = bank.models
    sub_of = {m.task: i for i, m in enumerate(models)}

    w_shares: dict[int, int] = {}
    for sub, model in enumerate(models):
        weights = encode_weights(model, session.ring)
        bias = encode_bias(model, session.ring)
        w_shares[sub] = svm_bit_share_server(session, sub, weights, bias, variant)

    age_cascade_server(session, sub_of, dict(enumerate(models)), w_shares)

    for task in (TASK_GENDER, *TRAIT_TASKS):
        sub = sub_of[task]
        session.send_result_bit(sub, w_shares[sub])

    session.recv_bye()
    session.send_bye()


# --- clear mode (demo baseline over the same connection) ---

def send_clear_features(session: Session, landmarks: list[float], text_vec: list[float]) -> None:
    payload = struct.pack(">H", len(landmarks))
    payload += struct.pack(f">{len(landmarks)}d", *landmarks)
    payload += struct.pack(">H", len(text_vec))
    payload += struct.pack(f">{len(text_vec)}d", *text_vec)
    session._send(CLEAR_FEATURES, 0, payload)


def recv_clear_features(session: Session) -> tuple[list[float], list[float]]:
    frame = session._recv_for(0, {CLEAR_FEATURES})
    (n1,) = struct.unpack_from(">H", frame.payload)
    off = 2
    landmarks = list(struct.unpack_from(f">{n1}d", frame.payload, off))
    off += 8 * n1
    (n2,) = struct.unpack_from(">H", frame.payload, off)
    off += 2
    text_vec = list(struct.unpack_from(f">{n2}d", frame.payload, off))
    return landmarks, text_vec


def send_clear_results(session: Session, scored: list[tuple[str, int, float]]) -> None:
    payload = struct.pack(">B", len(scored))
    for task, bit, margin in scored:
        raw = task.encode()
        payload += struct.pack(">B", len(raw)) + raw
        payload += struct.pack(">Bd", bit & 1, margin)
    session._send(CLEAR_RESULT, 0, payload)


def recv_clear_results(session: Session) -> list[tuple[str, int, float]]:
    frame = session._recv_for(0, {CLEAR_RESULT})
    (count,) = struct.unpack_from(">B", frame.payload)
    off = 1
    out = []
    for _ in range(count):
        (tlen,) = struct.unpack_from(">B", frame.payload, off)
        off += 1
        task = frame.payload[off : off + tlen].decode()
        off += tlen
        bit, margin = struct.unpack_from(">Bd", frame.payload, off)
        off += 9
        out.append((task, bit, margin))
    return out


def run_clear_client(
    session: Session,
    catalog: list[CatalogEntry],
    landmarks: list[float],
    text_vec: list[float],
) -> tuple[ProfileResult, dict[str, float]]:
    entries = require_profile_catalog(catalog)
    send_clear_features(session, landmarks, text_vec)
    scored = recv_clear_results(session)
    if [task for task, _, _ in scored] != list(TASK_ORDER):
        raise ProtocolError("clear results do not cover the full profile")
    by_task = {task: bit for task, bit, _ in scored}
    margins = {task: margin for task, _, margin in scored}
    entry_of = {e.task: e for e in entries}
    labels = {t: entry_of[t].label_for(by_task[t]) for t in TASK_ORDER}
    age2_label = labels[TASK_AGE2]
    side_label = labels[cascade_winner(age2_label)]
    return profile_from_labels(labels, age2_label, side_label), margins


def run_clear_server(session: Session, bank: ModelBank) -> None:
    landmarks, text_vec = recv_clear_features(session)
    scored = []
    for model in bank.models:
        raw = _select_raw(model, landmarks, text_vec)
        score = clear_score(model, raw, session.ring)
        scored.append((model.task, int(score.positive), score.margin_real))
    send_clear_results(session, scored)


def clear_profile_from_bank(
    bank: ModelBank, landmarks: list[float], text_vec: list[float], ring
) -> ProfileResult:
    """Plaintext oracle: the decision tree over the nine clear scores."""
    labels = {}
    for model in bank.models:
        raw = _select_raw(model, landmarks, text_vec)
        labels[model.task] = clear_score(model, raw, ring).label
    age2_label = labels[TASK_AGE2]
    side_label = labels[cascade_winner(age2_label)]
    return profile_from_labels(labels, age2_label, side_label)
