"""Event bundle model: wire-format parsing, validation, and label canonicalization.

A bundle file is UTF-8 text: the schema version line ``mcs-bundle/1`` followed by
one JSON event record per line. Parsed bundles are immutable and safe to share
across threads; every downstream module treats events as read-only.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import BundleError, DanglingReference, DimensionMismatch, SchemaError

log = logging.getLogger(__name__)

SCHEMA_VERSION = "mcs-bundle/1"

# Embeddings are produced unit-normalized; anything further out than this is a
# producer bug and must fail loudly rather than be renormalized away.
UNIT_NORM_TOL = 1e-4

# Absolute slack when checking boxes against image bounds, so that a box whose
# x + w lands one rounding step past the edge after clamping is not flagged.
_BOUNDS_EPS = 1e-6

# Machine-readable validation codes.
DEGENERATE_BBOX = "DEGENERATE_BBOX"
BBOX_OUT_OF_BOUNDS = "BBOX_OUT_OF_BOUNDS"
DUPLICATE_OBJECT_ID = "DUPLICATE_OBJECT_ID"
EMPTY_LABEL = "EMPTY_LABEL"
DANGLING_REFERENCE = "DANGLING_REFERENCE"
EMPTY_REGION_TEXT = "EMPTY_REGION_TEXT"
EMBEDDING_NOT_UNIT = "EMBEDDING_NOT_UNIT"
EMBEDDING_DIM_MISMATCH = "EMBEDDING_DIM_MISMATCH"
CONFIDENCE_OUT_OF_RANGE = "CONFIDENCE_OUT_OF_RANGE"
EMPTY_QUESTION = "EMPTY_QUESTION"
EMPTY_GOLD_ANSWER = "EMPTY_GOLD_ANSWER"
NONPOSITIVE_IMAGE_DIM = "NONPOSITIVE_IMAGE_DIM"

ALL_VIOLATION_CODES = (
    DEGENERATE_BBOX,
    BBOX_OUT_OF_BOUNDS,
    DUPLICATE_OBJECT_ID,
    EMPTY_LABEL,
    DANGLING_REFERENCE,
    EMPTY_REGION_TEXT,
    EMBEDDING_NOT_UNIT,
    EMBEDDING_DIM_MISMATCH,
    CONFIDENCE_OUT_OF_RANGE,
    EMPTY_QUESTION,
    EMPTY_GOLD_ANSWER,
    NONPOSITIVE_IMAGE_DIM,
)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in absolute pixels, top-left origin."""

    x: float
    y: float
    w: float
    h: float

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class ObjectAnnotation:
    id: str
    label: str
    bbox: BoundingBox


@dataclass(frozen=True)
class RelationshipTriplet:
    subject_id: str
    predicate: str
    object_id: str


@dataclass(frozen=True, eq=False)
class RegionDescription:
    text: str
    bbox: BoundingBox
    embedding: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RegionDescription):
            return NotImplemented
        return (
            self.text == other.text
            and self.bbox == other.bbox
            and np.array_equal(self.embedding, other.embedding)
        )


@dataclass(frozen=True)
class QaRecord:
    question: str
    gold_answer: str
    predicted_answer: str  # may be empty: the model abstained


@dataclass(frozen=True)
class Detection:
    label: str
    bbox: BoundingBox
    confidence: float


@dataclass(frozen=True, eq=False)
class MultimodalEvent:
    """One image's records across modalities; the unit of scoring."""

    event_id: str
    image_width: float
    image_height: float
    image_embedding: np.ndarray
    objects: tuple[ObjectAnnotation, ...]
    relationships: tuple[RelationshipTriplet, ...]
    regions: tuple[RegionDescription, ...]
    qa: tuple[QaRecord, ...]
    detections: tuple[Detection, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultimodalEvent):
            return NotImplemented
        return (
            self.event_id == other.event_id
            and self.image_width == other.image_width
            and self.image_height == other.image_height
            and np.array_equal(self.image_embedding, other.image_embedding)
            and self.objects == other.objects
            and self.relationships == other.relationships
            and self.regions == other.regions
            and self.qa == other.qa
            and self.detections == other.detections
        )


def _canon(label: str) -> str:
    return label.strip().lower()


@dataclass(frozen=True)
class LabelMap:
    """Total raw-to-canonical label lookup; unmapped labels pass through.

    Keys and values are trimmed and lowercased at construction, and chained
    entries (a -> b, b -> c) are resolved so every value is a fixed point of
    :func:`normalize_label`. A genuine cycle is a construction error.
    """

    entries: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        canon = {_canon(k): _canon(v) for k, v in self.entries.items()}
        resolved: dict[str, str] = {}
        for key in canon:
            chain = [key]
            cur = key
            while cur in canon and canon[cur] != cur:
                cur = canon[cur]
                if cur in chain:
                    raise ValueError(f"label map cycle: {' -> '.join(chain + [cur])}")
                chain.append(cur)
            target = canon[cur] if cur in canon else cur
            for link in chain:
                if link != target:
                    resolved[link] = target
        object.__setattr__(self, "entries", resolved)

    def canonical(self, raw: str) -> str:
        c = _canon(raw)
        return self.entries.get(c, c)


@dataclass(frozen=True)
class EventBundle:
    events: tuple[MultimodalEvent, ...]
    embedding_dim: int
    label_map: LabelMap = field(default_factory=LabelMap)

    def __post_init__(self):
        seen = set()
        for e in self.events:
            if e.event_id in seen:
                raise ValueError(f"duplicate event_id {e.event_id!r}")
            seen.add(e.event_id)
            if e.image_embedding.shape[0] != self.embedding_dim:
                raise ValueError(
                    f"event {e.event_id!r} embedding dimension "
                    f"{e.image_embedding.shape[0]} != bundle dimension {self.embedding_dim}"
                )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> tuple[str, ...]:
        return tuple(v.code for v in self.violations)


# ---------------------------------------------------------------------------
# normalization and entity sets
# ---------------------------------------------------------------------------


def normalize_label(raw: str, label_map: LabelMap) -> str:
    """Lowercase, trim, then map; unmapped labels pass through unchanged."""
    return label_map.canonical(raw)


def entity_set(event: MultimodalEvent, label_map: LabelMap) -> set[str]:
    """Deduplicated canonical labels over the event's object annotations."""
    return {normalize_label(o.label, label_map) for o in event.objects}


def detected_set(
    event: MultimodalEvent, label_map: LabelMap, conf_threshold: float
) -> set[str]:
    """Canonical labels of detections at or above the confidence threshold."""
    if not 0.0 <= conf_threshold <= 1.0:
        raise ValueError("conf_threshold must lie in [0, 1]")
    return {
        normalize_label(d.label, label_map)
        for d in event.detections
        if d.confidence >= conf_threshold
    }


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def _embedding_norm(vec: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(vec, dtype=np.float64)))


def validate_event(event: MultimodalEvent) -> ValidationReport:
    """Check every typed invariant; violations are data, not exceptions."""
    out: list[Violation] = []

    def bad(code: str, message: str) -> None:
        out.append(Violation(code, message))

    # conditions are written negated so NaN coordinates fail them too
    if not (event.image_width > 0 and event.image_height > 0):
        bad(
            NONPOSITIVE_IMAGE_DIM,
            f"image dimensions {event.image_width} x {event.image_height} must be positive",
        )

    def check_bbox(b: BoundingBox, where: str) -> None:
        if not (b.w > 0 and b.h > 0):
            bad(DEGENERATE_BBOX, f"{where}: bbox has nonpositive extent ({b.w} x {b.h})")
            return
        if not (
            b.x >= -_BOUNDS_EPS
            and b.y >= -_BOUNDS_EPS
            and b.x2 <= event.image_width + _BOUNDS_EPS
            and b.y2 <= event.image_height + _BOUNDS_EPS
        ):
            bad(BBOX_OUT_OF_BOUNDS, f"{where}: bbox ({b.x}, {b.y}, {b.w}, {b.h}) exceeds image bounds")

    def check_embedding(vec: np.ndarray, where: str) -> None:
        norm = _embedding_norm(vec)
        if not abs(norm - 1.0) <= UNIT_NORM_TOL:
            bad(EMBEDDING_NOT_UNIT, f"{where}: embedding not unit-norm (|v| = {norm:.6g})")
        if vec.shape[0] != event.image_embedding.shape[0]:
            bad(
                EMBEDDING_DIM_MISMATCH,
                f"{where}: embedding dimension {vec.shape[0]} != image dimension "
                f"{event.image_embedding.shape[0]}",
            )

    check_embedding(event.image_embedding, "image")

    seen_ids: set[str] = set()
    dup_reported: set[str] = set()
    for obj in event.objects:
        if obj.id in seen_ids and obj.id not in dup_reported:
            bad(DUPLICATE_OBJECT_ID, f"object id {obj.id!r} appears more than once")
            dup_reported.add(obj.id)
        seen_ids.add(obj.id)
        if not obj.label.strip():
            bad(EMPTY_LABEL, f"object {obj.id!r} has an empty label")
        check_bbox(obj.bbox, f"object {obj.id!r}")

    for trip in event.relationships:
        for ref in (trip.subject_id, trip.object_id):
            if ref not in seen_ids:
                bad(
                    DANGLING_REFERENCE,
                    f"relationship ({trip.subject_id!r}, {trip.predicate!r}, "
                    f"{trip.object_id!r}) references missing object id {ref!r}",
                )

    for i, region in enumerate(event.regions):
        if not region.text.strip():
            bad(EMPTY_REGION_TEXT, f"region {i} has empty text")
        check_bbox(region.bbox, f"region {i}")
        check_embedding(region.embedding, f"region {i}")

    for i, qa in enumerate(event.qa):
        if not qa.question.strip():
            bad(EMPTY_QUESTION, f"qa {i} has an empty question")
        if not qa.gold_answer.strip():
            bad(EMPTY_GOLD_ANSWER, f"qa {i} has an empty gold answer")

    for i, det in enumerate(event.detections):
        if not 0.0 <= det.confidence <= 1.0:
            bad(CONFIDENCE_OUT_OF_RANGE, f"detection {i} confidence {det.confidence} outside [0, 1]")
        check_bbox(det.bbox, f"detection {i}")

    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# wire format
# ---------------------------------------------------------------------------


def _require(obj: dict, key: str, line: int, path: str = "") -> object:
    if key not in obj:
        raise SchemaError(f"missing field {path + key!r}", line=line)
    return obj[key]


def _as_str(value: object, name: str, line: int) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"field {name!r} must be a string", line=line)
    return value


def _as_real(value: object, name: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"field {name!r} must be a number", line=line)
    return float(value)


def _as_id(value: object, name: str, line: int) -> str:
    if isinstance(value, bool):
        raise SchemaError(f"field {name!r} must be a string or integer id", line=line)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return value
    raise SchemaError(f"field {name!r} must be a string or integer id", line=line)


def _as_list(value: object, name: str, line: int) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"field {name!r} must be an array", line=line)
    return value


def _as_dict(value: object, name: str, line: int) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"field {name!r} must be an object", line=line)
    return value


def _bbox_from(value: object, name: str, line: int) -> BoundingBox:
    arr = _as_list(value, name, line)
    if len(arr) != 4:
        raise SchemaError(f"field {name!r} must be [x, y, w, h]", line=line)
    x, y, w, h = (_as_real(v, name, line) for v in arr)
    return BoundingBox(x, y, w, h)


def _embedding_from(value: object, name: str, line: int) -> np.ndarray:
    arr = _as_list(value, name, line)
    if not arr:
        raise SchemaError(f"field {name!r} must be a non-empty array of reals", line=line)
    vec = np.asarray([_as_real(v, name, line) for v in arr], dtype=np.float32)
    if not np.all(np.isfinite(vec)):
        raise SchemaError(f"field {name!r} contains non-finite values", line=line)
    vec.setflags(write=False)
    return vec


def _clamp_bbox(b: BoundingBox, width: float, height: float) -> BoundingBox:
    """Clip a box to the image rectangle, preserving it if already inside.

    Degenerate or fully-outside boxes are returned unchanged so validation can
    attribute the right code to them.
    """
    if b.w <= 0 or b.h <= 0:
        return b
    x1 = min(max(b.x, 0.0), width)
    y1 = min(max(b.y, 0.0), height)
    x2 = min(max(b.x2, 0.0), width)
    y2 = min(max(b.y2, 0.0), height)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        return b
    if (x1, y1, x2 - x1, y2 - y1) == (b.x, b.y, b.w, b.h):
        return b
    return BoundingBox(x1, y1, x2 - x1, y2 - y1)


def _reject_constant(token: str):
    # Infinity/NaN are json-module extensions, not wire-format reals
    raise ValueError(f"non-finite number {token!r}")


def _event_from_json(text: str, line: int) -> MultimodalEvent:
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except ValueError as err:
        raise SchemaError(f"invalid JSON: {err}", line=line) from None
    if not isinstance(obj, dict):
        raise SchemaError("event record must be a JSON object", line=line)

    event_id = _as_str(_require(obj, "event_id", line), "event_id", line)
    image = _as_dict(_require(obj, "image", line), "image", line)
    width = _as_real(_require(image, "width", line, "image."), "image.width", line)
    height = _as_real(_require(image, "height", line, "image."), "image.height", line)
    image_emb = _embedding_from(_require(image, "embedding", line, "image."), "image.embedding", line)

    objects = []
    for raw in _as_list(_require(obj, "objects", line), "objects", line):
        rec = _as_dict(raw, "objects[]", line)
        objects.append(
            ObjectAnnotation(
                id=_as_id(_require(rec, "id", line, "objects[]."), "objects[].id", line),
                label=_as_str(_require(rec, "label", line, "objects[]."), "objects[].label", line),
                bbox=_clamp_bbox(
                    _bbox_from(_require(rec, "bbox", line, "objects[]."), "objects[].bbox", line),
                    width,
                    height,
                ),
            )
        )

    relationships = []
    for raw in _as_list(_require(obj, "relationships", line), "relationships", line):
        rec = _as_dict(raw, "relationships[]", line)
        relationships.append(
            RelationshipTriplet(
                subject_id=_as_id(_require(rec, "subject_id", line), "relationships[].subject_id", line),
                predicate=_as_str(_require(rec, "predicate", line), "relationships[].predicate", line),
                object_id=_as_id(_require(rec, "object_id", line), "relationships[].object_id", line),
            )
        )

    regions = []
    for raw in _as_list(_require(obj, "regions", line), "regions", line):
        rec = _as_dict(raw, "regions[]", line)
        regions.append(
            RegionDescription(
                text=_as_str(_require(rec, "text", line), "regions[].text", line),
                bbox=_clamp_bbox(
                    _bbox_from(_require(rec, "bbox", line), "regions[].bbox", line), width, height
                ),
                embedding=_embedding_from(_require(rec, "embedding", line), "regions[].embedding", line),
            )
        )

    qa = []
    for raw in _as_list(_require(obj, "qa", line), "qa", line):
        rec = _as_dict(raw, "qa[]", line)
        qa.append(
            QaRecord(
                question=_as_str(_require(rec, "question", line), "qa[].question", line),
                gold_answer=_as_str(_require(rec, "gold_answer", line), "qa[].gold_answer", line),
                predicted_answer=_as_str(
                    _require(rec, "predicted_answer", line), "qa[].predicted_answer", line
                ),
            )
        )

    detections = []
    for raw in _as_list(_require(obj, "detections", line), "detections", line):
        rec = _as_dict(raw, "detections[]", line)
        detections.append(
            Detection(
                label=_as_str(_require(rec, "label", line), "detections[].label", line),
                bbox=_clamp_bbox(
                    _bbox_from(_require(rec, "bbox", line), "detections[].bbox", line), width, height
                ),
                confidence=_as_real(_require(rec, "confidence", line), "detections[].confidence", line),
            )
        )

    image_emb_ro = image_emb
    return MultimodalEvent(
        event_id=event_id,
        image_width=width,
        image_height=height,
        image_embedding=image_emb_ro,
        objects=tuple(objects),
        relationships=tuple(relationships),
        regions=tuple(regions),
        qa=tuple(qa),
        detections=tuple(detections),
    )


def _strict_error(report: ValidationReport, event_id: str, line: int) -> BundleError:
    first = report.violations[0]
    msg = f"event {event_id!r}: {first.message}"
    if first.code == DANGLING_REFERENCE:
        return DanglingReference(msg, line=line)
    if first.code == EMBEDDING_DIM_MISMATCH:
        return DimensionMismatch(msg, line=line)
    return SchemaError(msg, line=line)


def _iter_text_lines(stream) -> Iterator[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = stream.decode("utf-8").splitlines()
    elif isinstance(stream, str):
        stream = stream.splitlines()
    for raw in stream:
        if isinstance(raw, (bytes, bytearray)):
            raw = raw.decode("utf-8")
        yield raw.rstrip("\r\n")


def iter_bundle_records(
    stream,
) -> Iterator[tuple[int, MultimodalEvent | None, BundleError | None]]:
    """Stream (line number, event, error) triples, one per record line.

    Structural decode errors yield ``(line, None, error)``. Invariant
    violations are not reported here; callers run :func:`validate_event`.
    The schema version header is checked and consumed.
    """
    lines = _iter_text_lines(stream)
    header = next(lines, None)
    if header is None or header.strip() != SCHEMA_VERSION:
        raise SchemaError(f"first line must be the schema version {SCHEMA_VERSION!r}", line=1)
    for line_no, text in enumerate(lines, start=2):
        if not text.strip():
            continue
        try:
            yield line_no, _event_from_json(text, line_no), None
        except BundleError as err:
            yield line_no, None, err


def parse_bundle(
    stream,
    label_map: LabelMap | None = None,
    mode: str = "strict",
) -> EventBundle:
    """Parse a bundle from a byte/text stream in the newline-delimited format.

    In strict mode (the default) the first malformed or invariant-violating
    record raises; in lenient mode such records are skipped with a logged
    diagnostic. Audits should stay strict; bulk re-scoring of known-dirty
    corpora is what lenient is for.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    label_map = label_map if label_map is not None else LabelMap()

    events: list[MultimodalEvent] = []
    seen: set[str] = set()
    dim: int | None = None
    for line_no, event, err in iter_bundle_records(stream):
        if err is None:
            assert event is not None
            if event.event_id in seen:
                err = SchemaError(f"duplicate event_id {event.event_id!r}", line=line_no)
            elif dim is not None and event.image_embedding.shape[0] != dim:
                err = DimensionMismatch(
                    f"event {event.event_id!r} embedding dimension "
                    f"{event.image_embedding.shape[0]} != bundle dimension {dim}",
                    line=line_no,
                )
            else:
                report = validate_event(event)
                if not report.ok:
                    err = _strict_error(report, event.event_id, line_no)
        if err is not None:
            if mode == "strict":
                raise err
            log.warning("skipping record: %s", err)
            continue
        assert event is not None
        if dim is None:
            dim = event.image_embedding.shape[0]
        seen.add(event.event_id)
        events.append(event)
    return EventBundle(events=tuple(events), embedding_dim=dim if dim is not None else 0, label_map=label_map)


def load_bundle(path: str | Path, label_map: LabelMap | None = None, mode: str = "strict") -> EventBundle:
    with open(path, "rb") as fh:
        return parse_bundle(fh, label_map=label_map, mode=mode)


def load_label_map(path: str | Path) -> LabelMap:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise SchemaError("label map must be a flat {raw: canonical} string mapping")
    return LabelMap(raw)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _bbox_to_json(b: BoundingBox) -> list[float]:
    return [float(b.x), float(b.y), float(b.w), float(b.h)]


def event_to_json(event: MultimodalEvent) -> dict:
    return {
        "event_id": event.event_id,
        "image": {
            "width": float(event.image_width),
            "height": float(event.image_height),
            "embedding": [float(v) for v in event.image_embedding],
        },
        "objects": [
            {"id": o.id, "label": o.label, "bbox": _bbox_to_json(o.bbox)} for o in event.objects
        ],
        "relationships": [
            {"subject_id": t.subject_id, "predicate": t.predicate, "object_id": t.object_id}
            for t in event.relationships
        ],
        "regions": [
            {
                "text": r.text,
                "bbox": _bbox_to_json(r.bbox),
                "embedding": [float(v) for v in r.embedding],
            }
            for r in event.regions
        ],
        "qa": [
            {"question": q.question, "gold_answer": q.gold_answer, "predicted_answer": q.predicted_answer}
            for q in event.qa
        ],
        "detections": [
            {"label": d.label, "bbox": _bbox_to_json(d.bbox), "confidence": float(d.confidence)}
            for d in event.detections
        ],
    }


def serialize_bundle(bundle: EventBundle) -> str:
    lines = [SCHEMA_VERSION]
    lines.extend(json.dumps(event_to_json(e), separators=(",", ":")) for e in bundle.events)
    return "\n".join(lines) + "\n"


def write_bundle(bundle: EventBundle, path: str | Path) -> None:
    Path(path).write_text(serialize_bundle(bundle), encoding="utf-8")
