"""The four coherence dimensions and their weighted composite.

Each dimension is a pure function of one event. A dimension whose required
inputs are absent raises MissingInput; score_event converts that into an
encoded missing value so bundle-level scoring never throws.
"""
from __future__ import annotations

import csv
import io
import re
import string
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable

import numpy as np

from .bundle import BoundingBox, EventBundle, LabelMap, MultimodalEvent, detected_set, entity_set
from .errors import MissingInput

if TYPE_CHECKING:
    from .optimize import WeightVector

VACUOUS_IC = "VACUOUS_IC"

DIMENSIONS = ("ic", "spc", "sc", "dc")


class SpcMatching(Enum):
    BEST_IOU = "best_iou"
    INDEX_PAIRED = "index_paired"


@dataclass(frozen=True)
class MetricConfig:
    conf_threshold: float = 0.7
    spc_matching: SpcMatching = SpcMatching.BEST_IOU
    sc_clamp_negative: bool = False
    dc_max_qa: int = 3

    def __post_init__(self):
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ValueError("conf_threshold must lie in [0, 1]")
        if self.dc_max_qa < 1:
            raise ValueError("dc_max_qa must be >= 1")


@dataclass(frozen=True)
class EventScores:
    """Per-event dimension scores; None encodes a missing dimension."""

    event_id: str
    ic: float | None
    spc: float | None
    sc: float | None
    dc: float | None
    mcs: float | None
    flags: tuple[str, ...] = ()

    def dimension(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass(frozen=True)
class DimensionAggregate:
    mean: float | None
    count: int


@dataclass(frozen=True)
class BundleScores:
    per_event: tuple[EventScores, ...]
    aggregates: dict[str, DimensionAggregate]  # keys: ic, spc, sc, dc, mcs

    def composite_of_means(self, weights: "WeightVector") -> float:
        """Composite applied to the per-dimension aggregate means."""
        means = EventScores(
            event_id="<aggregate>",
            ic=self.aggregates["ic"].mean,
            spc=self.aggregates["spc"].mean,
            sc=self.aggregates["sc"].mean,
            dc=self.aggregates["dc"].mean,
            mcs=None,
        )
        return composite(means, weights)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    ix = min(a.x2, b.x2) - max(a.x, b.x)
    iy = min(a.y2, b.y2) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    return inter / union


def identity_coherence(event: MultimodalEvent, label_map: LabelMap, cfg: MetricConfig) -> float:
    """Jaccard similarity between annotated and detected entity sets.

    Both sets empty means there is no evidence of incoherence, so the score is
    1.0; score_event attaches a VACUOUS_IC flag in that case so reports can
    exclude such events.
    """
    annotated = entity_set(event, label_map)
    detected = detected_set(event, label_map, cfg.conf_threshold)
    if not annotated and not detected:
        return 1.0
    return len(annotated & detected) / len(annotated | detected)


def spatial_coherence(event: MultimodalEvent, cfg: MetricConfig) -> float:
    """Mean IoU between annotated object boxes and qualifying detected boxes.

    BEST_IOU pairs each annotation with its best-overlapping detection;
    INDEX_PAIRED pairs annotation i with qualifying detection i over the
    shorter of the two lists.
    """
    boxes = [o.bbox for o in event.objects]
    dets = [d.bbox for d in event.detections if d.confidence >= cfg.conf_threshold]
    if not boxes:
        raise MissingInput("event has no annotated objects")
    if not dets:
        raise MissingInput("event has no detections at or above the confidence threshold")
    if cfg.spc_matching is SpcMatching.BEST_IOU:
        total = sum(max(iou(b, d) for d in dets) for b in boxes)
        return total / len(boxes)
    n = min(len(boxes), len(dets))
    return sum(iou(boxes[i], dets[i]) for i in range(n)) / n


def semantic_coherence(event: MultimodalEvent, cfg: MetricConfig) -> float:
    """Minimum cosine similarity between the image and its region descriptions.

    Coherence is only as strong as the weakest text record. Embeddings arrive
    unit-normalized, so the cosine is a plain dot product.
    """
    if not event.regions:
        raise MissingInput("event has no region descriptions")
    img = np.asarray(event.image_embedding, dtype=np.float64)
    value = min(float(img @ np.asarray(r.embedding, dtype=np.float64)) for r in event.regions)
    if cfg.sc_clamp_negative:
        value = max(0.0, value)
    return value


_ARTICLES = ("a", "an", "the")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_WS_RE = re.compile(r"\s+")


def normalize_answer(text: str) -> str:
    """Canonicalize an answer string for exact matching.

    Lowercase, strip, remove punctuation, collapse internal whitespace, then
    drop a single leading article.
    """
    out = text.lower().strip().translate(_PUNCT_TABLE)
    out = _WS_RE.sub(" ", out).strip()
    parts = out.split(" ", 1)
    if parts and parts[0] in _ARTICLES:
        out = parts[1] if len(parts) > 1 else ""
    return out


def decision_coherence(event: MultimodalEvent, cfg: MetricConfig) -> float:
    """Fraction of the first dc_max_qa QA records answered correctly."""
    if not event.qa:
        raise MissingInput("event has no QA records")
    scored = event.qa[: cfg.dc_max_qa]
    hits = sum(
        1 for q in scored if normalize_answer(q.predicted_answer) == normalize_answer(q.gold_answer)
    )
    return hits / len(scored)


def composite(scores: EventScores, weights: "WeightVector") -> float:
    """Weighted sum of dimensions; the DC term participates only if weighted."""
    if scores.ic is None or scores.spc is None or scores.sc is None:
        raise MissingInput("composite requires ic, spc, and sc")
    value = weights.w_ic * scores.ic + weights.w_spc * scores.spc + weights.w_sc * scores.sc
    if weights.w_dc != 0.0:
        if scores.dc is None:
            raise MissingInput("composite with a DC weight requires dc")
        value += weights.w_dc * scores.dc
    return value


def score_event(
    event: MultimodalEvent,
    label_map: LabelMap,
    cfg: MetricConfig,
    weights: "WeightVector",
) -> EventScores:
    """All four dimensions plus the composite; missingness is encoded, not raised."""
    flags: list[str] = []

    annotated = entity_set(event, label_map)
    detected = detected_set(event, label_map, cfg.conf_threshold)
    if not annotated and not detected:
        flags.append(VACUOUS_IC)
    ic = identity_coherence(event, label_map, cfg)

    try:
        spc = spatial_coherence(event, cfg)
    except MissingInput:
        spc = None
    try:
        sc = semantic_coherence(event, cfg)
    except MissingInput:
        sc = None
    try:
        dc = decision_coherence(event, cfg)
    except MissingInput:
        dc = None

    partial = EventScores(event.event_id, ic, spc, sc, dc, None, tuple(flags))
    try:
        mcs = composite(partial, weights)
    except MissingInput:
        mcs = None
    return EventScores(event.event_id, ic, spc, sc, dc, mcs, tuple(flags))


def score_bundle(bundle: EventBundle, cfg: MetricConfig, weights: "WeightVector") -> BundleScores:
    """Per-event scores in bundle order plus non-missing means with counts."""
    per_event = tuple(score_event(e, bundle.label_map, cfg, weights) for e in bundle.events)
    aggregates: dict[str, DimensionAggregate] = {}
    for dim in DIMENSIONS + ("mcs",):
        values = [s.dimension(dim) for s in per_event]
        present = [v for v in values if v is not None]
        mean = sum(present) / len(present) if present else None
        aggregates[dim] = DimensionAggregate(mean=mean, count=len(present))
    return BundleScores(per_event=per_event, aggregates=aggregates)


CSV_FIELDS = ("event_id", "ic", "spc", "sc", "dc", "mcs", "flags")


def scores_to_csv(rows: Iterable[EventScores]) -> str:
    """Comma-separated export: missing values render as empty fields."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for s in rows:
        writer.writerow(
            [
                s.event_id,
                *("" if v is None else repr(v) for v in (s.ic, s.spc, s.sc, s.dc, s.mcs)),
                ";".join(s.flags),
            ]
        )
    return buf.getvalue()
