"""The three fusion architectures as event-to-event transforms, plus comparison.

Transforms only ever drop records; surviving records are reused as-is, so the
subset property and referential integrity are checkable field-for-field.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable

import numpy as np

from .bundle import EventBundle, MultimodalEvent, RelationshipTriplet
from .errors import AllTied, InsufficientData
from .metrics import BundleScores, MetricConfig, iou, score_bundle
from .stats import KruskalWallisResult, kruskal_wallis

ARCHITECTURES = ("naive", "contract", "foundation")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class FusionThresholds:
    contract_iou_min: float = 0.1
    contract_cos_min: float = 0.3
    foundation_cos_min: float = 0.5
    foundation_word_min_len: int = 4  # question words of length > 3

    def __post_init__(self):
        if not 0.0 <= self.contract_iou_min <= 1.0:
            raise ValueError("contract_iou_min must lie in [0, 1]")
        for name in ("contract_cos_min", "foundation_cos_min"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1]")
        if self.foundation_word_min_len < 1:
            raise ValueError("foundation_word_min_len must be >= 1")


@dataclass(frozen=True)
class ArchitectureComparison:
    scores: dict[str, BundleScores]  # keyed by architecture name
    tests: dict[str, KruskalWallisResult]  # keyed by dimension (ic/spc/sc/dc/mcs)


def apply_naive(event: MultimodalEvent) -> MultimodalEvent:
    """No alignment or filtering: the identity transform."""
    return event


def _surviving_triplets(
    triplets: Iterable[RelationshipTriplet], surviving_ids: set[str]
) -> tuple[RelationshipTriplet, ...]:
    return tuple(
        t for t in triplets if t.subject_id in surviving_ids and t.object_id in surviving_ids
    )


def _region_cosine(event: MultimodalEvent, region_embedding: np.ndarray) -> float:
    img = np.asarray(event.image_embedding, dtype=np.float64)
    return float(img @ np.asarray(region_embedding, dtype=np.float64))


def apply_contract(event: MultimodalEvent, thresholds: FusionThresholds) -> MultimodalEvent:
    """Validation-rule fusion: IoU-gate objects, cosine-gate regions.

    Objects must overlap some detector prediction (any confidence) at IoU >=
    contract_iou_min; regions must reach contract_cos_min cosine to the image;
    triplets may reference only surviving objects. Ties at a threshold are
    kept. Detections, QA, and image fields pass through unchanged.
    """
    det_boxes = [d.bbox for d in event.detections]
    objects = tuple(
        o
        for o in event.objects
        if det_boxes and max(iou(o.bbox, d) for d in det_boxes) >= thresholds.contract_iou_min
    )
    regions = tuple(
        r for r in event.regions if _region_cosine(event, r.embedding) >= thresholds.contract_cos_min
    )
    surviving_ids = {o.id for o in objects}
    return replace(
        event,
        objects=objects,
        regions=regions,
        relationships=_surviving_triplets(event.relationships, surviving_ids),
    )


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _label_in_text(label: str, text_tokens: list[str]) -> bool:
    """Whole-word match: the label's tokens appear consecutively in the text."""
    label_tokens = _tokens(label)
    if not label_tokens:
        return False
    k = len(label_tokens)
    return any(text_tokens[i : i + k] == label_tokens for i in range(len(text_tokens) - k + 1))


def apply_foundation(event: MultimodalEvent, thresholds: FusionThresholds) -> MultimodalEvent:
    """Embedding-similarity fusion: cosine-gate regions, then text-gate the rest.

    Regions below foundation_cos_min go first. Objects survive only if their
    normalized label occurs as a whole word in some surviving region's text
    (so "cat" does not match "category"). QA records survive if any question
    word of length >= foundation_word_min_len appears in the concatenated
    surviving text. Triplets are filtered as in apply_contract.
    """
    regions = tuple(
        r
        for r in event.regions
        if _region_cosine(event, r.embedding) >= thresholds.foundation_cos_min
    )
    region_token_lists = [_tokens(r.text) for r in regions]
    all_region_tokens = {tok for toks in region_token_lists for tok in toks}

    objects = tuple(
        o
        for o in event.objects
        if any(_label_in_text(o.label, toks) for toks in region_token_lists)
    )
    qa = tuple(
        q
        for q in event.qa
        if any(
            tok in all_region_tokens
            for tok in _tokens(q.question)
            if len(tok) >= thresholds.foundation_word_min_len
        )
    )
    surviving_ids = {o.id for o in objects}
    return replace(
        event,
        objects=objects,
        regions=regions,
        qa=qa,
        relationships=_surviving_triplets(event.relationships, surviving_ids),
    )


def apply_architecture(
    event: MultimodalEvent, architecture: str, thresholds: FusionThresholds
) -> MultimodalEvent:
    if architecture == "naive":
        return apply_naive(event)
    if architecture == "contract":
        return apply_contract(event, thresholds)
    if architecture == "foundation":
        return apply_foundation(event, thresholds)
    raise ValueError(f"unknown architecture {architecture!r}")


def transform_bundle(
    bundle: EventBundle, architecture: str, thresholds: FusionThresholds
) -> EventBundle:
    return EventBundle(
        events=tuple(apply_architecture(e, architecture, thresholds) for e in bundle.events),
        embedding_dim=bundle.embedding_dim,
        label_map=bundle.label_map,
    )


def compare_architectures(
    bundle: EventBundle,
    cfg: MetricConfig,
    thresholds: FusionThresholds,
    weights,
) -> ArchitectureComparison:
    """Score the bundle under all three transforms and rank-test each dimension.

    For every dimension the three per-event samples (missing values excluded)
    go through Kruskal-Wallis. Requires at least 5 non-missing scores per
    architecture per dimension.
    """
    if not bundle.events:
        raise InsufficientData("bundle is empty")
    scores = {
        arch: score_bundle(transform_bundle(bundle, arch, thresholds), cfg, weights)
        for arch in ARCHITECTURES
    }
    tests: dict[str, KruskalWallisResult] = {}
    for dim in ("ic", "spc", "sc", "dc", "mcs"):
        groups = []
        for arch in ARCHITECTURES:
            values = [
                s.dimension(dim) for s in scores[arch].per_event if s.dimension(dim) is not None
            ]
            if len(values) < 5:
                raise InsufficientData(
                    f"architecture {arch!r} has only {len(values)} non-missing "
                    f"{dim} scores; need at least 5"
                )
            groups.append(values)
        try:
            tests[dim] = kruskal_wallis(groups)
        except AllTied:
            # Identical constant samples carry no rank separation at all.
            tests[dim] = KruskalWallisResult(h=0.0, p=1.0, n=tuple(len(g) for g in groups))
    return ArchitectureComparison(scores=scores, tests=tests)
