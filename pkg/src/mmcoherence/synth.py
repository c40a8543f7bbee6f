"""Synthetic event bundles with planted coherence structure.

Detections are generated as the truth side and annotations corrupted relative
to them, so every planted level has a closed-form per-event value: shared vs
foreign labels for identity, coincident vs displaced boxes for spatial
coherence, exact prescribed cosines for semantic coherence, and a planted
fraction of correct answers for decision coherence.

Per-record counts are rounded stochastically (floor plus a Bernoulli on the
fractional part), so the expected per-event value equals the planted level
exactly; the oracle reports the discretization interval that the realized
bundle mean is guaranteed to fall in.

Image embeddings share a dominant direction with per-event variation and live
in the lower half of the coordinates; the neutral part of each region
embedding lives in the upper half. In every event exactly one region points
away from the shared direction while the rest are neutral. Scoring never sees
any of this (regions are planted against their own image), but under
cross-event caption swaps the chance of drawing a donor's one low-similarity
region grows with the number of swapped regions, so the expected semantic
damage scales near-linearly with the corruption rate instead of saturating at
the first swap, and neutral draws carry no cross-event noise at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bundle import (
    BoundingBox,
    Detection,
    EventBundle,
    LabelMap,
    MultimodalEvent,
    ObjectAnnotation,
    QaRecord,
    RegionDescription,
    RelationshipTriplet,
)

_BOX = 10.0  # object/detection box side
_PITCH = 100.0  # grid spacing; displaced boxes land mid-gap with zero overlap
_IMAGE_H = 120.0
_COSINE_SLACK = 1e-5  # float32 storage error bound on planted cosines
_SHARED_WEIGHT = 0.85  # image component along the shared direction


@dataclass(frozen=True)
class PlantedLevels:
    ic: float = 1.0
    spc: float = 1.0
    sc: float = 1.0
    dc: float = 1.0

    def __post_init__(self):
        for name in ("ic", "spc", "sc", "dc"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"planted level {name} must lie in [0, 1]")


@dataclass(frozen=True)
class SynthSpec:
    n_events: int
    objects_per_event: tuple[int, int] = (4, 8)
    regions_per_event: tuple[int, int] = (2, 4)
    qa_per_event: tuple[int, int] = (3, 3)
    embedding_dim: int = 32
    planted: PlantedLevels = PlantedLevels()
    seed: int = 0

    def __post_init__(self):
        if self.n_events < 0:
            raise ValueError("n_events must be nonnegative")
        if self.embedding_dim < 8:
            raise ValueError("embedding_dim must be >= 8")
        for name, lo_min in (
            ("objects_per_event", 1),
            ("regions_per_event", 0),
            ("qa_per_event", 0),
        ):
            lo, hi = getattr(self, name)
            if lo < lo_min or hi < lo:
                raise ValueError(f"{name} range ({lo}, {hi}) is invalid")


@dataclass(frozen=True)
class OracleInterval:
    expected: float
    lower: float
    upper: float


def _planted_count(level: float, total: int, rng: np.random.Generator) -> int:
    """Stochastic rounding of level*total; exact products stay deterministic."""
    if total == 0:
        return 0
    product = level * total
    nearest = round(product)
    if abs(product - nearest) < 1e-9:
        return int(nearest)
    base = math.floor(product)
    return int(base) + (1 if rng.random() < product - base else 0)


def _count_values(level: float, counts: range) -> list[float]:
    """All per-event values the construction can realize for the given sizes."""
    values: list[float] = []
    for c in counts:
        if c == 0:
            continue
        product = level * c
        nearest = round(product)
        if abs(product - nearest) < 1e-9:
            values.append(nearest / c)
        else:
            values.extend((math.floor(product) / c, math.ceil(product) / c))
    return values


def _unit_f32(vec: np.ndarray) -> np.ndarray:
    out = np.asarray(vec / np.linalg.norm(vec), dtype=np.float32)
    out.setflags(write=False)
    return out


def _subspace_unit(
    dim: int, lo: int, hi: int, rng: np.random.Generator, orthogonal_to: np.ndarray | None = None
) -> np.ndarray:
    """Random unit vector supported on coordinates [lo, hi)."""
    while True:
        g = np.zeros(dim)
        g[lo:hi] = rng.standard_normal(hi - lo)
        if orthogonal_to is not None:
            g -= (g @ orthogonal_to) * orthogonal_to
        norm = float(np.linalg.norm(g))
        if norm > 1e-6:
            return g / norm


def _region_embedding(image64: np.ndarray, off_axis: np.ndarray, cosine: float) -> np.ndarray:
    """Unit vector with the prescribed cosine to the image, via Gram-Schmidt."""
    emb = cosine * image64 + math.sqrt(max(0.0, 1.0 - cosine * cosine)) * off_axis
    out = np.asarray(emb, dtype=np.float32)
    if cosine == 0.0:
        # float32 storage may leave a hair of positive cosine; a planted zero
        # must not score above zero, and negation is exact in float32
        realized = float(image64 @ out.astype(np.float64))
        if realized > 0.0:
            out = -out
    out.setflags(write=False)
    return out


def generate_bundle(spec: SynthSpec) -> EventBundle:
    """Deterministic bundle realizing the planted per-dimension levels."""
    levels = spec.planted
    dim = spec.embedding_dim
    split = dim // 2  # images below, neutral region components above
    shared_rng = np.random.default_rng([spec.seed, 2**48])
    shared = _subspace_unit(dim, 0, split, shared_rng)
    events: list[MultimodalEvent] = []
    for idx in range(spec.n_events):
        rng = np.random.default_rng([spec.seed, idx])
        n_obj = int(rng.integers(spec.objects_per_event[0], spec.objects_per_event[1] + 1))
        n_reg = int(rng.integers(spec.regions_per_event[0], spec.regions_per_event[1] + 1))
        n_qa = int(rng.integers(spec.qa_per_event[0], spec.qa_per_event[1] + 1))

        width = _PITCH * n_obj + _PITCH
        own = _subspace_unit(dim, 0, split, rng, orthogonal_to=shared)
        image_emb = _unit_f32(
            _SHARED_WEIGHT * shared + math.sqrt(1.0 - _SHARED_WEIGHT**2) * own
        )
        image64 = image_emb.astype(np.float64)
        # unit component of the shared direction orthogonal to this image
        shared_hat = shared - (shared @ image64) * image64
        shared_hat /= np.linalg.norm(shared_hat)

        k_ic = _planted_count(levels.ic, n_obj, rng)
        k_spc = _planted_count(levels.spc, n_obj, rng)

        shared_labels = [f"ev{idx}s{i}" for i in range(k_ic)]
        det_boxes = [BoundingBox(_PITCH * i, 0.0, _BOX, _BOX) for i in range(n_obj)]
        if k_ic > 0:
            det_labels = [shared_labels[j % k_ic] for j in range(n_obj)]
        else:
            det_labels = [f"ev{idx}d{j}" for j in range(n_obj)]
        detections = tuple(
            Detection(label=det_labels[j], bbox=det_boxes[j], confidence=0.9)
            for j in range(n_obj)
        )

        objects = []
        for i in range(n_obj):
            label = shared_labels[i] if i < k_ic else f"ev{idx}a{i}"
            if i < k_spc:
                bbox = det_boxes[i]
            else:
                bbox = BoundingBox(_PITCH * i + _PITCH / 2, 0.0, _BOX, _BOX)
            objects.append(ObjectAnnotation(id=f"o{i}", label=label, bbox=bbox))

        relationships = []
        if n_obj >= 2:
            relationships.append(RelationshipTriplet("o0", "near", "o1"))
        if n_obj >= 3:
            relationships.append(RelationshipTriplet("o1", "above", "o2"))

        regions = []
        for j in range(n_reg):
            # every region carries exactly the planted cosine, so the event's
            # minimum is flat at the planted level; region 0 points against
            # the shared direction, the rest are neutral
            if j == 0:
                off_axis = -shared_hat
            else:
                off_axis = _subspace_unit(dim, split, dim, rng)
            regions.append(
                RegionDescription(
                    text=f"synthetic region {idx}-{j} token{j}",
                    bbox=BoundingBox(5.0 + j, 60.0, 20.0, 15.0),
                    embedding=_region_embedding(image64, off_axis, levels.sc),
                )
            )

        qa = []
        scored = min(n_qa, 3)
        k_dc = _planted_count(levels.dc, scored, rng)
        k_extra = _planted_count(levels.dc, n_qa - scored, rng) if n_qa > scored else 0
        for j in range(n_qa):
            if j < scored:
                correct = j < k_dc
            else:
                correct = (j - scored) < k_extra
            gold = f"answer{j}"
            qa.append(
                QaRecord(
                    question=f"synthetic question {idx}-{j} about token{j}?",
                    gold_answer=gold,
                    predicted_answer=gold if correct else f"wrong{j}",
                )
            )

        events.append(
            MultimodalEvent(
                event_id=f"ev{idx:05d}",
                image_width=width,
                image_height=_IMAGE_H,
                image_embedding=image_emb,
                objects=tuple(objects),
                relationships=tuple(relationships),
                regions=tuple(regions),
                qa=tuple(qa),
                detections=detections,
            )
        )
    return EventBundle(
        events=tuple(events), embedding_dim=spec.embedding_dim, label_map=LabelMap()
    )


def planted_score_oracle(spec: SynthSpec) -> dict[str, OracleInterval | None]:
    """Expected per-dimension means with discretization bounds.

    The realized bundle mean of each non-missing dimension is guaranteed to
    fall inside [lower, upper]; expected equals the planted level.
    """
    levels = spec.planted
    out: dict[str, OracleInterval | None] = {}

    def interval(level: float, values: list[float], slack: float = 0.0) -> OracleInterval | None:
        if not values:
            return None
        return OracleInterval(
            expected=level, lower=min(values) - slack, upper=max(values) + slack
        )

    obj_counts = range(spec.objects_per_event[0], spec.objects_per_event[1] + 1)
    qa_counts = range(spec.qa_per_event[0], spec.qa_per_event[1] + 1)
    reg_hi = spec.regions_per_event[1]

    out["ic"] = interval(levels.ic, _count_values(levels.ic, obj_counts))
    out["spc"] = interval(levels.spc, _count_values(levels.spc, obj_counts))
    out["sc"] = (
        OracleInterval(levels.sc, levels.sc - _COSINE_SLACK, levels.sc + _COSINE_SLACK)
        if reg_hi >= 1
        else None
    )
    scored_counts = sorted({min(m, 3) for m in qa_counts if m >= 1})
    dc_values: list[float] = []
    for s in scored_counts:
        dc_values.extend(_count_values(levels.dc, range(s, s + 1)))
    out["dc"] = interval(levels.dc, dc_values)
    return out
