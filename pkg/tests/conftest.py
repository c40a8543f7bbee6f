"""Shared builders for events, embeddings, and bundles."""
from __future__ import annotations

import math

import numpy as np
import pytest

from mmcoherence.bundle import (
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


def unit(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    out = np.asarray(arr / np.linalg.norm(arr), dtype=np.float32)
    out.setflags(write=False)
    return out


def basis_vec(dim: int, axis: int) -> np.ndarray:
    v = np.zeros(dim, dtype=np.float32)
    v[axis] = 1.0
    v.setflags(write=False)
    return v


def embedding_with_cosine(image: np.ndarray, cosine: float, seed: int = 0) -> np.ndarray:
    """Unit vector with a prescribed cosine to the image, via Gram-Schmidt."""
    rng = np.random.default_rng(seed)
    img = np.asarray(image, dtype=np.float64)
    while True:
        g = rng.standard_normal(img.size)
        g -= (g @ img) * img
        norm = np.linalg.norm(g)
        if norm > 1e-9:
            break
    v = g / norm
    emb = cosine * img + math.sqrt(max(0.0, 1.0 - cosine * cosine)) * v
    out = np.asarray(emb, dtype=np.float32)
    out.setflags(write=False)
    return out


def region(text: str, image: np.ndarray, cosine: float, seed: int = 0, bbox=None) -> RegionDescription:
    return RegionDescription(
        text=text,
        bbox=bbox if bbox is not None else BoundingBox(0.0, 0.0, 10.0, 10.0),
        embedding=embedding_with_cosine(image, cosine, seed=seed),
    )


def make_event(
    event_id: str = "e1",
    *,
    width: float = 1000.0,
    height: float = 1000.0,
    dim: int = 8,
    image_embedding: np.ndarray | None = None,
    objects: list[ObjectAnnotation] | None = None,
    relationships: list[RelationshipTriplet] | None = None,
    regions: list[RegionDescription] | None = None,
    qa: list[QaRecord] | None = None,
    detections: list[Detection] | None = None,
) -> MultimodalEvent:
    if image_embedding is None:
        image_embedding = basis_vec(dim, 0)
    return MultimodalEvent(
        event_id=event_id,
        image_width=width,
        image_height=height,
        image_embedding=image_embedding,
        objects=tuple(objects or ()),
        relationships=tuple(relationships or ()),
        regions=tuple(regions or ()),
        qa=tuple(qa or ()),
        detections=tuple(detections or ()),
    )


def obj(id: str, label: str, x: float, y: float, w: float = 10.0, h: float = 10.0) -> ObjectAnnotation:
    return ObjectAnnotation(id=id, label=label, bbox=BoundingBox(x, y, w, h))


def det(label: str, x: float, y: float, w: float = 10.0, h: float = 10.0, conf: float = 0.9) -> Detection:
    return Detection(label=label, bbox=BoundingBox(x, y, w, h), confidence=conf)


def qa_pair(question: str, gold: str, predicted: str) -> QaRecord:
    return QaRecord(question=question, gold_answer=gold, predicted_answer=predicted)


def coherent_event(event_id: str = "ok", dim: int = 8) -> MultimodalEvent:
    """Minimal fully coherent event: annotations copy detections, region
    embeddings equal the image embedding, all QA correct."""
    image = basis_vec(dim, 0)
    return make_event(
        event_id,
        image_embedding=image,
        objects=[obj("a", "zebra", 0, 0), obj("b", "tree", 100, 0)],
        relationships=[RelationshipTriplet("a", "near", "b")],
        regions=[
            RegionDescription("a zebra animal near a tree", BoundingBox(0, 0, 20, 10), image)
        ],
        qa=[qa_pair("What kind of animal?", "zebra", "zebra")],
        detections=[det("zebra", 0, 0), det("tree", 100, 0)],
    )


def bundle_of(events, dim: int = 8, label_map: LabelMap | None = None) -> EventBundle:
    return EventBundle(
        events=tuple(events),
        embedding_dim=dim,
        label_map=label_map if label_map is not None else LabelMap(),
    )


def sc_driven_events(n: int = 40) -> list[MultimodalEvent]:
    """Per-event semantic coherence varies; decision coherence follows its rank."""
    image = basis_vec(8, 0)
    events = []
    rng = np.random.default_rng(6)
    for i in range(n):
        sc_level = 0.1 + 0.8 * i / (n - 1)
        correct = round(3 * (i / (n - 1)))
        qa = [
            qa_pair(f"question {j}?", f"ans{j}", f"ans{j}" if j < correct else f"no{j}")
            for j in range(3)
        ]
        n_extra = int(rng.integers(0, 3))
        labels = ["zebra"] + [f"junk{i}_{k}" for k in range(n_extra)]
        events.append(
            make_event(
                f"s{i}",
                image_embedding=image,
                objects=[obj(str(k), lab, 120.0 * k, 0) for k, lab in enumerate(labels)],
                regions=[region(f"text {i}", image, sc_level, seed=i)],
                qa=qa,
                detections=[det("zebra", float(rng.uniform(0, 60)), 0)],
            )
        )
    return events


@pytest.fixture
def zebra_map() -> LabelMap:
    return LabelMap({"man": "person", "woman": "person", "boy": "person"})
