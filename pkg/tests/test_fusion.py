"""Fusion transforms: exact filter behavior, idempotence, and comparison."""
from __future__ import annotations

import math

import numpy as np
import pytest

from mmcoherence.bundle import (
    BoundingBox,
    Detection,
    LabelMap,
    ObjectAnnotation,
    QaRecord,
    RegionDescription,
    RelationshipTriplet,
    validate_event,
)
from mmcoherence.errors import InsufficientData
from mmcoherence.fusion import (
    FusionThresholds,
    apply_contract,
    apply_foundation,
    apply_naive,
    compare_architectures,
)
from mmcoherence.metrics import MetricConfig, iou, score_event
from mmcoherence.optimize import WeightVector
from mmcoherence.synth import PlantedLevels, SynthSpec, generate_bundle

from conftest import basis_vec, bundle_of, coherent_event, make_event, obj, qa_pair

THR = FusionThresholds()
CFG = MetricConfig()
EQUAL = WeightVector.equal()

# Detection box shared by the fixture events; object boxes below hit exact
# IoU values against it using integer-friendly areas (inter/union of 10/100,
# 5/100, 50/50).
DET_BOX = BoundingBox(0, 0, 5, 10)
BOX_IOU_10 = BoundingBox(4, 0, 6, 10)  # inter 10, union 100 -> 0.1 exactly
BOX_IOU_05 = BoundingBox(4.5, 0, 5.5, 10)  # inter 5, union 100 -> 0.05
BOX_MATCH = BoundingBox(0, 0, 5, 10)  # 1.0
BOX_FAR = BoundingBox(600, 0, 10, 10)  # 0.0


def emb_cos(c: float, dim: int = 8) -> np.ndarray:
    """Embedding whose float64 cosine to basis_vec(dim, 0) is float32(c) exactly."""
    v = np.zeros(dim, dtype=np.float32)
    v[0] = c
    v[1] = math.sqrt(max(0.0, 1.0 - c * c))
    v.setflags(write=False)
    return v


def test_fixture_iou_values_exact():
    assert iou(BOX_IOU_10, DET_BOX) == 0.1
    assert iou(BOX_IOU_05, DET_BOX) == 0.05
    assert iou(BOX_MATCH, DET_BOX) == 1.0
    assert iou(BOX_FAR, DET_BOX) == 0.0


def rgn(text: str, c: float) -> RegionDescription:
    return RegionDescription(text, BoundingBox(10, 30, 20, 10), emb_cos(c))


def fixture_events():
    """Ten events with enumerated expected survivors for both filters.

    Returns (events, expected) where expected[event_id] holds the surviving
    object ids, region indices, triplet indices, and QA indices per transform.
    """
    events = []
    expected = {}

    def add(event, contract, foundation):
        events.append(event)
        expected[event.event_id] = {"contract": contract, "foundation": foundation}

    # f0: IoU ladder. zebra matches, bunch at 0.05 goes, rim at the 0.1
    # threshold stays (>= semantics).
    add(
        make_event(
            "f0",
            objects=[
                ObjectAnnotation("a", "zebra", BOX_MATCH),
                ObjectAnnotation("b", "bunch", BOX_IOU_05),
                ObjectAnnotation("c", "rim", BOX_IOU_10),
            ],
            relationships=[
                RelationshipTriplet("a", "near", "b"),
                RelationshipTriplet("a", "near", "c"),
            ],
            regions=[rgn("a zebra eating grass near the animal rim", 0.8)],
            qa=[qa_pair("What kind of animal?", "zebra", "zebra")],
            detections=[Detection("zebra", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a", "c"}, "regions": {0}, "triplets": {1}, "qa": {0}},
        foundation={"objects": {"a", "c"}, "regions": {0}, "triplets": {1}, "qa": {0}},
    )

    # f1: cosine ladder for regions; contract keeps >= 0.3, foundation >= 0.5
    # with an exact tie at 0.5.
    add(
        make_event(
            "f1",
            objects=[ObjectAnnotation("a", "zebra", BOX_MATCH)],
            regions=[
                rgn("a zebra standing", 0.8),
                rgn("low alignment text", 0.25),
                rgn("middling zebra text", 0.35),
                rgn("boundary zebra text", 0.5),
                rgn("nearly there", 0.45),
            ],
            qa=[qa_pair("What is standing?", "zebra", "zebra")],
            detections=[Detection("zebra", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a"}, "regions": {0, 2, 3, 4}, "triplets": set(), "qa": {0}},
        foundation={"objects": {"a"}, "regions": {0, 3}, "triplets": set(), "qa": {0}},
    )

    # f2: contract honors detections at any confidence; the only detection is
    # far below the scoring threshold.
    add(
        make_event(
            "f2",
            objects=[ObjectAnnotation("a", "zebra", BOX_MATCH)],
            regions=[rgn("a zebra here", 0.8)],
            qa=[qa_pair("Which animal is here?", "zebra", "zebra")],
            detections=[Detection("zebra", DET_BOX, 0.05)],
        ),
        contract={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {0}},
        foundation={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {0}},
    )

    # f3: no detections at all; no object can clear the contract IoU gate.
    add(
        make_event(
            "f3",
            objects=[ObjectAnnotation("a", "zebra", BOX_MATCH)],
            relationships=[],
            regions=[rgn("a zebra again", 0.8)],
            qa=[qa_pair("Which zebra appears?", "this one", "this one")],
            detections=[],
        ),
        contract={"objects": set(), "regions": {0}, "triplets": set(), "qa": {0}},
        foundation={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {0}},
    )

    # f4: foundation whole-word rule: "cat" must not match "category".
    add(
        make_event(
            "f4",
            objects=[
                ObjectAnnotation("a", "cat", BOX_MATCH),
                ObjectAnnotation("b", "sign", BOX_IOU_10),
            ],
            regions=[rgn("a category sign on the road", 0.8)],
            qa=[qa_pair("What is on the road?", "sign", "sign")],
            detections=[Detection("cat", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a", "b"}, "regions": {0}, "triplets": set(), "qa": {0}},
        foundation={"objects": {"b"}, "regions": {0}, "triplets": set(), "qa": {0}},
    )

    # f5: multi-word label matched as a phrase.
    add(
        make_event(
            "f5",
            objects=[ObjectAnnotation("a", "Dirt Road", BOX_MATCH)],
            regions=[rgn("zebras crossing a dirt road", 0.8)],
            qa=[qa_pair("What are they crossing?", "road", "road")],
            detections=[Detection("dirt road", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {0}},
        foundation={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {0}},
    )

    # f6: QA word rules: short-word question dies, long-word overlap survives.
    add(
        make_event(
            "f6",
            objects=[ObjectAnnotation("a", "zebra", BOX_MATCH)],
            regions=[rgn("a zebra eating green grass", 0.8)],
            qa=[
                qa_pair("Is it red?", "no", "no"),  # no tokens of length >= 4
                qa_pair("What is it eating?", "grass", "grass"),  # "eating" matches
                qa_pair("Where is the elephant herd?", "nowhere", "nowhere"),  # no overlap
            ],
            detections=[Detection("zebra", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {0, 1, 2}},
        foundation={"objects": {"a"}, "regions": {0}, "triplets": set(), "qa": {1}},
    )

    # f7: all regions below both thresholds; foundation loses everything.
    add(
        make_event(
            "f7",
            objects=[ObjectAnnotation("a", "zebra", BOX_MATCH)],
            relationships=[],
            regions=[rgn("a zebra somewhere", 0.25), rgn("unrelated text", 0.2)],
            qa=[qa_pair("What kind of animal?", "zebra", "zebra")],
            detections=[Detection("zebra", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a"}, "regions": set(), "triplets": set(), "qa": {0}},
        foundation={"objects": set(), "regions": set(), "triplets": set(), "qa": set()},
    )

    # f8: triplet chain where the middle object is filtered by contract.
    add(
        make_event(
            "f8",
            objects=[
                ObjectAnnotation("a", "zebra", BOX_MATCH),
                ObjectAnnotation("b", "ghost", BOX_FAR),
                ObjectAnnotation("c", "tree", BOX_IOU_10),
            ],
            relationships=[
                RelationshipTriplet("a", "near", "c"),
                RelationshipTriplet("a", "behind", "b"),
                RelationshipTriplet("b", "under", "c"),
            ],
            regions=[rgn("a zebra near a tree", 0.8)],
            qa=[qa_pair("What stands near the tree?", "zebra", "zebra")],
            detections=[Detection("zebra", DET_BOX, 0.9)],
        ),
        contract={"objects": {"a", "c"}, "regions": {0}, "triplets": {0}, "qa": {0}},
        foundation={"objects": {"a", "c"}, "regions": {0}, "triplets": {0}, "qa": {0}},
    )

    # f9: empty-ish event: nothing to filter, everything passes through.
    add(
        make_event(
            "f9",
            objects=[],
            regions=[rgn("just a caption", 0.8)],
            qa=[],
            detections=[Detection("zebra", DET_BOX, 0.9)],
        ),
        contract={"objects": set(), "regions": {0}, "triplets": set(), "qa": set()},
        foundation={"objects": set(), "regions": {0}, "triplets": set(), "qa": set()},
    )
    return events, expected


def surviving(event, original):
    return {
        "objects": {o.id for o in event.objects},
        "regions": {original.regions.index(r) for r in event.regions},
        "triplets": {original.relationships.index(t) for t in event.relationships},
        "qa": {original.qa.index(q) for q in event.qa},
    }


def test_fixture_events_are_valid():
    events, _ = fixture_events()
    assert len(events) == 10
    for e in events:
        assert validate_event(e).ok, e.event_id


@pytest.mark.parametrize("transform_name", ["contract", "foundation"])
def test_filters_match_enumerated_survivors(transform_name):
    events, expected = fixture_events()
    transform = apply_contract if transform_name == "contract" else apply_foundation
    for e in events:
        out = transform(e, THR)
        got = surviving(out, e)
        want = expected[e.event_id][transform_name]
        if transform_name == "contract":
            want = {**want, "qa": {i for i in range(len(e.qa))}}
        assert got == want, f"{e.event_id} ({transform_name}): {got} != {want}"


@pytest.mark.parametrize("transform", [apply_naive, apply_contract, apply_foundation])
def test_transforms_idempotent(transform):
    events, _ = fixture_events()
    for e in events:
        once = transform(e, THR) if transform is not apply_naive else transform(e)
        twice = transform(once, THR) if transform is not apply_naive else transform(once)
        assert once == twice


def test_naive_is_identity():
    e = coherent_event()
    assert apply_naive(e) is e


def test_transforms_never_add_or_mutate():
    events, _ = fixture_events()
    for e in events:
        for transform in (apply_contract, apply_foundation):
            out = transform(e, THR)
            assert set(id(o) for o in out.objects) <= set(id(o) for o in e.objects)
            assert set(id(r) for r in out.regions) <= set(id(r) for r in e.regions)
            assert set(id(q) for q in out.qa) <= set(id(q) for q in e.qa)
            assert out.detections == e.detections
            assert out.image_width == e.image_width
            assert np.array_equal(out.image_embedding, e.image_embedding)


def test_transforms_preserve_referential_integrity():
    events, _ = fixture_events()
    for e in events:
        for transform in (apply_contract, apply_foundation):
            out = transform(e, THR)
            ids = {o.id for o in out.objects}
            for t in out.relationships:
                assert t.subject_id in ids and t.object_id in ids


def test_contract_example_thresholds():
    events, _ = fixture_events()
    f0 = events[0]
    out = apply_contract(f0, THR)
    assert "b" not in {o.id for o in out.objects}  # max-IoU 0.05 < 0.1
    f1 = events[1]
    out = apply_contract(f1, THR)
    cosines = {0.25, 0.35}
    kept_texts = {r.text for r in out.regions}
    assert "low alignment text" not in kept_texts  # 0.25 < 0.3
    assert "middling zebra text" in kept_texts  # 0.35 >= 0.3


def test_naive_scoring_unchanged():
    events, _ = fixture_events()
    for e in events:
        a = score_event(e, LabelMap(), CFG, EQUAL)
        b = score_event(apply_naive(e), LabelMap(), CFG, EQUAL)
        assert a == b


# ---------------------------------------------------------------------------
# compare_architectures
# ---------------------------------------------------------------------------


def noisy_bundle(n: int = 8):
    """Events with one good object and one planted junk object per event.

    Contract filtering removes the junk (zero IoU against every detection),
    doubling identity coherence.
    """
    image = basis_vec(8, 0)
    events = []
    for i in range(n):
        events.append(
            make_event(
                f"n{i}",
                image_embedding=image,
                objects=[
                    ObjectAnnotation("good", "zebra", BOX_MATCH),
                    ObjectAnnotation("junk", f"noise{i}", BOX_FAR),
                ],
                regions=[rgn("a zebra eating grass", 0.8)],
                qa=[qa_pair("What kind of animal is eating?", "zebra", "zebra" if i % 2 else "horse")],
                detections=[Detection("zebra", DET_BOX, 0.9)],
            )
        )
    return bundle_of(events)


def test_contract_beats_naive_on_planted_noise():
    comparison = compare_architectures(noisy_bundle(), CFG, THR, EQUAL)
    naive_ic = comparison.scores["naive"].aggregates["ic"].mean
    contract_ic = comparison.scores["contract"].aggregates["ic"].mean
    assert naive_ic == pytest.approx(0.5)
    assert contract_ic == pytest.approx(1.0)
    assert contract_ic > naive_ic
    for dim in ("ic", "spc", "sc", "dc", "mcs"):
        assert comparison.tests[dim].n == (8, 8, 8)


def test_identical_distributions_no_separation():
    bundle = bundle_of([coherent_event(f"c{i}") for i in range(6)])
    comparison = compare_architectures(bundle, CFG, THR, EQUAL)
    for dim in ("ic", "spc", "sc", "dc", "mcs"):
        assert comparison.tests[dim].h == pytest.approx(0.0, abs=1e-9)
        assert comparison.tests[dim].p == pytest.approx(1.0, abs=1e-9)


def test_insufficient_data_below_five():
    bundle = bundle_of([coherent_event(f"c{i}") for i in range(4)])
    with pytest.raises(InsufficientData):
        compare_architectures(bundle, CFG, THR, EQUAL)


def test_empty_bundle_rejected():
    with pytest.raises(InsufficientData):
        compare_architectures(bundle_of([]), CFG, THR, EQUAL)


def test_synth_bundle_transforms_keep_validity():
    bundle = generate_bundle(SynthSpec(n_events=6, planted=PlantedLevels(0.5, 0.5, 0.5, 0.5), seed=9))
    for e in bundle.events:
        for transform in (apply_contract, apply_foundation):
            assert validate_event(transform(e, THR)).ok
