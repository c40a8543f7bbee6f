"""Controlled corruptions and the impact matrix that validates decomposability.

Each single perturbation touches only the fields its target dimension reads:
object swap rewrites labels (never boxes), bbox shuffle moves annotation boxes
(never labels), caption swap replaces region text and embeddings. Non-target
dimensions therefore recompute to bit-identical values, which is what the
cross-talk check relies on.

Randomness discipline: every (event, kind, rate) gets its own substream seeded
by a stable hash of (global seed, event_id, stream name, rate), so results are
independent of evaluation order and parallelism width.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .bundle import BoundingBox, EventBundle, MultimodalEvent, RegionDescription
from .errors import InsufficientData, NoDonorObjects, NoDonorRegions
from .metrics import MetricConfig, iou, score_event
from .optimize import WeightVector

CLAMP_LIMITED = "CLAMP_LIMITED"

IMPACT_DIMS = ("ic", "spc", "sc", "mcs")

# Relative-delta thresholds for the decomposition criterion.
TARGET_DROP_MIN = 0.20
NONTARGET_MAX = 0.05

_SHUFFLE_MAX_IOU = 0.1
_SHUFFLE_RESAMPLES = 10


class PerturbationKind(Enum):
    OBJECT_SWAP = "object_swap"
    BBOX_SHUFFLE = "bbox_shuffle"
    CAPTION_SWAP = "caption_swap"
    COMPOUND = "compound"


SINGLE_KINDS = (
    PerturbationKind.OBJECT_SWAP,
    PerturbationKind.BBOX_SHUFFLE,
    PerturbationKind.CAPTION_SWAP,
)
ALL_KINDS = SINGLE_KINDS + (PerturbationKind.COMPOUND,)

# Which dimension each single perturbation is meant to degrade.
TARGET_DIMENSION = {
    PerturbationKind.OBJECT_SWAP: "ic",
    PerturbationKind.BBOX_SHUFFLE: "spc",
    PerturbationKind.CAPTION_SWAP: "sc",
}

PROTOCOL_RATES = (0.1, 0.2, 0.5)


@dataclass(frozen=True)
class PerturbationSpec:
    kind: PerturbationKind
    rate: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("rate must lie in (0, 1]")


def event_rng(seed: int, event_id: str, stream: str, rate: float) -> np.random.Generator:
    """Substream generator keyed by a stable hash; order-independent by design."""
    key = f"{seed}|{event_id}|{stream}|{rate!r}".encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "big"))


def _select_indices(n: int, rate: float, rng: np.random.Generator) -> list[int]:
    """ceil(rate * n) indices, uniform without replacement, in ascending order."""
    if n == 0 or rate == 0.0:
        return []
    k = min(n, math.ceil(rate * n))
    return sorted(int(i) for i in rng.choice(n, size=k, replace=False))


def swap_objects(
    event: MultimodalEvent,
    rate: float,
    donor: MultimodalEvent,
    rng: np.random.Generator,
) -> MultimodalEvent:
    """Replace selected objects' labels with labels drawn from the donor.

    Boxes, ids, triplets, regions, and QA stay untouched; this is what keeps
    SpC and SC bit-identical under the swap.
    """
    if not donor.objects:
        raise NoDonorObjects(f"donor {donor.event_id!r} has no objects")
    selected = _select_indices(len(event.objects), rate, rng)
    if not selected:
        return event
    objects = list(event.objects)
    for i in selected:
        donor_obj = donor.objects[int(rng.integers(len(donor.objects)))]
        objects[i] = replace(objects[i], label=donor_obj.label)
    return replace(event, objects=tuple(objects))


def _offset_candidate(
    bbox: BoundingBox, width: float, height: float, rng: np.random.Generator
) -> BoundingBox:
    sign_x = -1.0 if rng.integers(2) == 0 else 1.0
    mag_x = float(rng.uniform(1.0, 2.0))
    sign_y = -1.0 if rng.integers(2) == 0 else 1.0
    mag_y = float(rng.uniform(1.0, 2.0))
    x = bbox.x + sign_x * mag_x * bbox.w
    y = bbox.y + sign_y * mag_y * bbox.h
    # clamp to the image, preserving w and h
    x = min(max(x, 0.0), max(width - bbox.w, 0.0))
    y = min(max(y, 0.0), max(height - bbox.h, 0.0))
    return BoundingBox(x, y, bbox.w, bbox.h)


def shuffle_bboxes(
    event: MultimodalEvent,
    rate: float,
    rng: np.random.Generator,
    diagnostics: list[str] | None = None,
) -> MultimodalEvent:
    """Displace selected annotation boxes by 100-200% of their own extent.

    Offsets use a per-axis random sign and magnitude, clamped to the image.
    If the displaced box still overlaps its origin at IoU > 0.1 it is
    resampled up to 10 times and the lowest-IoU candidate kept, flagged
    CLAMP_LIMITED when even that stays above the threshold.
    """
    selected = _select_indices(len(event.objects), rate, rng)
    if not selected:
        return event
    objects = list(event.objects)
    for i in selected:
        original = objects[i].bbox
        best = _offset_candidate(original, event.image_width, event.image_height, rng)
        best_iou = iou(best, original)
        attempts = 0
        while best_iou > _SHUFFLE_MAX_IOU and attempts < _SHUFFLE_RESAMPLES:
            candidate = _offset_candidate(original, event.image_width, event.image_height, rng)
            candidate_iou = iou(candidate, original)
            if candidate_iou < best_iou:
                best, best_iou = candidate, candidate_iou
            attempts += 1
        if best_iou > _SHUFFLE_MAX_IOU and diagnostics is not None:
            diagnostics.append(f"{CLAMP_LIMITED}:{event.event_id}:{objects[i].id}")
        objects[i] = replace(objects[i], bbox=best)
    return replace(event, objects=tuple(objects))


def swap_captions(
    event: MultimodalEvent,
    rate: float,
    donor: MultimodalEvent,
    rng: np.random.Generator,
) -> MultimodalEvent:
    """Substitute selected regions' text and embedding from donor regions.

    Region boxes stay put; objects and QA are untouched, keeping IC and SpC
    bit-identical.
    """
    if not donor.regions:
        raise NoDonorRegions(f"donor {donor.event_id!r} has no regions")
    selected = _select_indices(len(event.regions), rate, rng)
    if not selected:
        return event
    regions = list(event.regions)
    for i in selected:
        donor_region = donor.regions[int(rng.integers(len(donor.regions)))]
        regions[i] = RegionDescription(
            text=donor_region.text,
            bbox=regions[i].bbox,
            embedding=donor_region.embedding,
        )
    return replace(event, regions=tuple(regions))


def compound(
    event: MultimodalEvent,
    rate: float,
    donor_objects: MultimodalEvent,
    donor_captions: MultimodalEvent,
    *,
    rng_objects: np.random.Generator,
    rng_bboxes: np.random.Generator,
    rng_captions: np.random.Generator,
    diagnostics: list[str] | None = None,
) -> MultimodalEvent:
    """All three single perturbations at the same rate, on independent substreams.

    Fed the same substreams the suite would hand the single perturbations,
    compound selects exactly the same record indices per list.
    """
    out = swap_objects(event, rate, donor_objects, rng_objects)
    out = shuffle_bboxes(out, rate, rng_bboxes, diagnostics)
    return swap_captions(out, rate, donor_captions, rng_captions)


@dataclass(frozen=True)
class ImpactCell:
    kind: PerturbationKind
    rate: float
    before: dict[str, float]
    after: dict[str, float]
    rel_delta: dict[str, float]
    clamp_limited: int


@dataclass(frozen=True)
class PerturbationImpactMatrix:
    baseline: dict[str, float]
    counts: dict[str, int]
    cells: tuple[ImpactCell, ...]
    seed: int

    def cell(self, kind: PerturbationKind, rate: float) -> ImpactCell:
        for c in self.cells:
            if c.kind is kind and c.rate == rate:
                return c
        raise KeyError(f"no cell for ({kind.value}, {rate})")


@dataclass(frozen=True)
class CrosstalkVerdict:
    passed: bool
    reasons: tuple[str, ...]


def _pick_donor(
    events: Sequence[MultimodalEvent], index: int, rng: np.random.Generator
) -> MultimodalEvent:
    j = int(rng.integers(len(events) - 1))
    if j >= index:
        j += 1
    return events[j]


def _perturb_event(
    events: Sequence[MultimodalEvent],
    index: int,
    kind: PerturbationKind,
    rate: float,
    seed: int,
) -> tuple[MultimodalEvent, list[str]]:
    event = events[index]
    diagnostics: list[str] = []

    def donor_for(single: PerturbationKind) -> MultimodalEvent:
        rng = event_rng(seed, event.event_id, f"donor/{single.value}", rate)
        return _pick_donor(events, index, rng)

    def stream_for(single: PerturbationKind) -> np.random.Generator:
        return event_rng(seed, event.event_id, single.value, rate)

    if kind is PerturbationKind.OBJECT_SWAP:
        out = swap_objects(event, rate, donor_for(kind), stream_for(kind))
    elif kind is PerturbationKind.BBOX_SHUFFLE:
        out = shuffle_bboxes(event, rate, stream_for(kind), diagnostics)
    elif kind is PerturbationKind.CAPTION_SWAP:
        out = swap_captions(event, rate, donor_for(kind), stream_for(kind))
    elif kind is PerturbationKind.COMPOUND:
        out = compound(
            event,
            rate,
            donor_objects=donor_for(PerturbationKind.OBJECT_SWAP),
            donor_captions=donor_for(PerturbationKind.CAPTION_SWAP),
            rng_objects=stream_for(PerturbationKind.OBJECT_SWAP),
            rng_bboxes=stream_for(PerturbationKind.BBOX_SHUFFLE),
            rng_captions=stream_for(PerturbationKind.CAPTION_SWAP),
            diagnostics=diagnostics,
        )
    else:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    return out, diagnostics


def _dim_stats(scores) -> tuple[dict[str, float], dict[str, int]]:
    means: dict[str, float] = {}
    counts: dict[str, int] = {}
    for dim in IMPACT_DIMS:
        present = [s.dimension(dim) for s in scores if s.dimension(dim) is not None]
        counts[dim] = len(present)
        if present:
            means[dim] = sum(present) / len(present)
    return means, counts


def perturb_bundle(
    bundle: EventBundle,
    kind: PerturbationKind,
    rate: float,
    seed: int,
    jobs: int = 1,
) -> tuple[EventBundle, int]:
    """Perturb every event against seeded donors; returns (bundle, clamp count)."""
    events = bundle.events
    if len(events) < 2:
        raise InsufficientData("perturbation needs at least 2 events for donor selection")

    def work(i: int):
        return _perturb_event(events, i, kind, rate, seed)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, range(len(events))))
    else:
        results = [work(i) for i in range(len(events))]
    perturbed = tuple(r[0] for r in results)
    clamp_limited = sum(len(r[1]) for r in results)
    out = EventBundle(events=perturbed, embedding_dim=bundle.embedding_dim, label_map=bundle.label_map)
    return out, clamp_limited


def run_perturbation_suite(
    bundle: EventBundle,
    rates: Sequence[float],
    seed: int,
    kinds: Sequence[PerturbationKind] = ALL_KINDS,
    cfg: MetricConfig | None = None,
    jobs: int = 1,
) -> PerturbationImpactMatrix:
    """Score before/after for every (kind, rate) cell and emit relative deltas.

    Relative MCS change is measured under equal weights (1/3 each on IC, SpC,
    SC), not learned weights, so the composite delta reflects the dimension
    deltas rather than one dataset's weighting.
    """
    if len(bundle.events) < 2:
        raise InsufficientData("perturbation suite needs at least 2 events")
    for r in rates:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"rate {r} outside [0, 1]")
    cfg = cfg if cfg is not None else MetricConfig()
    weights = WeightVector(1 / 3, 1 / 3, 1 / 3)

    def score_all(b: EventBundle):
        return [score_event(e, b.label_map, cfg, weights) for e in b.events]

    baseline_scores = score_all(bundle)
    baseline, counts = _dim_stats(baseline_scores)
    for dim in IMPACT_DIMS:
        if dim not in baseline or baseline[dim] <= 0.0:
            raise InsufficientData(
                f"baseline mean for {dim!r} must be strictly positive to form relative deltas"
            )

    cells: list[ImpactCell] = []
    for kind in kinds:
        for rate in rates:
            perturbed, clamp_limited = perturb_bundle(bundle, kind, rate, seed, jobs=jobs)
            after, _ = _dim_stats(score_all(perturbed))
            rel = {dim: (after[dim] - baseline[dim]) / baseline[dim] for dim in IMPACT_DIMS}
            cells.append(
                ImpactCell(
                    kind=kind,
                    rate=float(rate),
                    before=dict(baseline),
                    after=after,
                    rel_delta=rel,
                    clamp_limited=clamp_limited,
                )
            )
    return PerturbationImpactMatrix(
        baseline=baseline, counts=counts, cells=tuple(cells), seed=seed
    )


def crosstalk_check(
    matrix: PerturbationImpactMatrix,
    target_drop_min: float = TARGET_DROP_MIN,
    nontarget_max: float = NONTARGET_MAX,
) -> dict[tuple[PerturbationKind, float], CrosstalkVerdict]:
    """PASS iff the targeted dimension moves enough and the others barely move.

    Compound has no non-targets: it must degrade all three dimensions past
    target_drop_min.
    """
    verdicts: dict[tuple[PerturbationKind, float], CrosstalkVerdict] = {}
    for cell in matrix.cells:
        reasons: list[str] = []
        if cell.kind is PerturbationKind.COMPOUND:
            for dim in ("ic", "spc", "sc"):
                if not abs(cell.rel_delta[dim]) > target_drop_min:
                    reasons.append(
                        f"{dim} change {cell.rel_delta[dim]:+.1%} does not exceed "
                        f"{target_drop_min:.0%}"
                    )
        else:
            target = TARGET_DIMENSION[cell.kind]
            if not abs(cell.rel_delta[target]) > target_drop_min:
                reasons.append(
                    f"target {target} change {cell.rel_delta[target]:+.1%} does not exceed "
                    f"{target_drop_min:.0%}"
                )
            for dim in ("ic", "spc", "sc"):
                if dim == target:
                    continue
                if not abs(cell.rel_delta[dim]) < nontarget_max:
                    reasons.append(
                        f"cross-talk on {dim}: change {cell.rel_delta[dim]:+.1%} reaches "
                        f"{nontarget_max:.0%}"
                    )
        verdicts[(cell.kind, cell.rate)] = CrosstalkVerdict(
            passed=not reasons, reasons=tuple(reasons)
        )
    return verdicts


def render_impact_table(matrix: PerturbationImpactMatrix, rate: float | None = None) -> str:
    """Plain-text table of relative deltas, one row per perturbation kind."""
    rates = sorted({c.rate for c in matrix.cells}) if rate is None else [rate]
    lines = []
    header = f"{'Perturbation':<22}{'ΔIC':>10}{'ΔSpC':>10}{'ΔSC':>10}{'ΔMCS':>10}"
    for r in rates:
        lines.append(f"-- rate {r:g} --")
        lines.append(header)
        for cell in matrix.cells:
            if cell.rate != r:
                continue
            lines.append(
                f"{cell.kind.value:<22}"
                + "".join(f"{cell.rel_delta[d]:>+10.1%}" for d in IMPACT_DIMS)
            )
    return "\n".join(lines)
