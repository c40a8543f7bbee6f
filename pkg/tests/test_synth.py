"""Synthetic bundle generation against the planted-level oracle."""
from __future__ import annotations

import pytest

from mmcoherence.bundle import parse_bundle, serialize_bundle, validate_event
from mmcoherence.metrics import MetricConfig, score_bundle
from mmcoherence.optimize import WeightVector
from mmcoherence.synth import PlantedLevels, SynthSpec, generate_bundle, planted_score_oracle

CFG = MetricConfig()
EQUAL = WeightVector.equal()


def test_planted_perfect_coherence():
    spec = SynthSpec(n_events=20, planted=PlantedLevels(1, 1, 1, 1), seed=1)
    scores = score_bundle(generate_bundle(spec), CFG, EQUAL)
    for s in scores.per_event:
        assert s.ic == 1.0
        assert s.spc == 1.0
        assert s.dc == 1.0
        assert s.sc == pytest.approx(1.0, abs=1e-6)


def test_planted_zero_coherence():
    spec = SynthSpec(n_events=20, planted=PlantedLevels(0, 0, 0, 0), seed=2)
    scores = score_bundle(generate_bundle(spec), CFG, EQUAL)
    for s in scores.per_event:
        assert s.ic == 0.0
        assert s.spc == 0.0
        assert s.dc == 0.0
        assert s.sc <= 0.0


def test_planted_half_levels_near_targets():
    spec = SynthSpec(n_events=200, planted=PlantedLevels(0.5, 0.5, 0.5, 0.5), seed=3)
    scores = score_bundle(generate_bundle(spec), CFG, EQUAL)
    for dim in ("ic", "spc", "sc", "dc"):
        assert scores.aggregates[dim].mean == pytest.approx(0.5, abs=0.05), dim


@pytest.mark.parametrize("levels", [(0.8, 0.8, 0.8, 0.8), (0.3, 0.9, 0.6, 1 / 3), (1, 0, 0.5, 1)])
@pytest.mark.parametrize("seed", [0, 7])
def test_scored_means_inside_oracle_interval(levels, seed):
    spec = SynthSpec(n_events=120, planted=PlantedLevels(*levels), seed=seed)
    oracle = planted_score_oracle(spec)
    scores = score_bundle(generate_bundle(spec), CFG, EQUAL)
    for dim in ("ic", "spc", "sc", "dc"):
        interval = oracle[dim]
        assert interval is not None
        mean = scores.aggregates[dim].mean
        assert interval.lower - 1e-12 <= mean <= interval.upper + 1e-12, (dim, mean, interval)
        assert interval.expected == pytest.approx(getattr(spec.planted, dim))


def test_oracle_exact_cases():
    spec = SynthSpec(
        n_events=10,
        objects_per_event=(4, 4),
        qa_per_event=(3, 3),
        planted=PlantedLevels(0.5, 1.0, 0.7, 1 / 3),
        seed=5,
    )
    oracle = planted_score_oracle(spec)
    # 0.5 * 4 objects is an exact product: IC = 2/4 for every event
    assert (oracle["ic"].lower, oracle["ic"].upper) == (0.5, 0.5)
    assert (oracle["spc"].lower, oracle["spc"].upper) == (1.0, 1.0)
    # 1/3 * 3 answers: exactly one of three correct
    assert oracle["dc"].lower == pytest.approx(1 / 3)
    assert oracle["dc"].upper == pytest.approx(1 / 3)
    scores = score_bundle(generate_bundle(spec), CFG, EQUAL)
    assert scores.aggregates["ic"].mean == pytest.approx(0.5, abs=1e-12)
    assert scores.aggregates["dc"].mean == pytest.approx(1 / 3, abs=1e-12)


def test_generated_bundles_validate_clean():
    spec = SynthSpec(n_events=30, planted=PlantedLevels(0.6, 0.7, 0.4, 0.9), seed=11)
    bundle = generate_bundle(spec)
    for event in bundle.events:
        assert validate_event(event).ok


def test_generation_deterministic():
    spec = SynthSpec(n_events=15, planted=PlantedLevels(0.5, 0.5, 0.5, 0.5), seed=13)
    a = serialize_bundle(generate_bundle(spec))
    b = serialize_bundle(generate_bundle(spec))
    assert a == b
    c = serialize_bundle(generate_bundle(SynthSpec(n_events=15, seed=14)))
    assert c != a


def test_emits_parseable_wire_format():
    spec = SynthSpec(n_events=8, planted=PlantedLevels(0.9, 0.9, 0.9, 0.9), seed=17)
    bundle = generate_bundle(spec)
    parsed = parse_bundle(serialize_bundle(bundle))
    assert list(parsed.events) == list(bundle.events)


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(n_events=-1)
    with pytest.raises(ValueError):
        SynthSpec(n_events=1, embedding_dim=4)
    with pytest.raises(ValueError):
        SynthSpec(n_events=1, objects_per_event=(0, 3))
    with pytest.raises(ValueError):
        PlantedLevels(ic=1.2)
