"""Coherence scoring engine for multimodal event bundles."""

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
    ValidationReport,
    detected_set,
    entity_set,
    load_bundle,
    normalize_label,
    parse_bundle,
    serialize_bundle,
    validate_event,
    write_bundle,
)
from .metrics import (
    EventScores,
    MetricConfig,
    SpcMatching,
    composite,
    decision_coherence,
    identity_coherence,
    iou,
    normalize_answer,
    score_bundle,
    score_event,
    semantic_coherence,
    spatial_coherence,
)
from .fusion import (
    ArchitectureComparison,
    FusionThresholds,
    apply_contract,
    apply_foundation,
    apply_naive,
    compare_architectures,
)
from .optimize import (
    LearnedWeights,
    NelderMeadOptions,
    WeightVector,
    learn_weights,
    nelder_mead,
    project_to_simplex,
)
from .perturb import (
    PerturbationImpactMatrix,
    PerturbationKind,
    PerturbationSpec,
    compound,
    crosstalk_check,
    run_perturbation_suite,
    shuffle_bboxes,
    swap_captions,
    swap_objects,
)
from .stats import chi_square_sf, kruskal_wallis, rank_with_ties, spearman, spearman_pvalue
from .synth import PlantedLevels, SynthSpec, generate_bundle, planted_score_oracle

__version__ = "0.1.0"
