"""Command-line surface: validate, score, compare, perturb, learn-weights.

Exit codes are a stable contract: 0 success, 1 analysis or validation
failure, 2 usage or input error. Seeds are mandatory wherever randomness is
involved; there is no wall-clock default, so every audit output is
reproducible by construction.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from . import bundle as bundle_mod
from .bundle import LabelMap, load_bundle, load_label_map, validate_event
from .errors import BundleError, CoherenceError
from .fusion import ARCHITECTURES, FusionThresholds, compare_architectures, transform_bundle
from .metrics import DIMENSIONS, MetricConfig, score_bundle, scores_to_csv
from .optimize import LearnedWeights, NelderMeadOptions, WeightVector, learn_weights
from .perturb import (
    ALL_KINDS,
    crosstalk_check,
    render_impact_table,
    run_perturbation_suite,
)
from .stats import PERMUTATION, spearman_pvalue

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_USAGE = 2

FORMATS = ("csv", "structured", "text-table")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    bundle_path: Path
    label_map_path: Path | None
    weights: WeightVector | None
    seed: int | None
    rates: tuple[float, ...]
    architecture: str
    out_dir: Path | None
    out_format: str
    parse_mode: str
    jobs: int
    n_perm: int


def _parse_rates(text: str) -> tuple[float, ...]:
    try:
        rates = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise UsageError(f"cannot parse rates {text!r}")
    if not rates:
        raise UsageError("at least one rate is required")
    for r in rates:
        if not 0.0 < r <= 1.0:
            raise UsageError(f"rate {r} outside (0, 1]")
    return rates


def _parse_weights(arg: str | None) -> WeightVector | None:
    if arg is None:
        return None
    if "," in arg:
        parts = [p.strip() for p in arg.split(",")]
        if len(parts) not in (3, 4):
            raise UsageError("inline weights must be w_ic,w_spc,w_sc[,w_dc]")
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise UsageError(f"cannot parse weights {arg!r}")
        try:
            return WeightVector(*values)
        except ValueError as err:
            raise UsageError(f"invalid weights: {err}")
    path = Path(arg)
    if not path.exists():
        raise UsageError(f"weights file {arg!r} not found")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        return WeightVector(
            w_ic=float(doc["w_ic"]),
            w_spc=float(doc["w_spc"]),
            w_sc=float(doc["w_sc"]),
            w_dc=float(doc.get("w_dc", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise UsageError(f"invalid weights file {arg!r}: {err}")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        bundle_path=Path(args.bundle),
        label_map_path=Path(args.label_map) if getattr(args, "label_map", None) else None,
        weights=_parse_weights(getattr(args, "weights", None)),
        seed=getattr(args, "seed", None),
        rates=_parse_rates(args.rates) if getattr(args, "rates", None) else (),
        architecture=getattr(args, "arch", "naive"),
        out_dir=Path(args.out) if getattr(args, "out", None) else None,
        out_format=getattr(args, "format", "text-table"),
        parse_mode=getattr(args, "mode", "strict"),
        jobs=getattr(args, "jobs", 1),
        n_perm=getattr(args, "perm", 10_000),
    )


def _load_inputs(config: RunConfig):
    if not config.bundle_path.exists():
        raise UsageError(f"bundle file {config.bundle_path} not found")
    label_map = LabelMap()
    if config.label_map_path is not None:
        if not config.label_map_path.exists():
            raise UsageError(f"label map file {config.label_map_path} not found")
        label_map = load_label_map(config.label_map_path)
    return load_bundle(config.bundle_path, label_map=label_map, mode=config.parse_mode)


def _ensure_out(config: RunConfig) -> Path:
    out = config.out_dir if config.out_dir is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _aggregate_doc(scores) -> dict:
    return {
        dim: {"mean": agg.mean, "count": agg.count} for dim, agg in scores.aggregates.items()
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(config: RunConfig) -> int:
    if not config.bundle_path.exists():
        raise UsageError(f"bundle file {config.bundle_path} not found")
    failures = 0
    seen: set[str] = set()
    dim: int | None = None
    with open(config.bundle_path, "rb") as fh:
        for line_no, event, err in bundle_mod.iter_bundle_records(fh):
            if err is not None:
                print(f"-\tSCHEMA\tline {line_no}: {err}")
                failures += 1
                continue
            assert event is not None
            if event.event_id in seen:
                print(f"{event.event_id}\tDUPLICATE_EVENT_ID\tline {line_no}")
                failures += 1
            seen.add(event.event_id)
            if dim is None:
                dim = event.image_embedding.shape[0]
            elif event.image_embedding.shape[0] != dim:
                print(
                    f"{event.event_id}\t{bundle_mod.EMBEDDING_DIM_MISMATCH}\t"
                    f"line {line_no}: bundle dimension is {dim}"
                )
                failures += 1
            report = validate_event(event)
            for violation in report.violations:
                print(f"{event.event_id}\t{violation.code}\t{violation.message}")
                failures += 1
    return EXIT_OK if failures == 0 else EXIT_ANALYSIS


def _print_summary_table(scores) -> None:
    print(f"{'dimension':<12}{'mean':>12}{'count':>8}")
    for dim in DIMENSIONS + ("mcs",):
        agg = scores.aggregates[dim]
        mean = "-" if agg.mean is None else f"{agg.mean:.4f}"
        print(f"{dim:<12}{mean:>12}{agg.count:>8}")


def _score_one_architecture(bundle, architecture: str, weights: WeightVector) -> tuple:
    if architecture != "naive":
        bundle = transform_bundle(bundle, architecture, FusionThresholds())
    scores = score_bundle(bundle, MetricConfig(), weights)
    summary = {
        "n_events": len(scores.per_event),
        "aggregates": _aggregate_doc(scores),
        "weights": {
            "w_ic": weights.w_ic,
            "w_spc": weights.w_spc,
            "w_sc": weights.w_sc,
            "w_dc": weights.w_dc,
        },
        "architecture": architecture,
    }
    try:
        summary["composite_of_means"] = scores.composite_of_means(weights)
    except CoherenceError:
        summary["composite_of_means"] = None
    return scores, summary


def cmd_score(config: RunConfig) -> int:
    bundle = _load_inputs(config)
    weights = config.weights if config.weights is not None else WeightVector.equal()
    out = _ensure_out(config)
    architectures = ARCHITECTURES if config.architecture == "all" else (config.architecture,)
    summaries = {}
    for arch in architectures:
        scores, summary = _score_one_architecture(bundle, arch, weights)
        summaries[arch] = (scores, summary)
        csv_name = "scores.csv" if len(architectures) == 1 else f"scores_{arch}.csv"
        (out / csv_name).write_text(scores_to_csv(scores.per_event), encoding="utf-8")
    if len(architectures) == 1:
        doc = summaries[architectures[0]][1]
    else:
        doc = {arch: summary for arch, (_, summary) in summaries.items()}
    _write_json(out / "summary.json", doc)
    if config.out_format == "structured":
        print(json.dumps(doc, indent=2, sort_keys=True))
    elif config.out_format == "csv":
        for arch in architectures:
            print(scores_to_csv(summaries[arch][0].per_event), end="")
    else:
        for arch in architectures:
            scores, summary = summaries[arch]
            if len(architectures) > 1:
                print(f"[{arch}]")
            _print_summary_table(scores)
            if summary["composite_of_means"] is not None:
                print(f"composite of means: {summary['composite_of_means']:.4f}")
    return EXIT_OK


def cmd_compare(config: RunConfig) -> int:
    bundle = _load_inputs(config)
    weights = config.weights if config.weights is not None else WeightVector.equal()
    comparison = compare_architectures(bundle, MetricConfig(), FusionThresholds(), weights)
    doc = {
        "aggregates": {arch: _aggregate_doc(comparison.scores[arch]) for arch in ARCHITECTURES},
        "tests": {
            dim: {"h": t.h, "p": t.p, "n_per_group": list(t.n)}
            for dim, t in comparison.tests.items()
        },
    }
    out = _ensure_out(config)
    _write_json(out / "comparison.json", doc)
    if config.out_format == "structured":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(f"{'architecture':<14}" + "".join(f"{d:>10}" for d in DIMENSIONS + ("mcs",)))
        for arch in ARCHITECTURES:
            row = [arch]
            for dim in DIMENSIONS + ("mcs",):
                mean = comparison.scores[arch].aggregates[dim].mean
                row.append("-" if mean is None else f"{mean:.3f}")
            print(f"{row[0]:<14}" + "".join(f"{v:>10}" for v in row[1:]))
        for dim, t in comparison.tests.items():
            print(f"KW[{dim}]: H = {t.h:.3f}, p = {t.p:.3g}, n = {list(t.n)}")
    return EXIT_OK


def cmd_perturb(config: RunConfig) -> int:
    bundle = _load_inputs(config)
    assert config.seed is not None
    rates = config.rates or (0.1, 0.2, 0.5)
    matrix = run_perturbation_suite(
        bundle, rates=rates, seed=config.seed, kinds=ALL_KINDS, jobs=config.jobs
    )
    verdicts = crosstalk_check(matrix)
    cells_doc = []
    for cell in matrix.cells:
        verdict = verdicts[(cell.kind, cell.rate)]
        cells_doc.append(
            {
                "kind": cell.kind.value,
                "rate": cell.rate,
                "before": cell.before,
                "after": cell.after,
                "rel_delta": cell.rel_delta,
                "clamp_limited": cell.clamp_limited,
                "verdict": {"passed": verdict.passed, "reasons": list(verdict.reasons)},
            }
        )
    doc = {
        "seed": matrix.seed,
        "baseline": matrix.baseline,
        "counts": matrix.counts,
        "cells": cells_doc,
    }
    out = _ensure_out(config)
    _write_json(out / "impact.json", doc)
    table = render_impact_table(matrix)
    (out / "impact.txt").write_text(table + "\n", encoding="utf-8")
    if config.out_format == "structured":
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(table)
        for (kind, rate), verdict in verdicts.items():
            status = "PASS" if verdict.passed else "FAIL"
            line = f"{kind.value}@{rate:g}: {status}"
            if verdict.reasons:
                line += " (" + "; ".join(verdict.reasons) + ")"
            print(line)
    return EXIT_OK


def cmd_learn_weights(config: RunConfig) -> int:
    bundle = _load_inputs(config)
    assert config.seed is not None
    scores = score_bundle(bundle, MetricConfig(), WeightVector.equal())
    learned: LearnedWeights = learn_weights(
        scores.per_event, NelderMeadOptions(), seed=config.seed, jobs=config.jobs
    )
    composites = []
    dcs = []
    for s in scores.per_event:
        if s.ic is None or s.spc is None or s.sc is None or s.dc is None:
            continue
        composites.append(
            learned.weights.w_ic * s.ic + learned.weights.w_spc * s.spc + learned.weights.w_sc * s.sc
        )
        dcs.append(s.dc)
    p_value = spearman_pvalue(
        composites, dcs, method=PERMUTATION, n_perm=config.n_perm, seed=config.seed
    )
    doc = {
        "w_ic": learned.weights.w_ic,
        "w_spc": learned.weights.w_spc,
        "w_sc": learned.weights.w_sc,
        "rho": learned.rho,
        "rho_p_value": p_value,
        "n_events": learned.n_events,
        "seed": learned.seed,
        "per_dimension_rho": learned.per_dimension_rho,
    }
    out = _ensure_out(config)
    _write_json(out / "weights.json", doc)
    print(
        f"learned weights: w_ic = {learned.weights.w_ic:.4f}, "
        f"w_spc = {learned.weights.w_spc:.4f}, w_sc = {learned.weights.w_sc:.4f}"
    )
    print(f"composite rho = {learned.rho:.4f} (p = {p_value:.4g}, n = {learned.n_events})")
    for dim, rho in learned.per_dimension_rho.items():
        shown = "-" if rho is None else f"{rho:.4f}"
        print(f"single-dimension rho[{dim}] = {shown}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, *, seed_required: bool = False) -> None:
    parser.add_argument("--bundle", required=True, help="bundle file (mcs-bundle/1)")
    parser.add_argument("--label-map", help="JSON {raw: canonical} label map")
    parser.add_argument("--out", help="output directory (default: current directory)")
    parser.add_argument("--format", choices=FORMATS, default="text-table")
    parser.add_argument("--mode", choices=("strict", "lenient"), default="strict")
    parser.add_argument("--jobs", type=int, default=1, help="internal parallelism width")
    if seed_required:
        parser.add_argument("--seed", type=int, required=True, help="rng seed (mandatory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmcoherence",
        description="Score the internal coherence of multimodal event bundles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check every event against the bundle invariants")
    p.add_argument("--bundle", required=True)
    p.add_argument("--mode", choices=("strict", "lenient"), default="strict")

    p = sub.add_parser("score", help="per-event scores and a summary document")
    _add_common(p)
    p.add_argument("--weights", help="weights file or inline w_ic,w_spc,w_sc[,w_dc]")
    p.add_argument("--arch", choices=ARCHITECTURES + ("all",), default="naive")

    p = sub.add_parser("compare", help="score under all three fusion architectures")
    _add_common(p)
    p.add_argument("--weights", help="weights file or inline triple")

    p = sub.add_parser("perturb", help="run the perturbation suite and cross-talk check")
    _add_common(p, seed_required=True)
    p.add_argument("--rates", default="0.1,0.2,0.5", help="comma-separated rates in (0, 1]")

    p = sub.add_parser("learn-weights", help="learn composite weights on the simplex")
    _add_common(p, seed_required=True)
    p.add_argument("--perm", type=int, default=10_000, help="permutations for the p-value")

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING, format="%(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "score": cmd_score,
        "compare": cmd_compare,
        "perturb": cmd_perturb,
        "learn-weights": cmd_learn_weights,
    }
    try:
        config = _config_from_args(args)
        return handlers[args.command](config)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except BundleError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ANALYSIS
    except CoherenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
