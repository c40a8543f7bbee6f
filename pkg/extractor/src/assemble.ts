/** Extraction pipeline: annotations + images -> wire-format bundle + manifest. */
import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { loadAnnotations } from "./annotations.js";
import type { Backends } from "./backends.js";
import { createBackends } from "./backends.js";
import { ImageDecodeError, probeImage, type ProbedImage } from "./imageprobe.js";
import { sha256Hex } from "./hash.js";
import {
  SCHEMA_VERSION,
  type AnnotatedImage,
  type Bbox,
  type ExtractionConfig,
  type Manifest,
  type ManifestEntry,
  type WireEvent,
} from "./types.js";

export interface ExtractionResult {
  bundleText: string;
  manifest: Manifest;
  events: WireEvent[];
}

function clampBox(bbox: Bbox, width: number, height: number): Bbox | null {
  const [x, y, w, h] = bbox;
  if (!(w > 0) || !(h > 0)) return null;
  const x1 = Math.min(Math.max(x, 0), width);
  const y1 = Math.min(Math.max(y, 0), height);
  const x2 = Math.min(Math.max(x + w, 0), width);
  const y2 = Math.min(Math.max(y + h, 0), height);
  if (x2 - x1 <= 0 || y2 - y1 <= 0) return null;
  return [x1, y1, x2 - x1, y2 - y1];
}

async function buildEvent(
  annotated: AnnotatedImage,
  image: ProbedImage,
  backends: Backends,
  config: ExtractionConfig,
  flags: string[],
): Promise<WireEvent> {
  const { width, height } = image;

  const objects = [];
  const keptIds = new Set<string>();
  for (const obj of annotated.objects) {
    const bbox = clampBox(obj.bbox, width, height);
    if (bbox === null || obj.label.trim() === "") {
      flags.push(`DROPPED_OBJECT:${annotated.imageId}:${obj.id}`);
      continue;
    }
    keptIds.add(obj.id);
    objects.push({ id: obj.id, label: obj.label, bbox });
  }
  const relationships = annotated.relationships.filter(
    (r) => keptIds.has(r.subject_id) && keptIds.has(r.object_id),
  );

  const regions = [];
  for (const region of annotated.regions) {
    if (region.text.trim() === "") {
      flags.push(`DROPPED_REGION:${annotated.imageId}`);
      continue;
    }
    let text = region.text;
    if (text.length > config.maxTextLength) {
      text = text.slice(0, config.maxTextLength);
      flags.push(`TRUNCATED_TEXT:${annotated.imageId}`);
    }
    const bbox = clampBox(region.bbox ?? [0, 0, width, height], width, height);
    if (bbox === null) {
      flags.push(`DROPPED_REGION:${annotated.imageId}`);
      continue;
    }
    regions.push({ text, bbox, embedding: await backends.embedder.embedText(text) });
  }

  const qa = [];
  for (const pair of annotated.qa.slice(0, config.maxQaPerImage)) {
    if (pair.goldAnswer.trim() === "") {
      flags.push(`DROPPED_QA:${annotated.imageId}`);
      continue;
    }
    let predicted: string;
    try {
      predicted = await backends.vqa.answer(annotated.imageId, pair.question, pair.goldAnswer);
    } catch {
      predicted = ""; // the model abstained; the wire format allows it
      flags.push(`VQA_FAILURE:${annotated.imageId}`);
    }
    qa.push({ question: pair.question, gold_answer: pair.goldAnswer, predicted_answer: predicted });
  }

  const detections = (await backends.detector.detect(image, annotated)).filter(
    (d) => d.confidence >= config.confidenceFloor,
  );

  return {
    event_id: annotated.imageId,
    image: { width, height, embedding: await backends.embedder.embedImage(image) },
    objects,
    relationships,
    regions,
    qa,
    detections,
  };
}

function configHash(config: ExtractionConfig): string {
  const material = JSON.stringify({
    detector: config.detector,
    embedder: config.embedder,
    vqa: config.vqa,
    confidenceFloor: config.confidenceFloor,
    maxQaPerImage: config.maxQaPerImage,
    embeddingDim: config.embeddingDim,
    maxTextLength: config.maxTextLength,
    style: config.style,
  });
  return sha256Hex([material]).slice(0, 16);
}

export async function extractBundle(
  config: ExtractionConfig,
  backends?: Backends,
): Promise<ExtractionResult> {
  const resolved = backends ?? createBackends(config);
  const annotatedImages = loadAnnotations(config.annotationPath, config.style);
  const events: WireEvent[] = [];
  const skipped: ManifestEntry[] = [];
  const flags: string[] = [];

  for (const annotated of annotatedImages) {
    let image: ProbedImage;
    try {
      image = probeImage(readFileSync(join(config.imageDir, annotated.fileName)));
    } catch (err) {
      const reason =
        err instanceof ImageDecodeError ? `decode failure: ${err.message}` : `unreadable: ${err}`;
      skipped.push({ imageId: annotated.imageId, reason });
      continue;
    }
    events.push(await buildEvent(annotated, image, resolved, config, flags));
  }

  const lines = [SCHEMA_VERSION, ...events.map((e) => JSON.stringify(e))];
  const manifest: Manifest = {
    schema: SCHEMA_VERSION,
    detector: resolved.detector.identifier,
    embedder: resolved.embedder.identifier,
    vqa: resolved.vqa.identifier,
    configHash: configHash(config),
    events: events.length,
    skipped,
    flags,
  };
  return { bundleText: lines.join("\n") + "\n", manifest, events };
}

export async function extractToFiles(
  config: ExtractionConfig,
  backends?: Backends,
): Promise<ExtractionResult> {
  const result = await extractBundle(config, backends);
  writeFileSync(config.outputPath, result.bundleText, "utf-8");
  writeFileSync(config.manifestPath, JSON.stringify(result.manifest, null, 2) + "\n", "utf-8");
  return result;
}
