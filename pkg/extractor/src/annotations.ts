/** COCO-style and Visual-Genome-style annotation file parsing.
 *
 * COCO-style: one object with `images`, `annotations` (instances carry
 * `bbox` + `category_id`, captions carry `caption`), and `categories`.
 * VG-style: an array of per-image records with `objects`, `relationships`,
 * `regions`, and `qas`. Both are normalized to AnnotatedImage.
 */
import { readFileSync } from "node:fs";
import type { AnnotatedImage, AnnotationStyle, Bbox } from "./types.js";

export class AnnotationFormatError extends Error {}

function asArray(value: unknown, what: string): unknown[] {
  if (!Array.isArray(value)) throw new AnnotationFormatError(`${what} must be an array`);
  return value;
}

function asRecord(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new AnnotationFormatError(`${what} must be an object`);
  }
  return value as Record<string, unknown>;
}

function asBbox(value: unknown, what: string): Bbox {
  const arr = asArray(value, what);
  if (arr.length !== 4 || !arr.every((v) => typeof v === "number")) {
    throw new AnnotationFormatError(`${what} must be [x, y, w, h]`);
  }
  return [arr[0] as number, arr[1] as number, arr[2] as number, arr[3] as number];
}

export function parseCoco(raw: unknown): AnnotatedImage[] {
  const doc = asRecord(raw, "COCO document");
  const categories = new Map<number, string>();
  for (const cat of asArray(doc.categories ?? [], "categories")) {
    const rec = asRecord(cat, "category");
    categories.set(rec.id as number, String(rec.name));
  }
  const images = new Map<string, AnnotatedImage>();
  for (const img of asArray(doc.images, "images")) {
    const rec = asRecord(img, "image");
    const id = String(rec.id);
    images.set(id, {
      imageId: id,
      fileName: String(rec.file_name),
      width: typeof rec.width === "number" ? rec.width : undefined,
      height: typeof rec.height === "number" ? rec.height : undefined,
      objects: [],
      relationships: [],
      regions: [],
      qa: [],
    });
  }
  for (const ann of asArray(doc.annotations ?? [], "annotations")) {
    const rec = asRecord(ann, "annotation");
    const image = images.get(String(rec.image_id));
    if (image === undefined) continue;
    if (typeof rec.caption === "string") {
      image.regions.push({ text: rec.caption });
      continue;
    }
    if (rec.bbox !== undefined) {
      const label = categories.get(rec.category_id as number) ?? `category_${rec.category_id}`;
      image.objects.push({
        id: String(rec.id ?? `${image.imageId}_${image.objects.length}`),
        label,
        bbox: asBbox(rec.bbox, "annotation.bbox"),
      });
    }
  }
  return [...images.values()].sort((a, b) => a.imageId.localeCompare(b.imageId));
}

export function parseVisualGenome(raw: unknown): AnnotatedImage[] {
  const out: AnnotatedImage[] = [];
  for (const entry of asArray(raw, "VG document")) {
    const rec = asRecord(entry, "VG image record");
    const id = String(rec.image_id ?? rec.id);
    const objects = [];
    for (const objRaw of asArray(rec.objects ?? [], "objects")) {
      const obj = asRecord(objRaw, "object");
      const names = Array.isArray(obj.names) ? obj.names : [obj.name];
      const label = String(names[0] ?? "");
      objects.push({
        id: String(obj.object_id ?? obj.id),
        label,
        bbox: [
          Number(obj.x ?? 0),
          Number(obj.y ?? 0),
          Number(obj.w ?? 0),
          Number(obj.h ?? 0),
        ] as Bbox,
      });
    }
    const relationships = [];
    for (const relRaw of asArray(rec.relationships ?? [], "relationships")) {
      const rel = asRecord(relRaw, "relationship");
      relationships.push({
        subject_id: String(rel.subject_id),
        predicate: String(rel.predicate),
        object_id: String(rel.object_id),
      });
    }
    const regions = [];
    for (const regRaw of asArray(rec.regions ?? [], "regions")) {
      const reg = asRecord(regRaw, "region");
      regions.push({
        text: String(reg.phrase ?? reg.text ?? ""),
        bbox:
          reg.x !== undefined
            ? ([Number(reg.x), Number(reg.y), Number(reg.width ?? reg.w), Number(reg.height ?? reg.h)] as Bbox)
            : undefined,
      });
    }
    const qa = [];
    for (const qaRaw of asArray(rec.qas ?? [], "qas")) {
      const pair = asRecord(qaRaw, "qa");
      const question = String(pair.question ?? "");
      if (question.trim() === "") {
        throw new AnnotationFormatError(
          `VG image ${id}: qa ${qa.length} has an empty question`,
        );
      }
      qa.push({ question, goldAnswer: String(pair.answer ?? "") });
    }
    out.push({
      imageId: id,
      fileName: String(rec.file_name ?? `${id}.jpg`),
      width: typeof rec.width === "number" ? rec.width : undefined,
      height: typeof rec.height === "number" ? rec.height : undefined,
      objects,
      relationships,
      regions,
      qa,
    });
  }
  return out.sort((a, b) => a.imageId.localeCompare(b.imageId));
}

export function loadAnnotations(path: string, style: AnnotationStyle): AnnotatedImage[] {
  const raw = JSON.parse(readFileSync(path, "utf-8"));
  return style === "coco" ? parseCoco(raw) : parseVisualGenome(raw);
}
