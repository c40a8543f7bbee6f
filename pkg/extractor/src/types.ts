/** Wire-format records (mcs-bundle/1) and extraction configuration. */

export const SCHEMA_VERSION = "mcs-bundle/1";

export type Bbox = [x: number, y: number, w: number, h: number];

export interface WireObject {
  id: string;
  label: string;
  bbox: Bbox;
}

export interface WireRelationship {
  subject_id: string;
  predicate: string;
  object_id: string;
}

export interface WireRegion {
  text: string;
  bbox: Bbox;
  embedding: number[];
}

export interface WireQa {
  question: string;
  gold_answer: string;
  predicted_answer: string;
}

export interface WireDetection {
  label: string;
  bbox: Bbox;
  confidence: number;
}

export interface WireEvent {
  event_id: string;
  image: { width: number; height: number; embedding: number[] };
  objects: WireObject[];
  relationships: WireRelationship[];
  regions: WireRegion[];
  qa: WireQa[];
  detections: WireDetection[];
}

/** One image's annotation-side records, normalized from either input style. */
export interface AnnotatedImage {
  imageId: string;
  fileName: string;
  width?: number;
  height?: number;
  objects: { id: string; label: string; bbox: Bbox }[];
  relationships: WireRelationship[];
  regions: { text: string; bbox?: Bbox }[];
  qa: { question: string; goldAnswer: string }[];
}

export type AnnotationStyle = "coco" | "vg";

export interface ExtractionConfig {
  imageDir: string;
  annotationPath: string;
  style: AnnotationStyle;
  outputPath: string;
  manifestPath: string;
  /** Backend identifiers; deterministic offline backends use the stub: prefix. */
  detector: string;
  embedder: string;
  vqa: string;
  /** Detections are emitted down to this floor so thresholds can be swept downstream. */
  confidenceFloor: number;
  maxQaPerImage: number;
  embeddingDim: number;
  /** Embedder input cap in characters; longer region texts are truncated and flagged. */
  maxTextLength: number;
  batchSize: number;
  device: string;
}

export const DEFAULT_CONFIG: Omit<
  ExtractionConfig,
  "imageDir" | "annotationPath" | "style" | "outputPath" | "manifestPath"
> = {
  detector: "facebook/detr-resnet-50",
  embedder: "openai/clip-vit-base-patch32",
  vqa: "dandelin/vilt-b32-finetuned-vqa",
  confidenceFloor: 0.05,
  maxQaPerImage: 3,
  embeddingDim: 64,
  maxTextLength: 256,
  batchSize: 8,
  device: "cpu",
};

export interface ManifestEntry {
  imageId: string;
  reason: string;
}

export interface Manifest {
  schema: string;
  detector: string;
  embedder: string;
  vqa: string;
  configHash: string;
  events: number;
  skipped: ManifestEntry[];
  flags: string[];
}
