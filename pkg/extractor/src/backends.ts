/** Model backends behind one interface.
 *
 * Production extraction plugs an object detector, an image/text embedder,
 * and a VQA answerer in here (the default identifiers name the usual
 * suspects). This build ships the deterministic `stub` family, which needs
 * no model weights: detections echo the annotated objects with jittered
 * boxes and hash-spread confidences, embeddings are seeded unit vectors, and
 * answers follow a stable hash. That is enough to exercise the full wire
 * format, and every output is reproducible byte-for-byte.
 */
import type { ProbedImage } from "./imageprobe.js";
import type { AnnotatedImage, Bbox, ExtractionConfig, WireDetection } from "./types.js";
import { mulberry32, seedFrom, unitVector } from "./hash.js";

export interface DetectorBackend {
  readonly identifier: string;
  detect(image: ProbedImage, annotated: AnnotatedImage): Promise<WireDetection[]>;
}

export interface EmbedderBackend {
  readonly identifier: string;
  readonly dim: number;
  embedImage(image: ProbedImage): Promise<number[]>;
  embedText(text: string): Promise<number[]>;
}

export interface VqaBackend {
  readonly identifier: string;
  answer(imageId: string, question: string, goldAnswer: string): Promise<string>;
}

export interface Backends {
  detector: DetectorBackend;
  embedder: EmbedderBackend;
  vqa: VqaBackend;
}

function isStub(identifier: string): boolean {
  return identifier === "stub" || identifier.startsWith("stub:");
}

function clampBox(bbox: Bbox, width: number, height: number): Bbox {
  const [x, y, w, h] = bbox;
  const cw = Math.min(w, width);
  const ch = Math.min(h, height);
  const cx = Math.min(Math.max(x, 0), width - cw);
  const cy = Math.min(Math.max(y, 0), height - ch);
  return [cx, cy, cw, ch];
}

export class StubDetector implements DetectorBackend {
  constructor(
    readonly identifier: string,
    private readonly floor: number,
  ) {}

  async detect(image: ProbedImage, annotated: AnnotatedImage): Promise<WireDetection[]> {
    const out: WireDetection[] = [];
    annotated.objects.forEach((obj, index) => {
      const rand = mulberry32(seedFrom([this.identifier, annotated.imageId, obj.id]));
      const [x, y, w, h] = obj.bbox;
      const jittered: Bbox = [
        x + (rand() - 0.5) * 0.1 * w,
        y + (rand() - 0.5) * 0.1 * h,
        w,
        h,
      ];
      // the first prediction per image is confident; the rest spread down to
      // the emission floor so downstream thresholds have something to cut
      const confidence =
        index === 0 ? 0.9 + 0.08 * rand() : this.floor + (0.95 - this.floor) * rand();
      out.push({
        label: obj.label,
        bbox: clampBox(jittered, image.width, image.height),
        confidence,
      });
    });
    return out.filter((d) => d.confidence >= this.floor);
  }
}

export class StubEmbedder implements EmbedderBackend {
  constructor(
    readonly identifier: string,
    readonly dim: number,
  ) {}

  async embedImage(image: ProbedImage): Promise<number[]> {
    return unitVector(this.dim, ["image", this.identifier, image.bytes]);
  }

  async embedText(text: string): Promise<number[]> {
    return unitVector(this.dim, ["text", this.identifier, text]);
  }
}

export class StubVqa implements VqaBackend {
  constructor(readonly identifier: string) {}

  async answer(imageId: string, question: string, goldAnswer: string): Promise<string> {
    const rand = mulberry32(seedFrom([this.identifier, imageId, question]));
    return rand() < 0.7 ? goldAnswer : "unsure";
  }
}

export function createBackends(config: ExtractionConfig): Backends {
  const missing = [config.detector, config.embedder, config.vqa].filter((id) => !isStub(id));
  if (missing.length > 0) {
    throw new Error(
      `backend(s) ${missing.map((m) => `'${m}'`).join(", ")} require a model runtime that is ` +
        "not part of this build; pass 'stub' identifiers or plug in Backends implementations",
    );
  }
  return {
    detector: new StubDetector(config.detector, config.confidenceFloor),
    embedder: new StubEmbedder(config.embedder, config.embeddingDim),
    vqa: new StubVqa(config.vqa),
  };
}
