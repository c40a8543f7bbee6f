#!/usr/bin/env node
/** Command line: extract an mcs-bundle/1 file from images plus annotations.
 *
 * Example:
 *   mcs-extract --images ./imgs --annotations coco.json --style coco \
 *     --out bundle.ndjson --detector stub --embedder stub --vqa stub
 */
import { parseArgs } from "node:util";
import { extractToFiles } from "./assemble.js";
import { DEFAULT_CONFIG, type AnnotationStyle, type ExtractionConfig } from "./types.js";

function usage(): void {
  console.error(
    [
      "usage: mcs-extract --images DIR --annotations FILE --style coco|vg --out FILE",
      "  [--manifest FILE] [--detector ID] [--embedder ID] [--vqa ID]",
      "  [--floor F] [--max-qa N] [--dim D] [--max-text N] [--batch-size N] [--device D]",
      "",
      "Backend identifiers default to the usual detector/embedder/VQA model names,",
      "which require a model runtime; pass 'stub' for the deterministic offline",
      "backends used in tests.",
    ].join("\n"),
  );
}

export async function main(argv: string[]): Promise<number> {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        images: { type: "string" },
        annotations: { type: "string" },
        style: { type: "string" },
        out: { type: "string" },
        manifest: { type: "string" },
        detector: { type: "string", default: DEFAULT_CONFIG.detector },
        embedder: { type: "string", default: DEFAULT_CONFIG.embedder },
        vqa: { type: "string", default: DEFAULT_CONFIG.vqa },
        floor: { type: "string", default: String(DEFAULT_CONFIG.confidenceFloor) },
        "max-qa": { type: "string", default: String(DEFAULT_CONFIG.maxQaPerImage) },
        dim: { type: "string", default: String(DEFAULT_CONFIG.embeddingDim) },
        "max-text": { type: "string", default: String(DEFAULT_CONFIG.maxTextLength) },
        "batch-size": { type: "string", default: String(DEFAULT_CONFIG.batchSize) },
        device: { type: "string", default: DEFAULT_CONFIG.device },
      },
    }));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    usage();
    return 2;
  }

  if (!values.images || !values.annotations || !values.style || !values.out) {
    usage();
    return 2;
  }
  if (values.style !== "coco" && values.style !== "vg") {
    console.error(`error: unknown annotation style '${values.style}'`);
    return 2;
  }

  const config: ExtractionConfig = {
    imageDir: values.images,
    annotationPath: values.annotations,
    style: values.style as AnnotationStyle,
    outputPath: values.out,
    manifestPath: values.manifest ?? `${values.out}.manifest.json`,
    detector: values.detector!,
    embedder: values.embedder!,
    vqa: values.vqa!,
    confidenceFloor: Number(values.floor),
    maxQaPerImage: Number(values["max-qa"]),
    embeddingDim: Number(values.dim),
    maxTextLength: Number(values["max-text"]),
    batchSize: Number(values["batch-size"]),
    device: values.device!,
  };
  if (!(config.confidenceFloor >= 0 && config.confidenceFloor <= 1)) {
    console.error("error: --floor must lie in [0, 1]");
    return 2;
  }
  if (!(config.maxQaPerImage >= 1) || !(config.embeddingDim >= 2)) {
    console.error("error: --max-qa must be >= 1 and --dim >= 2");
    return 2;
  }

  try {
    const result = await extractToFiles(config);
    console.error(
      `wrote ${result.events.length} events to ${config.outputPath} ` +
        `(${result.manifest.skipped.length} skipped, ${result.manifest.flags.length} flags)`,
    );
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
