/** Test fixtures: minimal valid PNGs and annotation documents. */
import { deflateSync } from "node:zlib";
import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(buf: Buffer): number {
  let c = 0xffffffff;
  for (const byte of buf) c = CRC_TABLE[(c ^ byte) & 0xff]! ^ (c >>> 8);
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, data: Buffer): Buffer {
  const head = Buffer.concat([Buffer.from(type, "latin1"), data]);
  const out = Buffer.alloc(8 + data.length + 4);
  out.writeUInt32BE(data.length, 0);
  head.copy(out, 4);
  out.writeUInt32BE(crc32(head), 8 + data.length);
  return out;
}

/** A valid grayscale PNG with deterministic pixel content. */
export function makePng(width: number, height: number, seed: number): Buffer {
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr.writeUInt8(8, 8); // bit depth
  ihdr.writeUInt8(0, 9); // grayscale
  const raw = Buffer.alloc(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // no filter
    for (let x = 0; x < width; x++) {
      raw[y * (width + 1) + 1 + x] = (seed * 37 + x * 7 + y * 13) % 256;
    }
  }
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", deflateSync(raw)),
    chunk("IEND", Buffer.alloc(0)),
  ]);
}

export interface CocoFixtureOptions {
  imageCount?: number;
  width?: number;
  height?: number;
}

/** COCO-style sample: instances plus caption annotations over tiny PNGs. */
export function writeCocoFixture(dir: string, options: CocoFixtureOptions = {}) {
  const imageCount = options.imageCount ?? 5;
  const width = options.width ?? 64;
  const height = options.height ?? 48;
  mkdirSync(dir, { recursive: true });
  const imageDir = join(dir, "images");
  mkdirSync(imageDir, { recursive: true });

  const images = [];
  const annotations = [];
  let annId = 1;
  for (let i = 1; i <= imageCount; i++) {
    const fileName = `img${i}.png`;
    writeFileSync(join(imageDir, fileName), makePng(width, height, i));
    images.push({ id: i, file_name: fileName, width, height });
    annotations.push(
      { id: annId++, image_id: i, category_id: 1, bbox: [4, 4, 20, 16] },
      { id: annId++, image_id: i, category_id: 2, bbox: [30, 10, 18, 22] },
      { id: annId++, image_id: i, caption: `a zebra standing near a tree in image ${i}` },
      { id: annId++, image_id: i, caption: `wide view of the scene ${i}` },
    );
  }
  const doc = {
    images,
    annotations,
    categories: [
      { id: 1, name: "zebra" },
      { id: 2, name: "tree" },
    ],
  };
  const annotationPath = join(dir, "instances.json");
  writeFileSync(annotationPath, JSON.stringify(doc));
  return { imageDir, annotationPath, imageCount, width, height };
}

/** Visual-Genome-style sample with relationships and QA pairs. */
export function writeVgFixture(dir: string, imageCount = 3) {
  mkdirSync(dir, { recursive: true });
  const imageDir = join(dir, "images");
  mkdirSync(imageDir, { recursive: true });
  const records = [];
  for (let i = 1; i <= imageCount; i++) {
    const fileName = `vg${i}.png`;
    writeFileSync(join(imageDir, fileName), makePng(80, 60, 100 + i));
    records.push({
      image_id: 1000 + i,
      file_name: fileName,
      objects: [
        { object_id: 1, names: ["zebra"], x: 2, y: 2, w: 25, h: 20 },
        { object_id: 2, names: ["dirt road"], x: 40, y: 30, w: 30, h: 20 },
      ],
      relationships: [{ subject_id: "1", predicate: "on", object_id: "2" }],
      regions: [
        { phrase: `a zebra crossing a dirt road ${i}`, x: 0, y: 0, width: 60, height: 40 },
        { phrase: `dusty ground below ${i}` },
      ],
      qas: [
        { question: "What kind of animal?", answer: "zebra" },
        { question: "What is it crossing?", answer: "dirt road" },
        { question: "Is it daytime?", answer: "yes" },
        { question: "How many animals?", answer: "one" },
        { question: "What color is the road?", answer: "brown" },
      ],
    });
  }
  const annotationPath = join(dir, "vg.json");
  writeFileSync(annotationPath, JSON.stringify(records));
  return { imageDir, annotationPath, imageCount };
}
