/** Minimal PNG/JPEG probing: enough to know an image decodes and its size. */

export interface ProbedImage {
  width: number;
  height: number;
  format: "png" | "jpeg";
  bytes: Buffer;
}

const PNG_SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

export class ImageDecodeError extends Error {}

export function probeImage(bytes: Buffer): ProbedImage {
  if (bytes.length >= 24 && bytes.subarray(0, 8).equals(PNG_SIGNATURE)) {
    // IHDR must be the first chunk: length(4) type(4) width(4) height(4)
    if (bytes.toString("latin1", 12, 16) !== "IHDR") {
      throw new ImageDecodeError("PNG missing IHDR chunk");
    }
    const width = bytes.readUInt32BE(16);
    const height = bytes.readUInt32BE(20);
    if (width === 0 || height === 0) {
      throw new ImageDecodeError("PNG has zero dimension");
    }
    return { width, height, format: "png", bytes };
  }
  if (bytes.length >= 4 && bytes[0] === 0xff && bytes[1] === 0xd8) {
    // walk JPEG segments until a start-of-frame marker carries the size
    let offset = 2;
    while (offset + 9 < bytes.length) {
      if (bytes[offset] !== 0xff) {
        throw new ImageDecodeError("JPEG marker desync");
      }
      const marker = bytes[offset + 1]!;
      if (marker === 0xd8 || (marker >= 0xd0 && marker <= 0xd7)) {
        offset += 2;
        continue;
      }
      const length = bytes.readUInt16BE(offset + 2);
      const isSof = marker >= 0xc0 && marker <= 0xcf && marker !== 0xc4 && marker !== 0xc8 && marker !== 0xcc;
      if (isSof) {
        const height = bytes.readUInt16BE(offset + 5);
        const width = bytes.readUInt16BE(offset + 7);
        if (width === 0 || height === 0) {
          throw new ImageDecodeError("JPEG has zero dimension");
        }
        return { width, height, format: "jpeg", bytes };
      }
      offset += 2 + length;
    }
    throw new ImageDecodeError("JPEG has no start-of-frame segment");
  }
  throw new ImageDecodeError("unrecognized image format");
}
