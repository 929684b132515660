/** Minimal .npy reader for little-endian float32/float64 2-D matrices. */

const MAGIC = "\x93NUMPY";

function parseHeader(raw: string) {
  const descr = /'descr':\s*'([^']+)'/.exec(raw)?.[1] ?? "";
  const fortran = /'fortran_order':\s*(True|False)/.exec(raw)?.[1] === "True";
  const shapeText = /'shape':\s*\(([^)]*)\)/.exec(raw)?.[1] ?? "";
  const shape = shapeText
    .split(",")
    .map((v) => Number.parseInt(v.trim(), 10))
    .filter((v) => Number.isFinite(v));
  return { descr, fortran, shape };
}

export function parseNpyMatrix(buffer: Buffer): { rows: number; cols: number; data: Float64Array } {
  if (buffer.subarray(0, 6).toString("latin1") !== MAGIC) {
    throw new Error("not an .npy file (bad magic)");
  }
  const major = buffer.readUInt8(6);
  const headerLength = major === 1 ? buffer.readUInt16LE(8) : buffer.readUInt32LE(8);
  const headerOffset = major === 1 ? 10 : 12;
  const header = buffer.subarray(headerOffset, headerOffset + headerLength).toString("latin1");
  const { descr, fortran, shape } = parseHeader(header);
  if (fortran) {
    throw new Error("fortran-ordered .npy arrays are not supported");
  }
  if (shape.length !== 2) {
    throw new Error(`expected a 2-D array, got shape (${shape.join(", ")})`);
  }
  const [rows, cols] = shape;
  const dataOffset = headerOffset + headerLength;
  const count = rows * cols;
  const data = new Float64Array(count);
  if (descr === "<f4") {
    for (let i = 0; i < count; i++) {
      data[i] = buffer.readFloatLE(dataOffset + i * 4);
    }
  } else if (descr === "<f8") {
    for (let i = 0; i < count; i++) {
      data[i] = buffer.readDoubleLE(dataOffset + i * 8);
    }
  } else {
    throw new Error(`unsupported dtype '${descr}' (need <f4 or <f8)`);
  }
  return { rows, cols, data };
}
