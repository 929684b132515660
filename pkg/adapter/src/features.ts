/** Writer for the features.bin format: "MXF1", u32 count, u32 dim, f32 rows. */

import * as fs from "fs";
import * as path from "path";

export function writeFeaturesBin(
  outDir: string,
  ids: string[],
  rows: Float64Array[],
  dim: number
): void {
  const header = Buffer.alloc(12);
  header.write("MXF1", 0, "latin1");
  header.writeUInt32LE(ids.length, 4);
  header.writeUInt32LE(dim, 8);

  const body = Buffer.alloc(ids.length * dim * 4);
  for (let r = 0; r < rows.length; r++) {
    for (let c = 0; c < dim; c++) {
      body.writeFloatLE(Math.fround(rows[r][c]), (r * dim + c) * 4);
    }
  }
  fs.writeFileSync(path.join(outDir, "features.bin"), Buffer.concat([header, body]));
  fs.writeFileSync(
    path.join(outDir, "features.idx.json"),
    JSON.stringify(ids) + "\n"
  );
}
