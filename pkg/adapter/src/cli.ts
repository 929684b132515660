#!/usr/bin/env node
import { convert } from "./convert";

function main(): number {
  const [manifest, outDir] = process.argv.slice(2);
  if (!manifest || !outDir) {
    console.error("usage: convert <manifest.json> <out-dir>");
    return 1;
  }
  try {
    const report = convert(manifest, outDir);
    console.log(
      `converted: ${report.kept.albums} albums, ${report.kept.photos} photos, ` +
        `${report.kept.qas} qas, ${report.kept.features} feature rows; ` +
        `${report.dropped.length} records dropped`
    );
    for (const d of report.dropped) {
      console.log(`dropped ${d.kind} ${d.id}: ${d.reason}`);
    }
    return 0;
  } catch (err) {
    console.error(`conversion failed: ${(err as Error).message}`);
    return 2;
  }
}

process.exitCode = main();
