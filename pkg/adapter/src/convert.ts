/**
 * Conversion from a published dataset dump into the canonical corpus files.
 *
 * Source field names vary by distribution version, so the manifest carries a
 * mapping table per record type. Records that cannot be converted are
 * dropped and reported, never silently patched; referential integrity is
 * enforced to a fixpoint so the emitted files always pass the primary
 * `ingest` validation.
 */

import * as fs from "fs";
import * as path from "path";

import { writeFeaturesBin } from "./features";
import { parseNpyMatrix } from "./npy";
import {
  CanonicalAlbum,
  CanonicalPhoto,
  CanonicalQA,
  ConversionReport,
  DroppedRecord,
  FieldMapping,
  SourceManifest,
} from "./types";

function readJson(file: string): unknown {
  return JSON.parse(fs.readFileSync(file, "utf-8"));
}

function pick(record: Record<string, unknown>, mapping: FieldMapping, field: string): unknown {
  const sourceKey = mapping[field];
  if (sourceKey === null || sourceKey === undefined) {
    return undefined;
  }
  return record[sourceKey];
}

function requireMapped(mapping: FieldMapping, fields: string[], kind: string): void {
  for (const field of fields) {
    if (!(field in mapping)) {
      throw new Error(`manifest mapping for ${kind} is missing required field '${field}'`);
    }
  }
}

function asStringList(value: unknown): string[] | undefined {
  if (value === undefined || value === null) return [];
  if (Array.isArray(value)) return value.map((v) => String(v));
  if (typeof value === "string") {
    return value.trim() === "" ? [] : value.trim().split(/\s+/);
  }
  return undefined;
}

function parseTimestamp(value: unknown): number | undefined {
  if (typeof value === "number" && Number.isFinite(value)) {
    return Math.trunc(value);
  }
  if (typeof value === "string") {
    const text = value.trim();
    if (/^\d+$/.test(text)) return Number.parseInt(text, 10);
    // "YYYY-MM-DD HH:MM:SS" treated as UTC
    const m = /^(\d{4})-(\d{2})-(\d{2})[ T](\d{2}):(\d{2}):(\d{2})$/.exec(text);
    if (m) {
      const ms = Date.UTC(+m[1], +m[2] - 1, +m[3], +m[4], +m[5], +m[6]);
      return Math.trunc(ms / 1000);
    }
  }
  return undefined;
}

function parseGps(value: unknown): { lat: number; lon: number } | null | undefined {
  if (value === undefined || value === null || value === "") return null;
  if (Array.isArray(value) && value.length === 2) {
    const [lat, lon] = value.map(Number);
    if (Number.isFinite(lat) && Number.isFinite(lon)) return { lat, lon };
    return undefined;
  }
  if (typeof value === "object") {
    const rec = value as Record<string, unknown>;
    const lat = Number(rec.lat ?? rec.latitude);
    const lon = Number(rec.lon ?? rec.lng ?? rec.longitude);
    if (Number.isFinite(lat) && Number.isFinite(lon)) return { lat, lon };
    return undefined;
  }
  if (typeof value === "string") {
    const parts = value.trim().split(/[\s,]+/).map(Number);
    if (parts.length === 2 && parts.every(Number.isFinite)) {
      return { lat: parts[0], lon: parts[1] };
    }
  }
  return undefined;
}

function canonicalAnswer(text: string): string {
  return text.trim().toLowerCase().replace(/\s+/g, " ");
}

export function convert(manifestPath: string, outDir: string): ConversionReport {
  const baseDir = path.dirname(path.resolve(manifestPath));
  const manifest = readJson(manifestPath) as SourceManifest;
  const resolve = (p: string) => path.resolve(baseDir, p);
  requireMapped(manifest.mapping.album, ["album_id", "user_id", "photo_ids"], "album");
  requireMapped(manifest.mapping.photo, ["photo_id", "album_id", "timestamp"], "photo");
  requireMapped(manifest.mapping.qa, ["qa_id", "user_id", "question", "choices"], "qa");

  const dropped: DroppedRecord[] = [];
  const drop = (kind: DroppedRecord["kind"], id: string, reason: string) =>
    dropped.push({ kind, id, reason });

  // -- albums ---------------------------------------------------------------
  const albumRecords = readJson(resolve(manifest.albums)) as Record<string, unknown>[];
  const albums = new Map<string, CanonicalAlbum>();
  for (const raw of albumRecords) {
    const m = manifest.mapping.album;
    const albumId = pick(raw, m, "album_id");
    const userId = pick(raw, m, "user_id");
    const photoIds = asStringList(pick(raw, m, "photo_ids"));
    const id = albumId === undefined ? "(missing album_id)" : String(albumId);
    if (albumId === undefined || userId === undefined) {
      drop("album", id, "missing album_id or user_id");
      continue;
    }
    if (!photoIds || photoIds.length === 0) {
      drop("album", id, "no photo_ids");
      continue;
    }
    if (albums.has(id)) {
      drop("album", id, "duplicate album_id");
      continue;
    }
    albums.set(id, {
      album_id: id,
      user_id: String(userId),
      title: String(pick(raw, m, "title") ?? ""),
      description: String(pick(raw, m, "description") ?? ""),
      photo_ids: photoIds,
    });
  }

  // -- photos ---------------------------------------------------------------
  const photoRecords = readJson(resolve(manifest.photos)) as Record<string, unknown>[];
  const photos = new Map<string, CanonicalPhoto>();
  for (const raw of photoRecords) {
    const m = manifest.mapping.photo;
    const photoId = pick(raw, m, "photo_id");
    const id = photoId === undefined ? "(missing photo_id)" : String(photoId);
    if (photoId === undefined) {
      drop("photo", id, "missing photo_id");
      continue;
    }
    if (photos.has(id)) {
      drop("photo", id, "duplicate photo_id");
      continue;
    }
    const albumId = pick(raw, m, "album_id");
    if (albumId === undefined || !albums.has(String(albumId))) {
      drop("photo", id, `unknown album '${String(albumId)}'`);
      continue;
    }
    const timestamp = parseTimestamp(pick(raw, m, "timestamp"));
    if (timestamp === undefined || timestamp < 0) {
      drop("photo", id, "missing or invalid timestamp");
      continue;
    }
    const gps = parseGps(pick(raw, m, "gps"));
    if (gps === undefined) {
      drop("photo", id, "unparseable gps");
      continue;
    }
    if (gps !== null && (Math.abs(gps.lat) > 90 || Math.abs(gps.lon) > 180)) {
      drop("photo", id, "gps out of range");
      continue;
    }
    const tags = asStringList(pick(raw, m, "tags"));
    const concepts = asStringList(pick(raw, m, "concepts"));
    const ocr = asStringList(pick(raw, m, "ocr"));
    if (!tags || !concepts || !ocr) {
      drop("photo", id, "unparseable tags/concepts/ocr");
      continue;
    }
    photos.set(id, {
      photo_id: id,
      album_id: String(albumId),
      timestamp,
      gps,
      title: String(pick(raw, m, "title") ?? ""),
      tags,
      caption: String(pick(raw, m, "caption") ?? ""),
      concepts,
      ocr,
    });
  }

  // Referential integrity to a fixpoint: albums keep only existing photos,
  // empty albums disappear, photos of vanished albums disappear.
  let changed = true;
  while (changed) {
    changed = false;
    for (const album of albums.values()) {
      const kept = album.photo_ids.filter((pid) => photos.has(pid));
      if (kept.length !== album.photo_ids.length) {
        album.photo_ids = kept;
        changed = true;
      }
      if (kept.length === 0) {
        albums.delete(album.album_id);
        drop("album", album.album_id, "all photos dropped");
        changed = true;
      }
    }
    for (const photo of photos.values()) {
      const album = albums.get(photo.album_id);
      if (!album || !album.photo_ids.includes(photo.photo_id)) {
        photos.delete(photo.photo_id);
        drop("photo", photo.photo_id, "album dropped or does not list the photo");
        changed = true;
      }
    }
  }

  const userOfPhoto = (pid: string): string | undefined => {
    const photo = photos.get(pid);
    return photo ? albums.get(photo.album_id)?.user_id : undefined;
  };

  // -- QA items ---------------------------------------------------------------
  const qaRecords = readJson(resolve(manifest.qas)) as Record<string, unknown>[];
  const qas = new Map<string, CanonicalQA>();
  for (const raw of qaRecords) {
    const m = manifest.mapping.qa;
    const qaId = pick(raw, m, "qa_id");
    const id = qaId === undefined ? "(missing qa_id)" : String(qaId);
    if (qaId === undefined) {
      drop("qa", id, "missing qa_id");
      continue;
    }
    if (qas.has(id)) {
      drop("qa", id, "duplicate qa_id");
      continue;
    }
    const userId = pick(raw, m, "user_id");
    const question = pick(raw, m, "question");
    const choicesRaw = pick(raw, m, "choices");
    if (userId === undefined || question === undefined || !Array.isArray(choicesRaw)) {
      drop("qa", id, "missing user_id, question or choices");
      continue;
    }
    const choices = choicesRaw.map((c) => String(c));
    if (choices.length !== 4) {
      drop("qa", id, `choices must be exactly 4, got ${choices.length}`);
      continue;
    }
    if (new Set(choices.map(canonicalAnswer)).size !== 4) {
      drop("qa", id, "choices not distinct after canonicalization");
      continue;
    }

    let correctIndex: number;
    const explicit = pick(raw, m, "correct_index");
    if (explicit !== undefined) {
      correctIndex = Number(explicit);
    } else {
      const answer = pick(raw, m, "answer");
      if (answer === undefined) {
        drop("qa", id, "no correct_index and no answer to derive it from");
        continue;
      }
      correctIndex = choices
        .map(canonicalAnswer)
        .indexOf(canonicalAnswer(String(answer)));
    }
    if (!Number.isInteger(correctIndex) || correctIndex < 0 || correctIndex > 3) {
      drop("qa", id, "correct answer not among the choices");
      continue;
    }

    const evidence = asStringList(pick(raw, m, "evidence_photo_ids")) ?? [];
    const keptEvidence = evidence.filter((pid) => userOfPhoto(pid) === String(userId));
    if (keptEvidence.length === 0) {
      drop("qa", id, "no usable evidence photos for the user");
      continue;
    }
    qas.set(id, {
      qa_id: id,
      user_id: String(userId),
      question: String(question),
      choices,
      correct_index: correctIndex,
      evidence_photo_ids: keptEvidence,
    });
  }

  // -- features ---------------------------------------------------------------
  fs.mkdirSync(outDir, { recursive: true });
  let featureCount = 0;
  if (manifest.features) {
    const idList = readJson(resolve(manifest.features.ids)) as string[];
    const file = resolve(manifest.features.file);
    let rows: number;
    let cols: number;
    let data: Float64Array;
    if (file.endsWith(".npy")) {
      ({ rows, cols, data } = parseNpyMatrix(fs.readFileSync(file)));
    } else {
      const arr = readJson(file) as number[][];
      rows = arr.length;
      cols = rows > 0 ? arr[0].length : 0;
      data = new Float64Array(rows * cols);
      arr.forEach((row, r) => row.forEach((v, c) => (data[r * cols + c] = v)));
    }
    if (rows !== idList.length) {
      throw new Error(`feature rows (${rows}) != id manifest length (${idList.length})`);
    }
    const dim = manifest.features.dim ?? cols;
    const keptIds: string[] = [];
    const keptRows: Float64Array[] = [];
    for (let r = 0; r < rows; r++) {
      const pid = String(idList[r]);
      if (!photos.has(pid)) {
        drop("feature", pid, "feature row for unknown photo");
        continue;
      }
      const row = new Float64Array(dim);
      for (let c = 0; c < Math.min(dim, cols); c++) {
        row[c] = data[r * cols + c];
      }
      if (Array.from(row).some((v) => !Number.isFinite(v))) {
        drop("feature", pid, "non-finite feature value");
        continue;
      }
      keptIds.push(pid);
      keptRows.push(row);
    }
    const missing = [...photos.keys()].filter((pid) => !keptIds.includes(pid));
    for (const pid of missing) {
      throw new Error(`no feature row for photo '${pid}'`);
    }
    writeFeaturesBin(outDir, keptIds, keptRows, dim);
    featureCount = keptIds.length;
  }

  // -- canonical files -------------------------------------------------------
  const writeJsonl = (name: string, items: Iterable<unknown>) => {
    const lines = [...items].map((obj) => JSON.stringify(obj)).join("\n");
    fs.writeFileSync(path.join(outDir, name), lines.length ? lines + "\n" : "");
  };
  writeJsonl("albums.json", albums.values());
  writeJsonl("photos.json", photos.values());
  writeJsonl("qas.json", qas.values());

  const report: ConversionReport = {
    kept: {
      albums: albums.size,
      photos: photos.size,
      qas: qas.size,
      features: featureCount,
    },
    dropped,
  };
  fs.writeFileSync(
    path.join(outDir, "report.json"),
    JSON.stringify(report, null, 2) + "\n"
  );
  return report;
}
