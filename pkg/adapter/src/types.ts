export interface CanonicalAlbum {
  album_id: string;
  user_id: string;
  title: string;
  description: string;
  photo_ids: string[];
}

export interface CanonicalPhoto {
  photo_id: string;
  album_id: string;
  timestamp: number;
  gps: { lat: number; lon: number } | null;
  title: string;
  tags: string[];
  caption: string;
  concepts: string[];
  ocr: string[];
}

export interface CanonicalQA {
  qa_id: string;
  user_id: string;
  question: string;
  choices: string[];
  correct_index: number;
  evidence_photo_ids: string[];
}

/** Source key for each canonical field; null means "use a default". */
export type FieldMapping = Record<string, string | null>;

export interface SourceManifest {
  albums: string;
  photos: string;
  qas: string;
  features?: {
    file: string; // .npy matrix or JSON array-of-arrays
    ids: string; // JSON array of photo ids in row order
    dim?: number; // pad/truncate rows to this width when given
  };
  mapping: {
    album: FieldMapping;
    photo: FieldMapping;
    qa: FieldMapping;
  };
}

export interface DroppedRecord {
  kind: "album" | "photo" | "qa" | "feature";
  id: string;
  reason: string;
}

export interface ConversionReport {
  kept: { albums: number; photos: number; qas: number; features: number };
  dropped: DroppedRecord[];
}
