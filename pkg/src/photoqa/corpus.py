"""Canonical data model, JSONL ingestion and validation, feature storage.

File formats (all little-endian, UTF-8):
  albums.json / photos.json / qas.json - one JSON object per line.
  features.bin  - magic "MXF1", u32 count, u32 dim, count*dim float32
                  row-major; row order given by features.idx.json (a JSON
                  array of photo ids).
"""

from __future__ import annotations

import json
import random
import re
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FEATURES_MAGIC = b"MXF1"

_WS_RE = re.compile(r"\s+")


class DataError(ValueError):
    """Raised for parse failures, dangling references and invariant breaks."""


def canonicalize_answer(text: str) -> str:
    """Canonical answer form: lowercase, trimmed, internal whitespace collapsed."""
    return _WS_RE.sub(" ", text.strip().lower())


@dataclass
class Gps:
    lat: float
    lon: float


@dataclass
class PhotoDoc:
    photo_id: str
    album_id: str
    timestamp: int
    gps: Gps | None
    title: str
    tags: list[str]
    caption: str
    concepts: list[str]
    ocr: list[str]


@dataclass
class Album:
    album_id: str
    user_id: str
    title: str
    description: str
    photo_ids: list[str]


@dataclass
class QAItem:
    qa_id: str
    user_id: str
    question: str
    choices: list[str]
    correct_index: int
    evidence_photo_ids: list[str]

    @property
    def answer(self) -> str:
        return self.choices[self.correct_index]


@dataclass
class Corpus:
    albums: dict[str, Album] = field(default_factory=dict)
    photos: dict[str, PhotoDoc] = field(default_factory=dict)
    qas: dict[str, QAItem] = field(default_factory=dict)

    @property
    def users(self) -> list[str]:
        return sorted({a.user_id for a in self.albums.values()})

    def album_of(self, photo: PhotoDoc) -> Album:
        return self.albums[photo.album_id]

    def user_of_photo(self, photo_id: str) -> str:
        return self.albums[self.photos[photo_id].album_id].user_id

    def photos_of_user(self, user_id: str) -> list[PhotoDoc]:
        return [
            p for p in self.photos.values()
            if self.albums[p.album_id].user_id == user_id
        ]

    def counts(self) -> tuple[int, int, int, int]:
        return (len(self.users), len(self.albums), len(self.photos), len(self.qas))


class AnswerVocab:
    """Ordered answer classes plus the pilot class at index m."""

    PILOT_TEXT = "$"

    def __init__(self, classes: Sequence[str]) -> None:
        self.classes = list(classes)
        self._ids = {c: i for i, c in enumerate(self.classes)}
        if len(self._ids) != len(self.classes):
            raise DataError("answer classes must be distinct")

    @property
    def pilot_index(self) -> int:
        return len(self.classes)

    @property
    def size(self) -> int:
        """Number of real classes m (pilot excluded)."""
        return len(self.classes)

    @property
    def n_outputs(self) -> int:
        return len(self.classes) + 1

    def lookup(self, text: str) -> int | None:
        return self._ids.get(canonicalize_answer(text))

    def class_or_pilot(self, text: str) -> int:
        idx = self.lookup(text)
        return self.pilot_index if idx is None else idx


@dataclass
class Split:
    train: list[str]
    val: list[str]
    test: list[str]


# ---------------------------------------------------------------------------
# JSONL loading / writing

def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path.name}:{lineno}: invalid JSON ({exc.msg})") from exc


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise DataError(f"{ctx}: missing field '{key}'")
    return obj[key]


def load_corpus(album_path, photo_path, qa_path) -> Corpus:
    corpus = Corpus()

    for lineno, obj in _read_jsonl(Path(album_path)):
        ctx = f"{Path(album_path).name}:{lineno}"
        album = Album(
            album_id=str(_require(obj, "album_id", ctx)),
            user_id=str(_require(obj, "user_id", ctx)),
            title=str(_require(obj, "title", ctx)),
            description=str(_require(obj, "description", ctx)),
            photo_ids=list(_require(obj, "photo_ids", ctx)),
        )
        if album.album_id in corpus.albums:
            raise DataError(f"{ctx}: duplicate album_id '{album.album_id}'")
        if not album.photo_ids:
            raise DataError(f"{ctx}: album '{album.album_id}' has no photos")
        corpus.albums[album.album_id] = album

    for lineno, obj in _read_jsonl(Path(photo_path)):
        ctx = f"{Path(photo_path).name}:{lineno}"
        gps_obj = obj.get("gps")
        gps = None
        if gps_obj is not None:
            gps = Gps(lat=float(gps_obj["lat"]), lon=float(gps_obj["lon"]))
        photo = PhotoDoc(
            photo_id=str(_require(obj, "photo_id", ctx)),
            album_id=str(_require(obj, "album_id", ctx)),
            timestamp=int(_require(obj, "timestamp", ctx)),
            gps=gps,
            title=str(_require(obj, "title", ctx)),
            tags=[str(t) for t in _require(obj, "tags", ctx)],
            caption=str(_require(obj, "caption", ctx)),
            concepts=[str(t) for t in _require(obj, "concepts", ctx)],
            ocr=[str(t) for t in _require(obj, "ocr", ctx)],
        )
        if photo.photo_id in corpus.photos:
            raise DataError(f"{ctx}: duplicate photo_id '{photo.photo_id}'")
        corpus.photos[photo.photo_id] = photo

    for lineno, obj in _read_jsonl(Path(qa_path)):
        ctx = f"{Path(qa_path).name}:{lineno}"
        qa = QAItem(
            qa_id=str(_require(obj, "qa_id", ctx)),
            user_id=str(_require(obj, "user_id", ctx)),
            question=str(_require(obj, "question", ctx)),
            choices=[str(c) for c in _require(obj, "choices", ctx)],
            correct_index=int(_require(obj, "correct_index", ctx)),
            evidence_photo_ids=list(_require(obj, "evidence_photo_ids", ctx)),
        )
        if qa.qa_id in corpus.qas:
            raise DataError(f"{ctx}: duplicate qa_id '{qa.qa_id}'")
        corpus.qas[qa.qa_id] = qa

    validate_corpus(corpus)
    return corpus


def validate_corpus(corpus: Corpus) -> None:
    for album in corpus.albums.values():
        for pid in album.photo_ids:
            if pid not in corpus.photos:
                raise DataError(
                    f"album '{album.album_id}' references missing photo '{pid}'"
                )

    for photo in corpus.photos.values():
        album = corpus.albums.get(photo.album_id)
        if album is None:
            raise DataError(
                f"photo '{photo.photo_id}' references missing album '{photo.album_id}'"
            )
        if photo.photo_id not in album.photo_ids:
            raise DataError(
                f"photo '{photo.photo_id}' not listed in album '{photo.album_id}'"
            )
        if photo.timestamp < 0:
            raise DataError(f"photo '{photo.photo_id}': timestamp must be >= 0")
        if photo.gps is not None:
            if not (-90.0 <= photo.gps.lat <= 90.0 and -180.0 <= photo.gps.lon <= 180.0):
                raise DataError(f"photo '{photo.photo_id}': gps out of range")

    users = set(corpus.users)
    for qa in corpus.qas.values():
        if len(qa.choices) != 4:
            raise DataError(f"qa '{qa.qa_id}': choices must be exactly 4")
        canon = [canonicalize_answer(c) for c in qa.choices]
        if len(set(canon)) != 4:
            raise DataError(f"qa '{qa.qa_id}': choices must be distinct")
        if not 0 <= qa.correct_index <= 3:
            raise DataError(f"qa '{qa.qa_id}': correct_index out of range")
        if qa.user_id not in users:
            raise DataError(f"qa '{qa.qa_id}': unknown user '{qa.user_id}'")
        if not qa.evidence_photo_ids:
            raise DataError(f"qa '{qa.qa_id}': needs at least one evidence photo")
        for pid in qa.evidence_photo_ids:
            if pid not in corpus.photos:
                raise DataError(f"qa '{qa.qa_id}': missing evidence photo '{pid}'")
            if corpus.user_of_photo(pid) != qa.user_id:
                raise DataError(
                    f"qa '{qa.qa_id}': evidence photo '{pid}' belongs to another user"
                )


def _album_obj(a: Album) -> dict:
    return {
        "album_id": a.album_id,
        "user_id": a.user_id,
        "title": a.title,
        "description": a.description,
        "photo_ids": a.photo_ids,
    }


def _photo_obj(p: PhotoDoc) -> dict:
    return {
        "photo_id": p.photo_id,
        "album_id": p.album_id,
        "timestamp": p.timestamp,
        "gps": None if p.gps is None else {"lat": p.gps.lat, "lon": p.gps.lon},
        "title": p.title,
        "tags": p.tags,
        "caption": p.caption,
        "concepts": p.concepts,
        "ocr": p.ocr,
    }


def _qa_obj(q: QAItem) -> dict:
    return {
        "qa_id": q.qa_id,
        "user_id": q.user_id,
        "question": q.question,
        "choices": q.choices,
        "correct_index": q.correct_index,
        "evidence_photo_ids": q.evidence_photo_ids,
    }


def write_corpus(corpus: Corpus, out_dir) -> None:
    """Write the canonical JSONL files; output is byte-stable for a given corpus."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = [
        ("albums.json", corpus.albums.values(), _album_obj),
        ("photos.json", corpus.photos.values(), _photo_obj),
        ("qas.json", corpus.qas.values(), _qa_obj),
    ]
    for name, items, to_obj in spec:
        with open(out / name, "w", encoding="utf-8") as fh:
            for item in items:
                fh.write(json.dumps(to_obj(item), separators=(",", ":")) + "\n")


def load_corpus_dir(data_dir) -> Corpus:
    d = Path(data_dir)
    return load_corpus(d / "albums.json", d / "photos.json", d / "qas.json")


# ---------------------------------------------------------------------------
# Feature store

class FeatureStore:
    """Per-photo dense feature vectors, widened to float64 in memory."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray]) -> None:
        self.dim = dim
        self._vectors = vectors

    def get(self, photo_id: str) -> np.ndarray:
        return self._vectors[photo_id]

    def __contains__(self, photo_id: str) -> bool:
        return photo_id in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def ids(self) -> list[str]:
        return list(self._vectors)


def _idx_path(bin_path: Path) -> Path:
    name = bin_path.name
    if name.endswith(".bin"):
        name = name[: -len(".bin")]
    return bin_path.with_name(name + ".idx.json")


def save_features(store: FeatureStore, bin_path, order: Sequence[str] | None = None) -> None:
    bin_path = Path(bin_path)
    ids = list(order) if order is not None else store.ids()
    with open(bin_path, "wb") as fh:
        fh.write(FEATURES_MAGIC)
        fh.write(struct.pack("<II", len(ids), store.dim))
        for pid in ids:
            fh.write(store.get(pid).astype("<f4").tobytes())
    with open(_idx_path(bin_path), "w", encoding="utf-8") as fh:
        json.dump(ids, fh)
        fh.write("\n")


def load_features(path, corpus: Corpus | None = None, expect_dim: int | None = None) -> FeatureStore:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != FEATURES_MAGIC:
            raise DataError(f"{path.name}: bad magic {magic!r}")
        count, dim = struct.unpack("<II", fh.read(8))
        if dim < 1:
            raise DataError(f"{path.name}: invalid dim {dim}")
        if expect_dim is not None and dim != expect_dim:
            raise DataError(f"{path.name}: dim {dim} does not match expected {expect_dim}")
        raw = fh.read(count * dim * 4)
    if len(raw) != count * dim * 4:
        raise DataError(f"{path.name}: truncated payload")

    with open(_idx_path(path), encoding="utf-8") as fh:
        ids = json.load(fh)
    if len(ids) != count:
        raise DataError(
            f"{path.name}: header count {count} != manifest length {len(ids)}"
        )

    mat = np.frombuffer(raw, dtype="<f4").reshape(count, dim).astype(np.float64)
    vectors: dict[str, np.ndarray] = {}
    for row, pid in enumerate(ids):
        vec = mat[row]
        if not np.all(np.isfinite(vec)):
            raise DataError(f"{path.name}: non-finite feature value for photo '{pid}'")
        vectors[pid] = vec

    if corpus is not None:
        for pid in corpus.photos:
            if pid not in vectors:
                raise DataError(f"missing feature vector for photo '{pid}'")
    return FeatureStore(dim, vectors)


# ---------------------------------------------------------------------------
# Answer vocabulary and splits

def build_answer_vocab(qa_items: Iterable[QAItem], cap: int) -> AnswerVocab:
    """The cap most frequent canonical choice strings, ties lexicographic."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    counts = Counter(
        canonicalize_answer(choice) for qa in qa_items for choice in qa.choices
    )
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return AnswerVocab([term for term, _ in ranked[:cap]])


def split_qas(qa_ids: Sequence[str], seed: int, ratios: tuple[float, float, float]) -> Split:
    if min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be positive and sum to 1, got {ratios}")
    ids = list(qa_ids)
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_train = round(n * ratios[0])
    n_val = round(n * (ratios[0] + ratios[1])) - n_train
    return Split(
        train=ids[:n_train],
        val=ids[n_train : n_train + n_val],
        test=ids[n_train + n_val :],
    )
