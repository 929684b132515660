"""Inverted index over photo modalities with BM25 ranking.

One document per photo: the concatenated normalized terms of all nine
modality renderings. Scores use the +1-smoothed IDF so they are non-negative
on tiny corpora. Ties are broken by ascending photo id everywhere, which
makes top-k lists (and everything trained on them) reproducible.

Snapshot format "MXI1": magic, u32 version, u32 header length, JSON header
(photo ids, users, doc lengths), then per term: u16 term length, term bytes,
u32 posting count, LEB128 varints of (doc ordinal delta, term frequency).
"""

from __future__ import annotations

import json
import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, DataError
from .modality import document_terms

INDEX_MAGIC = b"MXI1"
INDEX_VERSION = 1

BM25_K1 = 1.2
BM25_B = 0.75


@dataclass
class RankedList:
    entries: list[tuple[str, float]]

    def photo_ids(self) -> list[str]:
        return [pid for pid, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


class InvertedIndex:
    def __init__(
        self,
        photo_ids: list[str],
        users: list[str],
        doc_len: list[int],
        postings: dict[str, list[tuple[int, int]]],
    ) -> None:
        self.photo_ids = photo_ids
        self.users = users
        self.doc_len = doc_len
        self.postings = postings
        self.N = len(photo_ids)
        self.avg_len = sum(doc_len) / self.N if self.N else 0.0
        self.ord_of = {pid: i for i, pid in enumerate(photo_ids)}

    def idf(self, term: str) -> float:
        n_t = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.N - n_t + 0.5) / (n_t + 0.5))


def build_index(corpus: Corpus) -> InvertedIndex:
    photo_ids: list[str] = []
    users: list[str] = []
    doc_len: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}

    for ord_, (pid, photo) in enumerate(corpus.photos.items()):
        album = corpus.albums[photo.album_id]
        terms = document_terms(photo, album)
        photo_ids.append(pid)
        users.append(album.user_id)
        doc_len.append(len(terms))
        for term, tf in sorted(Counter(terms).items()):
            postings.setdefault(term, []).append((ord_, tf))

    return InvertedIndex(photo_ids, users, doc_len, postings)


def bm25(index: InvertedIndex, query_terms: list[str], doc_ord: int) -> float:
    """BM25 score of one document for the given normalized query terms."""
    score = 0.0
    length_norm = 1.0 - BM25_B + BM25_B * index.doc_len[doc_ord] / index.avg_len
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = 0
        for d, f in plist:
            if d == doc_ord:
                tf = f
                break
        if tf == 0:
            continue
        score += index.idf(term) * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * length_norm)
    return score


def search(
    index: InvertedIndex,
    query_terms: list[str],
    k: int,
    user_id: str | None = None,
) -> RankedList:
    """Top-k photos by BM25, ties by ascending photo id.

    Retrieval is restricted to the given user's photos when user_id is set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query_terms:
        return RankedList([])

    # Terms are accumulated left to right, exactly like bm25() does per
    # document, so search scores are bit-identical to brute-force scoring.
    scores: dict[int, float] = {}
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_ord, tf in plist:
            length_norm = (
                1.0 - BM25_B + BM25_B * index.doc_len[doc_ord] / index.avg_len
            )
            contrib = idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * length_norm)
            scores[doc_ord] = scores.get(doc_ord, 0.0) + contrib

    ranked = [
        (index.photo_ids[d], s)
        for d, s in scores.items()
        if user_id is None or index.users[d] == user_id
    ]
    ranked.sort(key=lambda e: (-e[1], e[0]))
    return RankedList(ranked[:k])


# ---------------------------------------------------------------------------
# Snapshot serialization

def _write_varint(out: bytearray, value: int) -> None:
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def save_index(index: InvertedIndex, path) -> None:
    header = json.dumps(
        {
            "photo_ids": index.photo_ids,
            "users": index.users,
            "doc_len": index.doc_len,
        },
        separators=(",", ":"),
    ).encode("utf-8")

    body = bytearray()
    for term in sorted(index.postings):
        term_bytes = term.encode("utf-8")
        body += struct.pack("<H", len(term_bytes))
        body += term_bytes
        plist = index.postings[term]
        body += struct.pack("<I", len(plist))
        prev = 0
        for doc_ord, tf in plist:
            _write_varint(body, doc_ord - prev)
            _write_varint(body, tf)
            prev = doc_ord

    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<II", INDEX_VERSION, len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(index.postings)))
        fh.write(bytes(body))


def load_index(path) -> InvertedIndex:
    raw = Path(path).read_bytes()
    if raw[:4] != INDEX_MAGIC:
        raise DataError(f"{Path(path).name}: bad magic {raw[:4]!r}")
    version, header_len = struct.unpack_from("<II", raw, 4)
    if version != INDEX_VERSION:
        raise DataError(f"unsupported index version {version}")
    pos = 12
    header = json.loads(raw[pos : pos + header_len].decode("utf-8"))
    pos += header_len
    (n_terms,) = struct.unpack_from("<I", raw, pos)
    pos += 4

    postings: dict[str, list[tuple[int, int]]] = {}
    for _ in range(n_terms):
        (term_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        term = raw[pos : pos + term_len].decode("utf-8")
        pos += term_len
        (count,) = struct.unpack_from("<I", raw, pos)
        pos += 4
        plist = []
        prev = 0
        for _ in range(count):
            delta, pos = _read_varint(raw, pos)
            tf, pos = _read_varint(raw, pos)
            prev += delta
            plist.append((prev, tf))
        postings[term] = plist

    return InvertedIndex(
        header["photo_ids"], header["users"], header["doc_len"], postings
    )
