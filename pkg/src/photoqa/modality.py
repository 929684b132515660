"""Fixed modality channels of a photo and their text renderings.

Both the search index and the lookup model consume photos through these nine
channels, in this exact order. Changing the order or the renderings breaks
trained checkpoints and golden tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone

from .corpus import Album, Gps, PhotoDoc
from .textproc import normalize

MODALITIES = (
    "time",
    "gps",
    "album_title",
    "album_desc",
    "photo_title",
    "tags",
    "caption",
    "concepts",
    "ocr",
)
MODALITY_COUNT = len(MODALITIES)

# Model-side cap on tokens per modality; the index sees the full text.
MAX_MODALITY_TERMS = 8

MONTH_NAMES = (
    "january", "february", "march", "april", "may", "june",
    "july", "august", "september", "october", "november", "december",
)
WEEKDAY_NAMES = (
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
)
_SEASONS = {
    12: "winter", 1: "winter", 2: "winter",
    3: "spring", 4: "spring", 5: "spring",
    6: "summer", 7: "summer", 8: "summer",
    9: "autumn", 10: "autumn", 11: "autumn",
}


def render_time(timestamp: int) -> str:
    """Timestamp as word-matchable tokens: YYYY MM month-name DD weekday season hour."""
    dt = datetime.fromtimestamp(timestamp, tz=timezone.utc)
    return (
        f"{dt.year:04d} {dt.month:02d} {MONTH_NAMES[dt.month - 1]} "
        f"{dt.day:02d} {WEEKDAY_NAMES[dt.weekday()]} {_SEASONS[dt.month]} {dt.hour:02d}"
    )


def render_gps(gps: Gps | None) -> str:
    if gps is None:
        return ""
    return f"{gps.lat:.2f} {gps.lon:.2f}"


def modality_raw_texts(photo: PhotoDoc, album: Album) -> dict[str, str]:
    return {
        "time": render_time(photo.timestamp),
        "gps": render_gps(photo.gps),
        "album_title": album.title,
        "album_desc": album.description,
        "photo_title": photo.title,
        "tags": " ".join(photo.tags),
        "caption": photo.caption,
        "concepts": " ".join(photo.concepts),
        "ocr": " ".join(photo.ocr),
    }


@dataclass
class ModalityValue:
    modality: str
    terms: list[str]  # normalized, truncated to MAX_MODALITY_TERMS
    raw_text: str


def gather_modalities(photo: PhotoDoc, album: Album) -> list[ModalityValue]:
    """All nine modality values in fixed order; empty channels yield empty terms."""
    raw = modality_raw_texts(photo, album)
    return [
        ModalityValue(m, normalize(raw[m])[:MAX_MODALITY_TERMS], raw[m])
        for m in MODALITIES
    ]


def document_terms(photo: PhotoDoc, album: Album) -> list[str]:
    """Untruncated normalized terms of all modalities; the index document."""
    raw = modality_raw_texts(photo, album)
    terms: list[str] = []
    for m in MODALITIES:
        terms.extend(normalize(raw[m]))
    return terms
