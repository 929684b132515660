"""Deterministic synthetic corpus with planted, word-matchable answers.

Every photo gets two unique coined tokens, a "key" and a "scene" name, and
every question mentions both. Both tokens are concept terms, so the query
encoder scores them 1.0 by the exact-membership rule and the planted photo
matches two high-idf query terms where any other photo can match at most one;
that strict BM25 margin is what makes retrieval of the planted photo robust
to the cosine-similarity noise filling the remaining query slots.

The correct answer for each question is planted verbatim in exactly one
modality of that photo:

    what      -> activity token in tags
    where     -> place token in concepts
    who       -> person name in caption
    when      -> month-name + year, reachable through the time rendering
    how_many  -> digit string in ocr

Answer pools are deliberately small so every answer class is seen many times
during desk-scale training. The answer key records the planted modality and
photo for each question.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .corpus import Album, Corpus, FeatureStore, Gps, PhotoDoc, QAItem, validate_corpus
from .porter import stem
from .textproc import STOPWORDS, normalize

# Pool sizes are deliberately small: every answer class must recur often
# enough in a desk-scale corpus for the class-embedding decode to be
# learnable within the fixed training budget.
PLACES = (
    "paris", "london", "tokyo", "sydney", "cairo", "denver", "oslo", "lisbon",
)
ACTIVITIES = (
    "hiking", "camping", "fishing", "surfing", "skiing", "picnic",
    "wedding", "graduation",
)
PEOPLE = (
    "alice", "bob", "carol", "david", "emma", "frank", "grace", "henry",
)
COUNTS = ("2", "3", "4", "5", "6", "7", "8", "9")
MONTH_POOL = tuple((year, month) for year in (2016, 2017) for month in (1, 4, 7, 10))

_MONTH_NAMES = (
    "january", "february", "march", "april", "may", "june",
    "july", "august", "september", "october", "november", "december",
)

CATEGORIES = ("what", "where", "who", "when", "how_many")

PLANTED_MODALITY = {
    "what": "tags",
    "where": "concepts",
    "who": "caption",
    "when": "time",
    "how_many": "ocr",
}

# Some templates put the two cue tokens early with trailing filler so that
# question encoders must carry the cue across several steps; this is what
# separates attention-based readers from final-state ones.
TEMPLATES = {
    "what": (
        "What did we do at the {key} {scene}?",
        "What did we get done at the {key} {scene} that weekend together?",
        "What was everyone doing at the {key} {scene} back then?",
    ),
    "where": (
        "Where was the {key} {scene} held?",
        "Where did we go for the {key} {scene} that evening exactly?",
        "Where was the {key} {scene} hosted that weekend again?",
    ),
    "who": (
        "Who was with us at the {key} {scene}?",
        "Who came along to the {key} {scene} that afternoon anyway?",
        "Who joined the {key} {scene} celebration that evening?",
    ),
    "when": (
        "When was the {key} {scene}?",
        "When did we attend the {key} {scene} gathering exactly?",
        "When did the {key} {scene} celebration actually happen?",
    ),
    "how_many": (
        "How many of us were at the {key} {scene}?",
        "How many guests came to the {key} {scene} that evening together?",
        "How many people showed up at the {key} {scene} celebration?",
    ),
}

_ORDINAL_WORDS = (
    "one", "two", "three", "four", "five", "six",
    "seven", "eight", "nine", "ten", "eleven", "twelve",
)

_ALBUM_DESC = "assorted moments from shared outings"

_SYLLABLES = tuple(
    c + v for c in "bdfghjklmnprstvz" for v in "aeiou"
)


def _reserved_stems() -> frozenset[str]:
    static_text = " ".join(
        list(PLACES) + list(ACTIVITIES) + list(PEOPLE)
        + list(_MONTH_NAMES)
        + ["monday tuesday wednesday thursday friday saturday sunday"]
        + ["winter spring summer autumn"]
        + [t for group in TEMPLATES.values() for t in group]
        + list(_ORDINAL_WORDS)
        + ["volume", _ALBUM_DESC, "snapshot", "gathering"]
    )
    return frozenset(normalize(static_text))


_RESERVED = _reserved_stems()


def _coin_key(rng: random.Random, used_stems: set[str]) -> str:
    while True:
        key = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        key_stem = stem(key)
        if key in STOPWORDS or key_stem in _RESERVED or key_stem in used_stems:
            continue
        used_stems.add(key_stem)
        return key


@dataclass
class SynthConfig:
    n_users: int = 4
    albums_per_user: int = 4
    photos_per_album: int = 8
    qas_per_album: int = 2  # questions generated per photo of each album
    feature_dim: int = 16

    def validate(self) -> None:
        for name in ("n_users", "albums_per_user", "photos_per_album", "qas_per_album"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")


def _timestamp(rng: random.Random) -> tuple[int, int, int]:
    year, month = MONTH_POOL[rng.randrange(len(MONTH_POOL))]
    day = rng.randint(1, 28)
    hour = rng.randint(0, 23)
    ts = int(datetime(year, month, day, hour, tzinfo=timezone.utc).timestamp())
    return ts, year, month


def _month_answer(year: int, month: int) -> str:
    return f"{_MONTH_NAMES[month - 1]} {year}"


def generate_synthetic(
    config: SynthConfig, seed: int
) -> tuple[Corpus, FeatureStore, dict[str, dict[str, str]]]:
    config.validate()
    rng = random.Random(seed)
    np_rng = np.random.default_rng(seed)
    dim = config.feature_dim

    def unit(vec: np.ndarray) -> np.ndarray:
        return vec / np.linalg.norm(vec)

    activity_dirs = {a: unit(np_rng.standard_normal(dim)) for a in ACTIVITIES}
    place_dirs = {p: unit(np_rng.standard_normal(dim)) for p in PLACES}

    corpus = Corpus()
    vectors: dict[str, np.ndarray] = {}
    answer_key: dict[str, dict[str, str]] = {}
    used_stems: set[str] = set()
    qa_counter = 0

    for ui in range(config.n_users):
        user_id = f"u{ui + 1:02d}"
        for ai in range(config.albums_per_user):
            album_id = f"a{ui + 1:02d}{ai + 1:02d}"
            album = Album(
                album_id=album_id,
                user_id=user_id,
                title=f"volume {_ORDINAL_WORDS[ai % len(_ORDINAL_WORDS)]}",
                description=_ALBUM_DESC,
                photo_ids=[],
            )
            corpus.albums[album_id] = album

            photo_attrs = []
            for pi in range(config.photos_per_album):
                photo_id = f"p{ui + 1:02d}{ai + 1:02d}{pi + 1:02d}"
                key = _coin_key(rng, used_stems)
                scene = _coin_key(rng, used_stems)
                activity = rng.choice(ACTIVITIES)
                place = rng.choice(PLACES)
                person = rng.choice(PEOPLE)
                count = rng.choice(COUNTS)
                ts, year, month = _timestamp(rng)
                gps = None
                if rng.random() < 0.5:
                    gps = Gps(
                        lat=round(rng.uniform(10.0, 60.0), 4),
                        lon=round(rng.uniform(10.0, 60.0), 4),
                    )
                photo = PhotoDoc(
                    photo_id=photo_id,
                    album_id=album_id,
                    timestamp=ts,
                    gps=gps,
                    title=f"{key} {scene} snapshot",
                    tags=[key, activity],
                    caption=f"with {person} at the {key} gathering",
                    concepts=[key, scene, place],
                    ocr=[count],
                )
                corpus.photos[photo_id] = photo
                album.photo_ids.append(photo_id)
                photo_attrs.append(
                    (photo, key, scene, activity, place, person, count, year, month)
                )

                noise = np_rng.standard_normal(dim)
                vec = 0.15 * noise + 0.8 * activity_dirs[activity] + 0.8 * place_dirs[place]
                vectors[photo_id] = vec.astype(np.float32).astype(np.float64)

            for photo, key, scene, activity, place, person, count, year, month in photo_attrs:
                for _ in range(config.qas_per_album):
                    category = CATEGORIES[qa_counter % len(CATEGORIES)]
                    qa_counter += 1
                    template = rng.choice(TEMPLATES[category])
                    question = template.format(key=key, scene=scene)

                    if category == "what":
                        correct = activity
                        pool = [a for a in ACTIVITIES if a != activity]
                    elif category == "where":
                        correct = place
                        pool = [p for p in PLACES if p != place]
                    elif category == "who":
                        correct = person
                        pool = [p for p in PEOPLE if p != person]
                    elif category == "when":
                        correct = _month_answer(year, month)
                        pool = [
                            _month_answer(y, m)
                            for (y, m) in MONTH_POOL
                            if (y, m) != (year, month)
                        ]
                    else:
                        correct = count
                        pool = [c for c in COUNTS if c != count]

                    distractors = rng.sample(pool, 3)
                    slot = rng.randrange(4)
                    choices = distractors[:slot] + [correct] + distractors[slot:]

                    qa_id = f"q{len(corpus.qas) + 1:05d}"
                    corpus.qas[qa_id] = QAItem(
                        qa_id=qa_id,
                        user_id=user_id,
                        question=question,
                        choices=choices,
                        correct_index=slot,
                        evidence_photo_ids=[photo.photo_id],
                    )
                    answer_key[qa_id] = {
                        "planted_modality": PLANTED_MODALITY[category],
                        "photo_id": photo.photo_id,
                    }

    validate_corpus(corpus)
    return corpus, FeatureStore(dim, vectors), answer_key
