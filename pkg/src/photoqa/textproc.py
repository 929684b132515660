"""Text normalization, the answer-match kernel and token vocabularies.

The normalization pipeline is: lowercase, split on non-alphanumeric runs,
drop stopwords (fixed embedded list), Porter-stem each token. Pure-digit
tokens are kept verbatim. Everything that matches terms against answers goes
through this one pipeline so both sides stem identically.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .porter import stem

_TOKEN_RE = re.compile(r"[0-9a-z]+")

# Kappa score assigned to the pilot answer class; an actual match must beat
# it strictly to win (ties gate to the pilot).
PILOT_KAPPA = 0.5


def _load_stopwords() -> frozenset[str]:
    text = resources.files("photoqa").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


STOPWORDS = _load_stopwords()


def tokenize_words(text: str) -> list[str]:
    """Lowercase word split with stopwords kept; used for question encoding."""
    return _TOKEN_RE.findall(text.lower())


def normalize(text: str) -> list[str]:
    """Normalized term list: lowercased, stopword-free, Porter-stemmed."""
    terms = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if tok in STOPWORDS:
            continue
        terms.append(tok if tok.isdigit() else stem(tok))
    return terms


def kappa_terms(candidate_terms: Sequence[str], answer_terms: Sequence[str]) -> float:
    answer_set = set(answer_terms)
    if not answer_set:
        return 0.0
    return len(answer_set & set(candidate_terms)) / len(answer_set)


def kappa(candidate_text: str, answer_text: str) -> float:
    """Proportion of the answer's distinct normalized terms found in the candidate."""
    return kappa_terms(normalize(candidate_text), normalize(answer_text))


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one modality text against the 4 choices.

    slot is None when the pilot class won (no choice matched strictly better
    than the pilot's constant 0.5 score).
    """

    slot: int | None
    class_index: int
    kappa: float

    @property
    def is_pilot(self) -> bool:
        return self.slot is None


def matched_class(modality_text, choices: Sequence[str], vocab) -> MatchResult:
    """Argmax of kappa over the choices plus the constant-0.5 pilot.

    modality_text may be a raw string or a pre-normalized term sequence.
    The pilot wins exact ties; among choices the lowest slot wins. A choice
    whose canonical text is absent from the answer vocabulary resolves to the
    pilot row of the class table (it still occupies its slot if it wins).
    """
    if isinstance(modality_text, str):
        cand = normalize(modality_text)
    else:
        cand = list(modality_text)
    best_slot = None
    best_kappa = PILOT_KAPPA
    for slot, choice in enumerate(choices):
        score = kappa_terms(cand, normalize(choice))
        if score > best_kappa:
            best_slot, best_kappa = slot, score
    if best_slot is None:
        return MatchResult(None, vocab.pilot_index, PILOT_KAPPA)
    cls = vocab.lookup(choices[best_slot])
    if cls is None:
        cls = vocab.pilot_index
    return MatchResult(best_slot, cls, best_kappa)


class Vocabulary:
    """Dense term -> id map with reserved PAD=0 and UNK=1 slots."""

    PAD = 0
    UNK = 1

    def __init__(self) -> None:
        self._terms: list[str] = ["<pad>", "<unk>"]
        self._ids: dict[str, int] = {"<pad>": 0, "<unk>": 1}

    def add(self, term: str) -> int:
        idx = self._ids.get(term)
        if idx is None:
            idx = len(self._terms)
            self._ids[term] = idx
            self._terms.append(term)
        return idx

    def id(self, term: str) -> int:
        return self._ids.get(term, self.UNK)

    def __contains__(self, term: str) -> bool:
        return term in self._ids

    def __len__(self) -> int:
        return len(self._terms)

    @property
    def terms(self) -> list[str]:
        return list(self._terms)

    @classmethod
    def from_texts(cls, texts, tokenizer=tokenize_words) -> "Vocabulary":
        vocab = cls()
        for text in texts:
            for tok in tokenizer(text):
                vocab.add(tok)
        return vocab

    @classmethod
    def from_terms(cls, terms) -> "Vocabulary":
        vocab = cls()
        for term in terms:
            vocab.add(term)
        return vocab
