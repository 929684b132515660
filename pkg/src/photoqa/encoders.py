"""Question understanding: the LSTM question encoder and the concept query encoder.

The question encoder maps up to 12 word tokens (stopwords kept) through
learned 32-d embeddings and an LSTM with a 100-d state. It can be pretrained
to classify rule-labeled answer types before end-to-end training; pretraining
and fine-tuning share tensor shapes so checkpoints are interchangeable.

The query encoder scores corpus concept terms against the question's content
words by skip-gram cosine and keeps the top 5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nncore import ParamStore, adagrad_step, clip_global_norm, dense, init_dense, tape
from .nncore.layers import LstmCellParams, lstm_run
from .skipgram import WordVecs
from .textproc import Vocabulary, normalize, tokenize_words

QUESTION_STATE_DIM = 100
QUESTION_EMBED_DIM = 32
MAX_QUESTION_TOKENS = 12

QUESTION_TYPES = ("what", "when", "where", "who", "how_many", "yes_no")

QUERY_CONCEPT_LIMIT = 5


def label_question_type(question: str) -> str:
    """Rule labeler: leading interrogative decides the answer type."""
    tokens = tokenize_words(question)
    if tokens[:2] == ["how", "many"]:
        return "how_many"
    if tokens and tokens[0] in ("what", "when", "where", "who"):
        return tokens[0]
    return "yes_no"


def add_question_encoder_params(store: ParamStore, vocab_size: int) -> LstmCellParams:
    store.add(
        "q_embed",
        (vocab_size, QUESTION_EMBED_DIM),
        fan=(vocab_size, QUESTION_EMBED_DIM),
    )
    return LstmCellParams(store, "q_lstm", QUESTION_EMBED_DIM, QUESTION_STATE_DIM)


def encode_question(tokens: list[str], store: ParamStore, vocab: Vocabulary) -> tape.Tensor:
    """Final LSTM state for up to MAX_QUESTION_TOKENS tokens; zeros when empty.

    PAD ids are skipped entirely (masked recurrence), so padding never
    changes the state.
    """
    ids = [vocab.id(t) for t in tokens[:MAX_QUESTION_TOKENS]]
    ids = [i for i in ids if i != Vocabulary.PAD]
    if not ids:
        return tape.leaf(np.zeros(QUESTION_STATE_DIM))
    embed = store.leaf("q_embed")
    rows = [tape.row(embed, i) for i in ids]
    X = tape.vstack(rows)
    H = lstm_run(store.leaf("q_lstm_W"), store.leaf("q_lstm_b"), X, QUESTION_STATE_DIM)
    return tape.row(H, len(ids) - 1)


def pretrain_question_encoder(
    questions_with_types: list[tuple[str, str]],
    vocab: Vocabulary,
    epochs: int = 10,
    seed: int = 0,
    lr: float = 0.1,
    batch_size: int = 32,
) -> tuple[ParamStore, list[float]]:
    """Train encoder plus a dense answer-type head with softmax cross-entropy.

    Returns the trained store (encoder params plus the diagnostic head) and
    the per-epoch mean loss curve.
    """
    type_index = {t: i for i, t in enumerate(QUESTION_TYPES)}
    for _, label in questions_with_types:
        if label not in type_index:
            raise ValueError(f"unknown question type '{label}'")

    store = ParamStore(np.random.default_rng(seed))
    add_question_encoder_params(store, len(vocab))
    init_dense(store, "type_head", QUESTION_STATE_DIM, len(QUESTION_TYPES))

    order_rng = np.random.default_rng(seed + 1)
    losses = []
    for _ in range(epochs):
        order = order_rng.permutation(len(questions_with_types))
        epoch_loss = 0.0
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            for sample_idx in batch:
                question, label = questions_with_types[int(sample_idx)]
                state = encode_question(tokenize_words(question), store, vocab)
                logits = dense(
                    state, store.leaf("type_head_W"), store.leaf("type_head_b")
                )
                loss = tape.cross_entropy(logits, type_index[label])
                epoch_loss += float(loss.value)
                tape.backward(loss, seed=1.0 / len(batch))
            clip_global_norm(store, 5.0)
            adagrad_step(store, lr)
        losses.append(epoch_loss / len(questions_with_types))
    return store, losses


def classify_question_type(question: str, store: ParamStore, vocab: Vocabulary) -> str:
    state = encode_question(tokenize_words(question), store, vocab)
    logits = dense(state, store.leaf("type_head_W"), store.leaf("type_head_b"))
    return QUESTION_TYPES[int(np.argmax(logits.value))]


@dataclass
class QueryEncoding:
    concepts: list[str]
    weights: list[float]

    def __bool__(self) -> bool:
        return bool(self.concepts)


def encode_query(
    question: str, wordvecs: WordVecs, concept_vocab: list[str]
) -> QueryEncoding:
    """Top-5 concept terms by max cosine against question content words.

    Content words that are themselves concepts score 1.0. Out-of-vocabulary
    words are skipped; with nothing scorable the encoding is empty and the
    caller falls back to the raw normalized question terms.
    """
    content = normalize(question)
    content_set = set(content)
    scored: list[tuple[float, str]] = []
    for concept in concept_vocab:
        if concept in content_set:
            scored.append((1.0, concept))
            continue
        if concept not in wordvecs:
            continue
        best = 0.0
        hit = False
        for word in content_set:
            if word in wordvecs:
                hit = True
                best = max(best, wordvecs.cosine(word, concept))
        if hit:
            scored.append((best, concept))
    if not scored:
        return QueryEncoding([], [])
    scored.sort(key=lambda e: (-e[0], e[1]))
    top = scored[:QUERY_CONCEPT_LIMIT]
    return QueryEncoding([c for _, c in top], [s for s, _ in top])


def concept_vocabulary(corpus) -> list[str]:
    """Sorted normalized concept terms appearing anywhere in the corpus."""
    terms: set[str] = set()
    for photo in corpus.photos.values():
        terms.update(normalize(" ".join(photo.concepts)))
    return sorted(terms)


def corpus_sentences(corpus) -> list[list[str]]:
    """Skip-gram training stream: every photo document plus every question."""
    from .modality import document_terms

    sentences = []
    for photo in corpus.photos.values():
        sentences.append(document_terms(photo, corpus.albums[photo.album_id]))
    for qa in corpus.qas.values():
        sentences.append(normalize(qa.question))
    return sentences
