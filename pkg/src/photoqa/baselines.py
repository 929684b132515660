"""The six comparison models, sharing the training loop and the 4-logit contract.

None of them touch the search index: each question sees 8 photos sampled from
the asking user's collection, encoded per model kind. All kinds emit a full
(m+1)-way output from which the four choice entries are read, exactly like
the lookup model.
"""

from __future__ import annotations

import random
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .corpus import (
    AnswerVocab,
    Corpus,
    FeatureStore,
    QAItem,
    Split,
    build_answer_vocab,
)
from .encoders import (
    QUESTION_EMBED_DIM,
    add_question_encoder_params,
    corpus_sentences,
    encode_question,
)
from .modality import MODALITIES, modality_raw_texts
from .nncore import ParamStore, dense, init_dense, load_checkpoint, save_checkpoint, tape
from .nncore.layers import LstmCellParams, lstm_run
from .skipgram import WordVecs, train_skipgram
from .textproc import Vocabulary, normalize, tokenize_words
from .training import TrainHistory, TrainSettings, run_training

BASELINE_KINDS = ("bow", "logreg", "embedding", "lstm", "lstm_att", "lstm_mc")

CONTEXT_PHOTOS = 8
BOW_VOCAB_CAP = 4000
LSTM_HIDDEN = 100
MC_HIDDEN = 64
MAX_META_TOKENS = 24

# Optimizer assignment: plain gradient descent for the linear models,
# Adagrad for the recurrent ones.
SGD_KINDS = ("bow", "logreg", "embedding")


def optimizer_for(kind: str) -> str:
    return "sgd" if kind in SGD_KINDS else "adagrad"


def sample_context(qa: QAItem, corpus: Corpus, seed: int) -> list[str]:
    """8 seeded context photos for a question, deterministic per (qa_id, seed).

    Without replacement when the user has at least 8 photos; otherwise all
    photos are kept (guaranteeing coverage) and the remainder is drawn with
    replacement.
    """
    ids = sorted(p.photo_id for p in corpus.photos_of_user(qa.user_id))
    if not ids:
        raise ValueError(f"user '{qa.user_id}' has no photos")
    rng = random.Random(f"{seed}:{qa.qa_id}")
    if len(ids) >= CONTEXT_PHOTOS:
        return sorted(rng.sample(ids, CONTEXT_PHOTOS))
    extra = [ids[rng.randrange(len(ids))] for _ in range(CONTEXT_PHOTOS - len(ids))]
    picked = ids + extra
    rng.shuffle(picked)
    return picked


def metadata_terms(photo_ids: list[str], corpus: Corpus) -> list[str]:
    """Concatenated normalized modality renderings of the context photos."""
    terms: list[str] = []
    for pid in photo_ids:
        photo = corpus.photos[pid]
        raw = modality_raw_texts(photo, corpus.albums[photo.album_id])
        for m in MODALITIES:
            terms.extend(normalize(raw[m]))
    return terms


def _mean_feature(photo_ids, features: FeatureStore) -> np.ndarray:
    return np.mean([features.get(pid) for pid in photo_ids], axis=0)


def _build_bow_vocab(corpus: Corpus, cap: int = BOW_VOCAB_CAP) -> dict[str, int]:
    counts = Counter()
    for photo in corpus.photos.values():
        raw = modality_raw_texts(photo, corpus.albums[photo.album_id])
        for m in MODALITIES:
            counts.update(normalize(raw[m]))
    for qa in corpus.qas.values():
        counts.update(normalize(qa.question))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    return {term: i for i, (term, _) in enumerate(ranked)}


@dataclass
class BaselineHyper:
    kind: str
    feature_dim: int
    vocab_cap: int = 7236
    embed_dim: int = QUESTION_EMBED_DIM
    sg_dim: int = 32
    sg_window: int = 4
    sg_negatives: int = 5
    sg_epochs: int = 3
    context_seed: int = 0


class BaselineModel:
    """One of the six baselines; forward(qa) yields the 4 choice logits."""

    def __init__(
        self,
        hyper: BaselineHyper,
        corpus: Corpus,
        answer_vocab: AnswerVocab,
        wordvecs: WordVecs | None,
        seed: int = 0,
    ) -> None:
        if hyper.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind '{hyper.kind}'")
        self.hyper = hyper
        self.kind = hyper.kind
        self.answer_vocab = answer_vocab
        self.wordvecs = wordvecs
        self.store = ParamStore(np.random.default_rng(seed))
        self.question_vocab = Vocabulary.from_texts(
            qa.question for qa in corpus.qas.values()
        )
        self.bow_vocab = _build_bow_vocab(corpus) if hyper.kind == "bow" else {}

        n_out = answer_vocab.n_outputs
        kind = hyper.kind
        if kind == "bow":
            in_dim = len(self.bow_vocab) + hyper.feature_dim
            init_dense(self.store, "clf", in_dim, n_out)
        elif kind == "logreg":
            in_dim = self.wordvecs.dim * 2 + hyper.feature_dim
            init_dense(self.store, "clf", in_dim, n_out)
        elif kind == "embedding":
            # Same representation as logreg but the table is trainable; rows
            # start from the pretrained vectors and are fine-tuned end to end.
            self.embed_vocab = Vocabulary.from_terms(self.wordvecs.terms)
            table = self.store.add(
                "word_embed",
                (len(self.embed_vocab), self.wordvecs.dim),
                fan=(len(self.embed_vocab), self.wordvecs.dim),
            )
            table.value[2:] = self.wordvecs.matrix
            in_dim = self.wordvecs.dim * 2 + hyper.feature_dim
            init_dense(self.store, "clf", in_dim, n_out)
        elif kind in ("lstm", "lstm_att"):
            add_question_encoder_params(self.store, len(self.question_vocab))
            self.store.add(
                "meta_embed",
                (len(self.question_vocab), hyper.embed_dim),
                fan=(len(self.question_vocab), hyper.embed_dim),
            )
            step_dim = QUESTION_EMBED_DIM + hyper.feature_dim + hyper.embed_dim
            LstmCellParams(self.store, "seq_lstm", step_dim, LSTM_HIDDEN)
            if kind == "lstm_att":
                self.store.add("att_w1", (LSTM_HIDDEN, LSTM_HIDDEN))
                self.store.add("att_w2", (LSTM_HIDDEN, LSTM_HIDDEN))
                self.store.add("att_v", (LSTM_HIDDEN,), fan=(LSTM_HIDDEN, 1))
            init_dense(self.store, "clf", LSTM_HIDDEN, n_out)
        elif kind == "lstm_mc":
            add_question_encoder_params(self.store, len(self.question_vocab))
            self.store.add(
                "meta_embed",
                (len(self.question_vocab), hyper.embed_dim),
                fan=(len(self.question_vocab), hyper.embed_dim),
            )
            LstmCellParams(self.store, "mc_question", QUESTION_EMBED_DIM, MC_HIDDEN)
            LstmCellParams(self.store, "mc_meta", hyper.embed_dim, MC_HIDDEN)
            LstmCellParams(self.store, "mc_photo", hyper.feature_dim, MC_HIDDEN)
            self.store.add("mc_q_proj", (MC_HIDDEN, MC_HIDDEN))
            init_dense(self.store, "clf", MC_HIDDEN, n_out)

    # -- helpers -------------------------------------------------------------

    def _word_ids(self, terms: list[str], limit: int | None = None) -> list[int]:
        if limit is not None:
            terms = terms[:limit]
        ids = [self.question_vocab.id(t) for t in terms]
        return [i for i in ids if i != Vocabulary.PAD]

    def _mean_wordvec(self, terms: list[str]) -> np.ndarray:
        vecs = [self.wordvecs.vector(t) for t in terms]
        vecs = [v for v in vecs if v is not None]
        if not vecs:
            return np.zeros(self.wordvecs.dim)
        return np.mean(vecs, axis=0)

    def _mean_embed_ids(self, ids: list[int], table_name: str) -> tape.Tensor:
        if not ids:
            return tape.leaf(np.zeros(self.store[table_name].value.shape[1]))
        embed = self.store.leaf(table_name)
        total = tape.row(embed, ids[0])
        for i in ids[1:]:
            total = tape.add(total, tape.row(embed, i))
        return tape.smul(tape.leaf(np.asarray(1.0 / len(ids))), total)

    def _attended_state(self, H: tape.Tensor, steps: int) -> tape.Tensor:
        final = tape.row(H, steps - 1)
        w1 = self.store.leaf("att_w1")
        w2 = self.store.leaf("att_w2")
        v = self.store.leaf("att_v")
        w2f = tape.matvec(w2, final)
        scores = [
            tape.dot(v, tape.tanh(tape.add(tape.matvec(w1, tape.row(H, t)), w2f)))
            for t in range(steps)
        ]
        alpha = tape.softmax(tape.stack(scores))
        out = tape.smul(tape.at(alpha, 0), tape.row(H, 0))
        for t in range(1, steps):
            out = tape.add(out, tape.smul(tape.at(alpha, t), tape.row(H, t)))
        return out

    # -- forward -------------------------------------------------------------

    def prepare(self, qa: QAItem, corpus: Corpus, features: FeatureStore) -> dict:
        """Parameter-independent inputs, cacheable across epochs."""
        context = sample_context(qa, corpus, self.hyper.context_seed)
        meta_terms = metadata_terms(context, corpus)
        mean_feat = _mean_feature(context, features)
        kind = self.kind
        sample: dict = {
            "choice_classes": [self.answer_vocab.class_or_pilot(c) for c in qa.choices],
            "correct": qa.correct_index,
        }
        if kind == "bow":
            bow = np.zeros(len(self.bow_vocab))
            for term in normalize(qa.question) + meta_terms:
                idx = self.bow_vocab.get(term)
                if idx is not None:
                    bow[idx] += 1.0
            sample["x"] = np.concatenate([bow, mean_feat])
        elif kind == "logreg":
            q_vec = self._mean_wordvec(normalize(qa.question))
            m_vec = self._mean_wordvec(meta_terms)
            sample["x"] = np.concatenate([q_vec, m_vec, mean_feat])
        elif kind == "embedding":
            embed_ids = lambda terms: [
                i
                for i in (self.embed_vocab.id(t) for t in terms)
                if i != Vocabulary.PAD
            ]
            sample["q_ids"] = embed_ids(normalize(qa.question))
            sample["m_ids"] = embed_ids(meta_terms[:MAX_META_TOKENS])
            sample["mean_feat"] = mean_feat
        elif kind in ("lstm", "lstm_att"):
            sample["q_ids"] = self._word_ids(tokenize_words(qa.question), limit=12)
            sample["m_ids"] = self._word_ids(meta_terms, limit=MAX_META_TOKENS)
            sample["mean_feat"] = mean_feat
        else:  # lstm_mc
            sample["q_ids"] = self._word_ids(tokenize_words(qa.question), limit=12)
            sample["m_ids"] = self._word_ids(meta_terms, limit=MAX_META_TOKENS)
            sample["photo_feats"] = [features.get(pid) for pid in context]
        return sample

    def forward_prepared(self, sample: dict) -> tape.Tensor:
        kind = self.kind
        if kind in ("bow", "logreg"):
            x = tape.leaf(sample["x"])
        elif kind == "embedding":
            q_emb = self._mean_embed_ids(sample["q_ids"], "word_embed")
            m_emb = self._mean_embed_ids(sample["m_ids"], "word_embed")
            x = tape.concat([q_emb, m_emb, tape.leaf(sample["mean_feat"])])
        elif kind in ("lstm", "lstm_att"):
            embed = self.store.leaf("q_embed")
            q_rows = [tape.row(embed, i) for i in sample["q_ids"]]
            if not q_rows:
                q_rows = [tape.leaf(np.zeros(QUESTION_EMBED_DIM))]
            m_emb = self._mean_embed_ids(sample["m_ids"], "meta_embed")
            feat_leaf = tape.leaf(sample["mean_feat"])
            steps = [tape.concat([q, feat_leaf, m_emb]) for q in q_rows]
            H = lstm_run(
                self.store.leaf("seq_lstm_W"), self.store.leaf("seq_lstm_b"),
                tape.vstack(steps), LSTM_HIDDEN,
            )
            if kind == "lstm_att":
                x = self._attended_state(H, len(steps))
            else:
                x = tape.row(H, len(steps) - 1)
        else:  # lstm_mc
            embed = self.store.leaf("q_embed")
            q_state = encode_lstm_final(
                self, [tape.row(embed, i) for i in sample["q_ids"]],
                "mc_question", MC_HIDDEN, QUESTION_EMBED_DIM,
            )
            meta_embed = self.store.leaf("meta_embed")
            m_state = encode_lstm_final(
                self, [tape.row(meta_embed, i) for i in sample["m_ids"]],
                "mc_meta", MC_HIDDEN, self.hyper.embed_dim,
            )
            p_state = encode_lstm_final(
                self, [tape.leaf(f) for f in sample["photo_feats"]],
                "mc_photo", MC_HIDDEN, self.hyper.feature_dim,
            )
            q_proj = tape.matvec(self.store.leaf("mc_q_proj"), q_state)
            x = tape.mul(tape.mul(q_proj, m_state), p_state)

        full = dense(x, self.store.leaf("clf_W"), self.store.leaf("clf_b"), "linear")
        return tape.gather(full, sample["choice_classes"])

    def forward(self, qa: QAItem, corpus: Corpus, features: FeatureStore) -> tape.Tensor:
        return self.forward_prepared(self.prepare(qa, corpus, features))

    def predict(self, corpus: Corpus, features: FeatureStore):
        def fn(qa):
            return self.forward(qa, corpus, features).value

        return fn


def encode_lstm_final(model, rows, prefix, hidden, in_dim) -> tape.Tensor:
    if not rows:
        return tape.leaf(np.zeros(hidden))
    H = lstm_run(
        model.store.leaf(f"{prefix}_W"), model.store.leaf(f"{prefix}_b"),
        tape.vstack(rows), hidden,
    )
    return tape.row(H, len(rows) - 1)


def build_baseline(
    kind: str,
    corpus: Corpus,
    feature_dim: int,
    seed: int,
    wordvecs: WordVecs | None = None,
    vocab_cap: int = 7236,
    context_seed: int | None = None,
) -> BaselineModel:
    hyper = BaselineHyper(
        kind=kind,
        feature_dim=feature_dim,
        vocab_cap=vocab_cap,
        context_seed=seed if context_seed is None else context_seed,
    )
    answer_vocab = build_answer_vocab(corpus.qas.values(), vocab_cap)
    if kind in ("logreg", "embedding") and wordvecs is None:
        wordvecs = train_skipgram(
            corpus_sentences(corpus),
            dim=hyper.sg_dim,
            window=hyper.sg_window,
            negatives=hyper.sg_negatives,
            epochs=hyper.sg_epochs,
            seed=seed,
        )
    return BaselineModel(hyper, corpus, answer_vocab, wordvecs, seed=seed)


def train_baseline(
    kind: str,
    corpus: Corpus,
    features: FeatureStore,
    split: Split,
    settings: TrainSettings,
    wordvecs: WordVecs | None = None,
) -> tuple[BaselineModel, TrainHistory]:
    model = build_baseline(
        kind, corpus, features.dim, settings.seed, wordvecs=wordvecs
    )
    settings.optimizer = optimizer_for(kind)

    train_samples = [
        model.prepare(corpus.qas[qid], corpus, features) for qid in split.train
    ]
    val_samples = [
        model.prepare(corpus.qas[qid], corpus, features) for qid in split.val
    ]

    def loss_fn(sample):
        return tape.cross_entropy(model.forward_prepared(sample), sample["correct"])

    def val_fn(sample):
        logits = model.forward_prepared(sample)
        loss = tape.cross_entropy(logits, sample["correct"])
        return float(loss.value), int(np.argmax(logits.value)) == sample["correct"]

    history = run_training(
        model.store, train_samples, loss_fn, settings,
        val_samples=val_samples, val_fn=val_fn,
    )
    return model, history


def save_baseline(model: BaselineModel, path, extra_meta: dict | None = None) -> None:
    values = model.store.state()
    meta = {
        "kind": model.kind,
        "hyper": asdict(model.hyper),
        "answer_classes": model.answer_vocab.classes,
    }
    if model.wordvecs is not None:
        values["wordvec_matrix"] = model.wordvecs.matrix
        meta["wordvec_terms"] = model.wordvecs.terms
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, values, meta)


def load_baseline(path, corpus: Corpus) -> tuple[BaselineModel, dict]:
    meta, values = load_checkpoint(path)
    kind = meta.get("kind")
    if kind not in BASELINE_KINDS:
        raise ValueError(f"checkpoint kind '{kind}' is not a baseline")
    wordvecs = None
    if "wordvec_terms" in meta:
        wordvecs = WordVecs(meta["wordvec_terms"], values.pop("wordvec_matrix"))
    hyper = BaselineHyper(**meta["hyper"])
    model = BaselineModel(
        hyper, corpus, AnswerVocab(meta["answer_classes"]), wordvecs
    )
    model.store.load_state(values)
    return model, meta
