"""Answer inference over retrieved photos.

For each of the top-k retrieved photos, every modality is matched against the
four choices; the matched class row of the class table and the shared
modality row are concatenated per rank, run through a small LSTM with
additive attention conditioned on the question state, and the per-modality
blocks [e_1 .. e_k, attended state] are concatenated into the lookup vector.
The classifier reads [question state, lookup vector, photo features] through
relu and sigmoid dense layers into one output per answer class (plus the
pilot), of which exactly the four choice entries are trained with softmax
cross-entropy.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import (
    AnswerVocab,
    Corpus,
    FeatureStore,
    Split,
    build_answer_vocab,
    canonicalize_answer,
)
from .encoders import (
    QUESTION_EMBED_DIM,
    QUESTION_STATE_DIM,
    add_question_encoder_params,
    concept_vocabulary,
    corpus_sentences,
    encode_query,
    encode_question,
)
from .index import InvertedIndex, build_index, search
from .modality import MODALITIES, gather_modalities
from .nncore import ParamStore, dense, init_dense, load_checkpoint, save_checkpoint, tape
from .nncore import layers
from .nncore.layers import LstmCellParams, lstm_run
from .skipgram import WordVecs, train_skipgram
from .textproc import Vocabulary, matched_class, normalize, tokenize_words
from .training import TrainHistory, TrainSettings, run_training

log = logging.getLogger(__name__)


@dataclass
class LookupHyper:
    top_k: int = 2
    modality_count: int = 9
    embed_dim: int = 10       # width of modality and class embedding rows
    rank_hidden: int = 5      # width of the attended rank state
    fc_hidden: int = 32
    feature_dim: int = 16
    vocab_cap: int = 7236
    sigmoid_head: bool = True
    sg_dim: int = 32
    sg_window: int = 4
    sg_negatives: int = 5
    sg_epochs: int = 3

    @property
    def rank_input_dim(self) -> int:
        return 2 * self.embed_dim

    @property
    def lookup_dim(self) -> int:
        return self.modality_count * (self.top_k * self.rank_input_dim + self.rank_hidden)

    @property
    def classifier_input_dim(self) -> int:
        return QUESTION_STATE_DIM + self.lookup_dim + self.top_k * self.feature_dim


@dataclass
class PreparedSample:
    """Parameter-independent forward inputs, cacheable across epochs."""

    question_tokens: list[str]
    choices: list[str]
    choice_classes: list[int]
    query_terms: list[str]
    retrieved: list[tuple[str, float]]
    matches: list[dict]
    features: list[np.ndarray]


@dataclass
class ForwardTrace:
    query_terms: list[str]
    retrieved: list[tuple[str, float]]
    matches: list[dict]
    alphas: dict[str, list[float]]
    choice_classes: list[int]
    choice_logits: list[float]

    def as_dict(self) -> dict:
        return asdict(self)


class LookupQAModel:
    def __init__(
        self,
        hyper: LookupHyper,
        answer_vocab: AnswerVocab,
        question_vocab: Vocabulary,
        wordvecs: WordVecs,
        concept_vocab: list[str],
        seed: int = 0,
    ) -> None:
        self.hyper = hyper
        self.answer_vocab = answer_vocab
        self.question_vocab = question_vocab
        self.wordvecs = wordvecs
        self.concept_vocab = concept_vocab
        self.store = ParamStore(np.random.default_rng(seed))

        h = hyper
        add_question_encoder_params(self.store, len(question_vocab))
        self.store.add("modality_embed", (h.modality_count, h.embed_dim))
        self.store.add("class_embed", (answer_vocab.n_outputs, h.embed_dim))
        LstmCellParams(self.store, "rank_lstm", h.rank_input_dim, h.rank_hidden)
        self.store.add("att_w1", (h.rank_hidden, h.rank_hidden))
        self.store.add("att_w2", (h.rank_hidden, QUESTION_STATE_DIM))
        self.store.add("att_v", (h.rank_hidden,), fan=(h.rank_hidden, 1))
        init_dense(self.store, "fc1", h.classifier_input_dim, h.fc_hidden)
        init_dense(self.store, "fc2", h.fc_hidden, answer_vocab.n_outputs)

    # -- submodules ---------------------------------------------------------

    def rank_attention(self, e_seq: list[tape.Tensor], w2q: tape.Tensor):
        """Attended rank state per Eq-style additive attention.

        e_seq holds one embedding per rank position. Returns (state, alpha);
        an empty sequence yields a zero state and alpha None (logged).
        """
        h = self.hyper
        if not e_seq:
            log.warning("rank_attention called with empty sequence")
            return tape.leaf(np.zeros(h.rank_hidden)), None
        store = self.store
        H = lstm_run(
            store.leaf("rank_lstm_W"), store.leaf("rank_lstm_b"),
            tape.vstack(e_seq), h.rank_hidden,
        )
        w1 = store.leaf("att_w1")
        v = store.leaf("att_v")
        scores = [
            tape.dot(v, tape.tanh(tape.add(tape.matvec(w1, tape.row(H, i)), w2q)))
            for i in range(len(e_seq))
        ]
        alpha = tape.softmax(tape.stack(scores))
        state = tape.smul(tape.at(alpha, 0), tape.row(H, 0))
        for i in range(1, len(e_seq)):
            state = tape.add(state, tape.smul(tape.at(alpha, i), tape.row(H, i)))
        return state, alpha

    def lookup_embedding(self, rank_modalities, choices, w2q):
        """Concatenated per-modality blocks over the ranked photos.

        rank_modalities has exactly top_k entries; None marks a null pad
        (zero modality input, pilot class). Returns (psi, matches, alphas).
        """
        matches = []
        for j in range(self.hyper.modality_count):
            modality_name = MODALITIES[j]
            for rank, values in enumerate(rank_modalities):
                if values is None:
                    matches.append(
                        {"rank": rank, "modality": modality_name, "slot": None,
                         "class_index": self.answer_vocab.pilot_index,
                         "kappa": None, "null": True}
                    )
                else:
                    match = matched_class(values[j].terms, choices, self.answer_vocab)
                    matches.append(
                        {"rank": rank, "modality": modality_name, "slot": match.slot,
                         "class_index": match.class_index,
                         "kappa": match.kappa, "null": False}
                    )
        psi, alphas = self._lookup_from_matches(matches, w2q)
        return psi, matches, alphas

    def _lookup_from_matches(self, matches, w2q):
        """Assemble psi from precomputed per-(modality, rank) class matches.

        All modality rank-sequences run through one batched LSTM call and one
        batched attention projection; the math matches rank_attention applied
        per modality.
        """
        h = self.hyper
        store = self.store
        by_modality: dict[str, list[dict]] = {}
        for m in matches:
            by_modality.setdefault(m["modality"], []).append(m)

        zero_modality = tape.leaf(np.zeros(h.embed_dim))
        e_grid = []
        for j in range(h.modality_count):
            e_seq = []
            for m in sorted(by_modality[MODALITIES[j]], key=lambda d: d["rank"]):
                em = (
                    zero_modality
                    if m["null"]
                    else tape.row(store.leaf("modality_embed"), j)
                )
                ec = tape.row(store.leaf("class_embed"), m["class_index"])
                e_seq.append(tape.concat([em, ec]))
            e_grid.append(e_seq)

        k = len(e_grid[0])
        X = tape.stack_grid(e_grid)
        H = layers.lstm_run_batch(
            store.leaf("rank_lstm_W"), store.leaf("rank_lstm_b"), X, h.rank_hidden
        )
        # attention scores for every (modality, rank) pair at once
        flat = tape.flatten2(H)
        scores = tape.matvec(
            tape.tanh(tape.affine_rows(flat, store.leaf("att_w1"), w2q)),
            store.leaf("att_v"),
        )

        blocks = []
        alphas = {}
        for j in range(h.modality_count):
            alpha = tape.softmax(tape.slice1d(scores, j * k, (j + 1) * k))
            state = tape.smul(tape.at(alpha, 0), tape.row2(H, j, 0))
            for i in range(1, k):
                state = tape.add(state, tape.smul(tape.at(alpha, i), tape.row2(H, j, i)))
            blocks.append(tape.concat(e_grid[j] + [state]))
            alphas[MODALITIES[j]] = [float(a) for a in alpha.value]
        return tape.concat(blocks), alphas

    # -- full forward pass ----------------------------------------------------

    def prepare(
        self,
        question: str,
        choices: list[str],
        user_id: str,
        corpus: Corpus,
        index: InvertedIndex,
        features: FeatureStore,
    ) -> "PreparedSample":
        """Parameter-independent part of the forward pass.

        Retrieval, modality gathering and choice matching depend only on the
        inputs, so training loops compute them once per sample.
        """
        h = self.hyper
        encoding = encode_query(question, self.wordvecs, self.concept_vocab)
        query_terms = encoding.concepts if encoding else normalize(question)
        ranked = search(index, query_terms, k=h.top_k, user_id=user_id)

        rank_modalities = []
        feats = []
        for i in range(h.top_k):
            if i < len(ranked.entries):
                pid = ranked.entries[i][0]
                photo = corpus.photos[pid]
                album = corpus.albums[photo.album_id]
                rank_modalities.append(gather_modalities(photo, album)[: h.modality_count])
                feats.append(features.get(pid))
            else:
                rank_modalities.append(None)
                feats.append(np.zeros(h.feature_dim))

        matches = []
        for j in range(h.modality_count):
            modality_name = MODALITIES[j]
            for rank, values in enumerate(rank_modalities):
                if values is None:
                    matches.append(
                        {"rank": rank, "modality": modality_name, "slot": None,
                         "class_index": self.answer_vocab.pilot_index,
                         "kappa": None, "null": True}
                    )
                else:
                    match = matched_class(values[j].terms, choices, self.answer_vocab)
                    matches.append(
                        {"rank": rank, "modality": modality_name, "slot": match.slot,
                         "class_index": match.class_index,
                         "kappa": match.kappa, "null": False}
                    )

        return PreparedSample(
            question_tokens=tokenize_words(question),
            choices=list(choices),
            choice_classes=[self.answer_vocab.class_or_pilot(c) for c in choices],
            query_terms=list(query_terms),
            retrieved=[(pid, float(s)) for pid, s in ranked.entries],
            matches=matches,
            features=feats,
        )

    def forward_prepared(self, sample: "PreparedSample") -> tuple[tape.Tensor, ForwardTrace]:
        h = self.hyper
        store = self.store
        phi_r = encode_question(sample.question_tokens, store, self.question_vocab)
        w2q = tape.matvec(store.leaf("att_w2"), phi_r)
        psi, alphas = self._lookup_from_matches(sample.matches, w2q)

        inp = tape.concat([phi_r, psi] + [tape.leaf(f) for f in sample.features])
        hidden = dense(inp, store.leaf("fc1_W"), store.leaf("fc1_b"), "relu")
        activation = "sigmoid" if h.sigmoid_head else "linear"
        full = dense(hidden, store.leaf("fc2_W"), store.leaf("fc2_b"), activation)
        logits = tape.gather(full, sample.choice_classes)

        trace = ForwardTrace(
            query_terms=sample.query_terms,
            retrieved=sample.retrieved,
            matches=sample.matches,
            alphas=alphas,
            choice_classes=sample.choice_classes,
            choice_logits=[float(v) for v in logits.value],
        )
        return logits, trace

    def forward(
        self,
        question: str,
        choices: list[str],
        user_id: str,
        corpus: Corpus,
        index: InvertedIndex,
        features: FeatureStore,
    ) -> tuple[tape.Tensor, ForwardTrace]:
        sample = self.prepare(question, choices, user_id, corpus, index, features)
        return self.forward_prepared(sample)

    def predict(self, corpus, index, features):
        """Evaluation-contract adapter: qa -> 4 choice scores."""

        def fn(qa):
            logits, _ = self.forward(
                qa.question, qa.choices, qa.user_id, corpus, index, features
            )
            return logits.value

        return fn


def choice_loss(choice_logits: tape.Tensor, correct_index: int) -> tape.Tensor:
    """Softmax cross-entropy over exactly the four choice logits."""
    if choice_logits.value.shape != (4,):
        raise ValueError("expected 4 choice logits")
    return tape.cross_entropy(choice_logits, correct_index)


@dataclass
class AnswerResult:
    choice_index: int
    answer: str
    confidence: float
    evidence: list[str]
    alphas: dict[str, list[float]]
    trace: ForwardTrace


def answer(
    question: str,
    choices: list[str],
    user_id: str,
    model: LookupQAModel,
    corpus: Corpus,
    index: InvertedIndex,
    features: FeatureStore,
) -> AnswerResult:
    if user_id not in set(corpus.users):
        raise ValueError(f"unknown user '{user_id}'")
    if len({canonicalize_answer(c) for c in choices}) < 2:
        raise ValueError("need at least 2 distinct choices")
    logits, trace = model.forward(question, choices, user_id, corpus, index, features)
    z = logits.value - logits.value.max()
    probs = np.exp(z) / np.exp(z).sum()
    best = int(np.argmax(logits.value))
    return AnswerResult(
        choice_index=best,
        answer=choices[best],
        confidence=float(probs[best]),
        evidence=[pid for pid, _ in trace.retrieved],
        alphas=trace.alphas,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# Training and persistence

def build_lookup_model(
    corpus: Corpus,
    hyper: LookupHyper,
    seed: int,
    wordvecs: WordVecs | None = None,
) -> LookupQAModel:
    """Assemble vocabularies (full corpus) and initialize a model."""
    answer_vocab = build_answer_vocab(corpus.qas.values(), hyper.vocab_cap)
    question_vocab = Vocabulary.from_texts(qa.question for qa in corpus.qas.values())
    if wordvecs is None:
        wordvecs = train_skipgram(
            corpus_sentences(corpus),
            dim=hyper.sg_dim,
            window=hyper.sg_window,
            negatives=hyper.sg_negatives,
            epochs=hyper.sg_epochs,
            seed=seed,
        )
    return LookupQAModel(
        hyper, answer_vocab, question_vocab, wordvecs,
        concept_vocabulary(corpus), seed=seed,
    )


def pretrain_encoder_state(corpus: Corpus, epochs: int, seed: int, lr: float = 0.1) -> dict:
    """Question-type pretraining on the corpus questions (rule labels)."""
    from .encoders import label_question_type, pretrain_question_encoder

    questions = [qa.question for qa in corpus.qas.values()]
    vocab = Vocabulary.from_texts(questions)
    labeled = [(q, label_question_type(q)) for q in questions]
    store, _ = pretrain_question_encoder(labeled, vocab, epochs=epochs, seed=seed, lr=lr)
    return store.state()


def train_lookup_model(
    corpus: Corpus,
    features: FeatureStore,
    split: Split,
    hyper: LookupHyper,
    settings: TrainSettings,
    index: InvertedIndex | None = None,
    encoder_state: dict | None = None,
    pretrain_epochs: int = 0,
) -> tuple[LookupQAModel, TrainHistory]:
    """End-to-end training; the question encoder is warm-started either from
    the given encoder_state or by running question-type pretraining first
    (pretrain_epochs > 0), then fine-tuned end to end."""
    if index is None:
        index = build_index(corpus)
    if encoder_state is None and pretrain_epochs > 0:
        encoder_state = pretrain_encoder_state(corpus, pretrain_epochs, settings.seed)
    model = build_lookup_model(corpus, hyper, settings.seed)
    if encoder_state is not None:
        model.store.load_state(
            {k: v for k, v in encoder_state.items() if k.startswith("q_")}
        )

    def prepared(qid):
        qa = corpus.qas[qid]
        sample = model.prepare(
            qa.question, qa.choices, qa.user_id, corpus, index, features
        )
        return sample, qa.correct_index

    train_samples = [prepared(qid) for qid in split.train]
    val_samples = [prepared(qid) for qid in split.val]

    def loss_fn(item):
        sample, correct = item
        logits, _ = model.forward_prepared(sample)
        return choice_loss(logits, correct)

    def val_fn(item):
        sample, correct = item
        logits, _ = model.forward_prepared(sample)
        loss = choice_loss(logits, correct)
        return float(loss.value), int(np.argmax(logits.value)) == correct

    history = run_training(
        model.store, train_samples, loss_fn, settings,
        val_samples=val_samples, val_fn=val_fn,
    )
    return model, history


def save_lookup_model(model: LookupQAModel, path, extra_meta: dict | None = None) -> None:
    values = model.store.state()
    values["wordvec_matrix"] = model.wordvecs.matrix
    meta = {
        "kind": "lookup",
        "hyper": asdict(model.hyper),
        "answer_classes": model.answer_vocab.classes,
        "question_terms": model.question_vocab.terms[2:],
        "concept_vocab": model.concept_vocab,
        "wordvec_terms": model.wordvecs.terms,
    }
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, values, meta)


def load_lookup_model(path) -> tuple[LookupQAModel, dict]:
    meta, values = load_checkpoint(path)
    if meta.get("kind") != "lookup":
        raise ValueError(f"checkpoint kind '{meta.get('kind')}' is not 'lookup'")
    hyper = LookupHyper(**meta["hyper"])
    model = LookupQAModel(
        hyper,
        AnswerVocab(meta["answer_classes"]),
        Vocabulary.from_terms(meta["question_terms"]),
        WordVecs(meta["wordvec_terms"], values.pop("wordvec_matrix")),
        meta["concept_vocab"],
    )
    model.store.load_state(values)
    return model, meta
