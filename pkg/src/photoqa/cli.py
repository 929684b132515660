"""Command-line surface: gen, ingest, stats, index, search, pretrain, train,
eval, ask, grad-check.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error. Structured
logs go to stderr; results go to stdout (machine-readable with --json).
All randomness is controlled by --seed (default from MEMEX_SEED).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, default_seed, load_config_file
from .corpus import (
    DataError,
    canonicalize_answer,
    load_corpus_dir,
    load_features,
    save_features,
    split_qas,
    write_corpus,
)
from .evaluation import FOUR_W, evaluate, four_w_distribution, kl
from .index import build_index, load_index, save_index, search
from .synthetic import SynthConfig, generate_synthetic
from .textproc import normalize

log = logging.getLogger("photoqa")

MODEL_KINDS = ("lookup", "bow", "logreg", "embedding", "lstm", "lstm-att", "lstm-mc")


def _internal_kind(kind: str) -> str:
    return kind.replace("-", "_")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _global_options() -> argparse.ArgumentParser:
    # Shared by the main parser and every subparser so global flags may
    # appear before or after the subcommand. SUPPRESS keeps a subparser from
    # clobbering values parsed at the top level.
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global RNG seed")
    g.add_argument("--config", type=Path, default=argparse.SUPPRESS,
                   help="key=value config file")
    g.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                   help="machine-readable stdout")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="evaluation parallelism")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return g


def build_parser() -> _Parser:
    shared = _global_options()
    parser = _Parser(prog="photoqa", description=__doc__, parents=[shared])
    sub = parser.add_subparsers(dest="command", metavar="command",
                                parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[shared], help="generate a synthetic corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--users", type=int)
    p.add_argument("--albums", type=int)
    p.add_argument("--photos", type=int)
    p.add_argument("--qas", type=int)
    p.add_argument("--feature-dim", type=int, dest="feature_dim")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", parents=[shared], help="validate and canonicalize corpus files")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, help="write canonicalized copies here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("stats", parents=[shared], help="corpus counts and 4W distribution")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--ref", type=Path, help="reference 4W distribution JSON")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("index", parents=[shared], help="build and save the search index")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", parents=[shared], help="top-k retrieval for a user query")
    p.add_argument("user")
    p.add_argument("query", nargs="+")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--snapshot", type=Path, help="load index snapshot instead of building")
    p.add_argument("-k", type=int, default=5)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("pretrain", parents=[shared], help="question-type pretraining for the encoder")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", parents=[shared], help="train a model kind")
    p.add_argument("kind", choices=MODEL_KINDS)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--features", type=Path, help="features.bin (default: <data>/features.bin)")
    p.add_argument("--encoder", type=Path, help="pretrained question-encoder checkpoint")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--k", type=int, dest="top_k")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[shared], help="evaluate a checkpoint")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--features", type=Path)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ask", parents=[shared], help="interactive question answering")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("user")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--features", type=Path)
    p.add_argument("--explain", action="store_true", help="dump trace JSON per answer")
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("grad-check", parents=[shared], help="finite-difference check of a model kind")
    p.add_argument("kind", choices=MODEL_KINDS)
    p.set_defaults(func=cmd_grad_check)

    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    config_path = getattr(args, "config", None)
    if config_path:
        cfg = load_config_file(config_path, cfg)
    seed = getattr(args, "seed", None)
    if seed is not None:
        cfg.seed = seed
    elif not config_path:
        cfg.seed = default_seed()
    threads = getattr(args, "threads", None)
    if threads is not None:
        cfg.threads = threads
    for name in (
        "users", "albums", "photos", "qas", "feature_dim",
        "epochs", "batch_size", "top_k",
    ):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "lr", None) is not None:
        cfg.lr_adagrad = args.lr
        cfg.lr_sgd = args.lr
    log.info("resolved config: %s", json.dumps(cfg.as_dict(), sort_keys=True))
    return cfg


# ---------------------------------------------------------------------------
# Subcommands

def cmd_gen(args, cfg: RunConfig) -> int:
    synth = SynthConfig(
        n_users=cfg.users,
        albums_per_user=cfg.albums,
        photos_per_album=cfg.photos,
        qas_per_album=cfg.qas,
        feature_dim=cfg.feature_dim,
    )
    corpus, features, answer_key = generate_synthetic(synth, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(corpus, out)
    save_features(features, out / "features.bin", order=list(corpus.photos))
    with open(out / "answer_key.json", "w", encoding="utf-8") as fh:
        json.dump(answer_key, fh, indent=0, sort_keys=True)
        fh.write("\n")
    counts = corpus.counts()
    result = {
        "users": counts[0], "albums": counts[1],
        "photos": counts[2], "qas": counts[3],
        "feature_dim": features.dim, "out": str(out),
    }
    print(json.dumps(result) if args.json else
          f"generated {counts[0]} users, {counts[1]} albums, "
          f"{counts[2]} photos, {counts[3]} qas -> {out}")
    return 0


def _load_corpus_features(data_dir: Path, features_path: Path | None):
    corpus = load_corpus_dir(data_dir)
    path = features_path or (Path(data_dir) / "features.bin")
    features = load_features(path, corpus=corpus)
    return corpus, features


def cmd_ingest(args, cfg: RunConfig) -> int:
    corpus = load_corpus_dir(args.data)
    if args.out:
        write_corpus(corpus, args.out)
    counts = corpus.counts()
    result = {"users": counts[0], "albums": counts[1], "photos": counts[2], "qas": counts[3]}
    print(json.dumps(result) if args.json else
          f"valid corpus: {counts[0]} users, {counts[1]} albums, "
          f"{counts[2]} photos, {counts[3]} qas")
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    corpus = load_corpus_dir(args.data)
    dist = four_w_distribution(corpus.qas.values())
    counts = corpus.counts()
    result = {
        "users": counts[0], "albums": counts[1],
        "photos": counts[2], "qas": counts[3],
        "four_w": {cat: float(p) for cat, p in zip(FOUR_W, dist)},
    }
    if args.ref:
        ref_raw = json.loads(Path(args.ref).read_text("utf-8"))
        ref = np.array([float(ref_raw[cat]) for cat in FOUR_W])
        ref = ref / ref.sum()
        result["kl_corpus_vs_ref"] = kl(dist, ref)
        result["kl_ref_vs_corpus"] = kl(ref, dist)
    if args.json:
        print(json.dumps(result))
    else:
        print(f"users={counts[0]} albums={counts[1]} photos={counts[2]} qas={counts[3]}")
        print("4W distribution: " + "  ".join(
            f"{cat}={result['four_w'][cat]:.3f}" for cat in FOUR_W))
        if args.ref:
            print(f"KL(corpus||ref)={result['kl_corpus_vs_ref']:.6f}  "
                  f"KL(ref||corpus)={result['kl_ref_vs_corpus']:.6f}")
    return 0


def cmd_index(args, cfg: RunConfig) -> int:
    corpus = load_corpus_dir(args.data)
    index = build_index(corpus)
    save_index(index, args.out)
    print(json.dumps({"docs": index.N, "terms": len(index.postings), "out": str(args.out)})
          if args.json else
          f"indexed {index.N} photos, {len(index.postings)} terms -> {args.out}")
    return 0


def cmd_search(args, cfg: RunConfig) -> int:
    corpus = load_corpus_dir(args.data)
    if args.snapshot:
        index = load_index(args.snapshot)
    else:
        index = build_index(corpus)
    if args.user not in set(corpus.users):
        raise DataError(f"unknown user '{args.user}'")
    terms = normalize(" ".join(args.query))
    ranked = search(index, terms, k=args.k, user_id=args.user)
    if args.json:
        print(json.dumps({"query_terms": terms,
                          "results": [{"photo_id": p, "score": s} for p, s in ranked.entries]}))
    else:
        for rank, (pid, score) in enumerate(ranked.entries, start=1):
            print(f"{rank:2d}. {pid}  {score:.6f}")
        if not ranked.entries:
            print("(no results)")
    return 0


def cmd_pretrain(args, cfg: RunConfig) -> int:
    from .encoders import label_question_type, pretrain_question_encoder
    from .nncore import save_checkpoint
    from .textproc import Vocabulary

    corpus = load_corpus_dir(args.data)
    questions = [qa.question for qa in corpus.qas.values()]
    labeled = [(q, label_question_type(q)) for q in questions]
    vocab = Vocabulary.from_texts(questions)
    epochs = args.epochs if args.epochs is not None else cfg.pretrain_epochs
    store, losses = pretrain_question_encoder(
        labeled, vocab, epochs=epochs, seed=cfg.seed, lr=cfg.lr_adagrad
    )
    meta = {
        "kind": "question_encoder",
        "question_terms": vocab.terms[2:],
        "loss_curve": losses,
    }
    save_checkpoint(args.out, store.state(), meta)
    print(json.dumps({"final_loss": losses[-1], "out": str(args.out)})
          if args.json else
          f"pretrained question encoder ({epochs} epochs, "
          f"final loss {losses[-1]:.4f}) -> {args.out}")
    return 0


def _make_split(corpus, cfg: RunConfig):
    return split_qas(sorted(corpus.qas), seed=cfg.seed, ratios=cfg.split_ratios)


def cmd_train(args, cfg: RunConfig) -> int:
    from .baselines import optimizer_for, save_baseline, train_baseline
    from .lookupnet import LookupHyper, save_lookup_model, train_lookup_model
    from .nncore import load_checkpoint
    from .training import TrainSettings

    corpus, features = _load_corpus_features(args.data, args.features)
    split = _make_split(corpus, cfg)
    kind = _internal_kind(args.kind)
    split_meta = {
        "split_seed": cfg.seed,
        "split_ratios": list(cfg.split_ratios),
    }

    if kind == "lookup":
        settings = TrainSettings(
            epochs=cfg.epochs, batch_size=cfg.batch_size,
            optimizer="adagrad", lr=cfg.lr_adagrad,
            clip_norm=cfg.clip_norm, seed=cfg.seed,
        )
        hyper = LookupHyper(
            top_k=cfg.top_k, embed_dim=cfg.embed_dim,
            rank_hidden=cfg.rank_hidden, fc_hidden=cfg.fc_hidden,
            feature_dim=features.dim, vocab_cap=cfg.vocab_cap,
            sigmoid_head=cfg.sigmoid_head,
            sg_dim=cfg.sg_dim, sg_window=cfg.sg_window,
            sg_negatives=cfg.sg_negatives, sg_epochs=cfg.sg_epochs,
        )
        encoder_state = None
        if args.encoder:
            _, encoder_state = load_checkpoint(args.encoder)
        model, history = train_lookup_model(
            corpus, features, split, hyper, settings, encoder_state=encoder_state
        )
        save_lookup_model(model, args.out, extra_meta=split_meta)
    else:
        settings = TrainSettings(
            epochs=cfg.epochs, batch_size=cfg.batch_size,
            optimizer=optimizer_for(kind),
            lr=cfg.lr_adagrad if optimizer_for(kind) == "adagrad" else cfg.lr_sgd,
            clip_norm=cfg.clip_norm, seed=cfg.seed,
        )
        model, history = train_baseline(kind, corpus, features, split, settings)
        save_baseline(model, args.out, extra_meta=split_meta)

    result = {
        "kind": args.kind,
        "best_val_accuracy": history.best_val_accuracy,
        "best_epoch": history.best_epoch,
        "final_train_loss": history.epochs[-1].train_loss,
        "out": str(args.out),
    }
    print(json.dumps(result) if args.json else
          f"trained {args.kind}: best val accuracy "
          f"{history.best_val_accuracy:.3f} (epoch {history.best_epoch}) -> {args.out}")
    return 0


def _load_any_model(path, corpus):
    from .baselines import load_baseline
    from .lookupnet import load_lookup_model
    from .nncore import load_checkpoint

    meta, _ = load_checkpoint(path)
    kind = meta.get("kind")
    if kind == "lookup":
        model, meta = load_lookup_model(path)
        return model, meta, "lookup"
    model, meta = load_baseline(path, corpus)
    return model, meta, kind


def cmd_eval(args, cfg: RunConfig) -> int:
    corpus, features = _load_corpus_features(args.data, args.features)
    model, meta, kind = _load_any_model(args.checkpoint, corpus)
    split_seed = meta.get("split_seed", cfg.seed)
    ratios = tuple(meta.get("split_ratios", cfg.split_ratios))
    split = split_qas(sorted(corpus.qas), seed=split_seed, ratios=ratios)
    qa_ids = getattr(split, args.split)
    qas = [corpus.qas[qid] for qid in qa_ids]

    if kind == "lookup":
        index = build_index(corpus)
        predict = model.predict(corpus, index, features)
    else:
        predict = model.predict(corpus, features)
    report = evaluate(predict, qas, threads=cfg.threads)
    if args.json:
        print(json.dumps({"kind": kind, "split": args.split, **report.as_dict()}))
    else:
        print(f"{kind} on {args.split} ({len(qas)} questions):")
        print(report.as_table())
    return 0


def cmd_ask(args, cfg: RunConfig) -> int:
    from .lookupnet import answer, load_lookup_model

    corpus, features = _load_corpus_features(args.data, args.features)
    model, _ = load_lookup_model(args.checkpoint)
    if args.user not in set(corpus.users):
        raise DataError(f"unknown user '{args.user}'")
    index = build_index(corpus)

    print(f"asking questions for user {args.user}; empty question quits", file=sys.stderr)
    while True:
        try:
            question = input("question> ").strip()
        except EOFError:
            break
        if not question:
            break
        choices = []
        for i in range(4):
            try:
                choices.append(input(f"choice {i + 1}> ").strip())
            except EOFError:
                return 0
        if any(not c for c in choices):
            print("all four choices must be non-empty; try again", file=sys.stderr)
            continue
        if len({canonicalize_answer(c) for c in choices}) < 2:
            print("need at least two distinct choices; try again", file=sys.stderr)
            continue
        try:
            result = answer(question, choices, args.user, model, corpus, index, features)
        except ValueError as exc:
            print(f"cannot answer: {exc}", file=sys.stderr)
            continue
        print(f"answer: {result.answer}  (confidence {result.confidence:.3f})")
        print(f"evidence photos: {', '.join(result.evidence) or '(none retrieved)'}")
        alpha_bits = []
        for modality, alpha in result.alphas.items():
            if alpha is not None:
                alpha_bits.append(
                    modality + "=[" + " ".join(f"{a:.2f}" for a in alpha) + "]"
                )
        print("attention: " + "  ".join(alpha_bits))
        if args.explain:
            print(json.dumps(result.trace.as_dict()))
    return 0


def cmd_grad_check(args, cfg: RunConfig) -> int:
    from .baselines import build_baseline
    from .lookupnet import LookupHyper, build_lookup_model, choice_loss
    from .nncore import grad_check, tape
    from .index import build_index as _build_index

    corpus, features, _ = generate_synthetic(SynthConfig(1, 2, 4, 2), seed=cfg.seed)
    kind = _internal_kind(args.kind)
    qa = next(iter(corpus.qas.values()))

    if kind == "lookup":
        index = _build_index(corpus)
        model = build_lookup_model(
            corpus, LookupHyper(feature_dim=features.dim), seed=cfg.seed
        )
        sample = model.prepare(qa.question, qa.choices, qa.user_id, corpus, index, features)

        def closure():
            logits, _ = model.forward_prepared(sample)
            return choice_loss(logits, qa.correct_index)

        store = model.store
    else:
        model = build_baseline(kind, corpus, features.dim, seed=cfg.seed)
        sample = model.prepare(qa, corpus, features)

        def closure():
            return tape.cross_entropy(model.forward_prepared(sample), qa.correct_index)

        store = model.store

    report = grad_check(closure, store, max_coords_per_param=4, seed=cfg.seed)
    line = {
        "kind": args.kind,
        "max_rel_err": report.max_rel_err,
        "worst_param": report.worst_param,
        "checked": report.checked,
        "passed": report.passed,
    }
    print(json.dumps(line) if args.json else
          f"grad-check {args.kind}: max rel err {report.max_rel_err:.2e} "
          f"({'PASS' if report.passed else 'FAIL'}, worst {report.worst_param})")
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    verbose = getattr(args, "verbose", False)
    if not hasattr(args, "json"):
        args.json = False
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (DataError, FileNotFoundError, ValueError) as exc:
        log.error("%s", exc)
        return 1
    except BrokenPipeError:
        return 0
    except Exception as exc:  # runtime failure
        log.error("runtime error: %s", exc, exc_info=verbose)
        return 2


if __name__ == "__main__":
    sys.exit(main())
