"""Command-line entry point.

    disfl-selftrain [--seed N] [--workers N] [--config FILE] COMMAND ...

Commands: normalize, synth, gen-pseudo {disfluency,judge},
train {teacher,judge}, selftrain, evaluate, infer.

Every command prints a short human-readable report on stderr and a JSON
summary on stdout; the JSON summary is also written next to the main
output (``<output>.summary.json``, or ``summary.json`` in an output
directory). Exit codes: 0 ok, 1 runtime failure, 2 usage error.

A config file (JSON, or YAML by extension) may give any long option of the
chosen command, keyed by its name with dashes or underscores; options on
the command line win. ``DISFL_OUTPUT_DIR`` sets where outputs go when no
output path is given.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus, evaluate, judge, perturb, selftrain, synthetic, tagger
from .linear import ModelError, TrainConfig
from .rng import stage_seed

logger = logging.getLogger("disfl_selftrain")

OUTPUT_DIR_ENV = "DISFL_OUTPUT_DIR"

DEFAULT_NAMES = {
    "normalize": "normalized.txt",
    "synth": "synthetic.txt",
    "disfluency": "pseudo_disfluency.tsv",
    "judge_corpus": "pseudo_judge.tsv",
    "teacher": "teacher.bin",
    "judge_model": "judge.bin",
    "selftrain": "selftrain",
    "infer": "predicted.tsv",
}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _default_path(args, attr, key):
    val = getattr(args, attr, None)
    if val:
        return Path(val)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if not base:
        raise UsageError(f"--{attr.replace('_', '-')} is required (or set {OUTPUT_DIR_ENV})")
    Path(base).mkdir(parents=True, exist_ok=True)
    return Path(base) / DEFAULT_NAMES[key]


def _need_file(args, attr):
    val = getattr(args, attr, None)
    flag = "--" + attr.replace("_", "-")
    if not val:
        raise UsageError(f"{flag} is required")
    if not Path(val).is_file():
        raise UsageError(f"{flag}: no such file: {val}")
    return Path(val)


def _summary_path(out: Path) -> Path:
    if out.is_dir():
        return out / "summary.json"
    return out.with_name(out.name + ".summary.json")


def _emit(summary: dict, path=None):
    text = json.dumps(summary, sort_keys=True, indent=2)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")
    print(text)


def _pct(x):
    return None if x is None else round(100.0 * x, 1)


def _report_dict(rep: evaluate.EvalReport) -> dict:
    d = rep.to_dict()
    d["percent"] = {"precision": _pct(rep.precision), "recall": _pct(rep.recall), "f1": _pct(rep.f1)}
    return d


def _train_config(args, stage) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=stage_seed(args.seed, stage),
        patience=args.patience,
        dev_fraction=args.dev_fraction,
        hash_bits=args.hash_bits,
    )


def _int_list(text):
    try:
        vals = [int(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _read_fluent(path):
    out = []
    for i, s in enumerate(corpus.read_plain(path)):
        if not len(s):
            raise corpus.CorpusError(f"{path}: empty sentence", i)
        out.append(s)
    if not out:
        raise corpus.CorpusError(f"{path}: no sentences", 0)
    return out


# ---------------------------------------------------------------- commands

def cmd_normalize(args):
    src = _need_file(args, "input")
    out = _default_path(args, "output", "normalize")
    opts = corpus.NormalizationOptions(
        lowercase=not args.keep_case,
        remove_punctuation=not args.keep_punctuation,
        remove_partial_words=not args.keep_partial_words,
        remove_fillers=not args.keep_fillers,
        merge_phrases=not args.no_merge,
    )
    with open(src, encoding="utf-8") as fh:
        sents, dropped = corpus.normalize_lines(fh, opts)
    corpus.write_plain(out, sents)
    print(f"normalized {len(sents)} sentences, dropped {dropped}", file=sys.stderr)
    _emit({"command": "normalize", "output": str(out), "sentences": len(sents), "dropped": dropped},
          _summary_path(out))
    return 0


def cmd_synth(args):
    out = _default_path(args, "output", "synth")
    seed = stage_seed(args.seed, f"synth-{args.register}")
    summary = {"command": "synth", "register": args.register, "count": args.count, "output": str(out)}
    if args.disfluent:
        samples = synthetic.simulate_speech(args.count, seed, p_disfluent=args.p_disfluent,
                                            register=args.register)
        gold = [s.gold for s in samples]
        corpus.write_plain(out, [g.sentence for g in gold])
        if args.gold:
            corpus.write_tagged(args.gold, gold)
            summary["gold"] = args.gold
        n_tok = sum(len(g) for g in gold)
        n_d = sum(lab == corpus.DISFLUENT for g in gold for lab in g.labels)
        summary["d_token_rate"] = n_d / n_tok if n_tok else 0.0
    else:
        if args.gold:
            raise UsageError("--gold needs --disfluent")
        corpus.write_plain(out, synthetic.fluent_corpus(args.count, seed, args.register))
    print(f"wrote {args.count} {args.register} sentences to {out}", file=sys.stderr)
    _emit(summary, _summary_path(out))
    return 0


def cmd_gen_pseudo(args):
    src = _need_file(args, "fluent")
    fluent = _read_fluent(src)
    count = args.count if args.count is not None else len(fluent)
    sampler = perturb.NgramSampler(fluent)
    summary = {"command": f"gen-pseudo {args.kind}", "count_requested": count, "fluent": str(src)}
    if args.kind == "disfluency":
        out = _default_path(args, "output", "disfluency")
        data = perturb.gen_disfluency_corpus(fluent, sampler, count, stage_seed(args.seed, "pseudo-corpus"),
                                             workers=args.workers)
        corpus.write_tagged(out, data)
        n_tok = sum(len(t) for t in data)
        n_d = sum(lab == corpus.DISFLUENT for t in data for lab in t.labels)
        summary.update(sentences=len(data), tokens=n_tok, d_tokens=n_d,
                       d_token_rate=n_d / n_tok if n_tok else 0.0)
        print(f"{len(data)} pseudo sentences, D-token rate {100 * summary['d_token_rate']:.1f}%",
              file=sys.stderr)
    else:
        out = _default_path(args, "output", "judge_corpus")
        data = perturb.gen_judge_corpus(fluent, sampler, count, stage_seed(args.seed, "judge-corpus"),
                                        args.error_fraction, workers=args.workers)
        corpus.write_judged(out, data)
        n_err = sum(j.label == corpus.ERROR for j in data)
        summary.update(sentences=len(data), errors=n_err, error_rate=n_err / len(data) if data else 0.0)
        print(f"{len(data)} judge sentences, error rate {100 * summary['error_rate']:.1f}%", file=sys.stderr)
    summary["output"] = str(out)
    _emit(summary, _summary_path(out))
    return 0


def cmd_train(args):
    data_path = _need_file(args, "corpus")
    if args.kind == "teacher":
        out = _default_path(args, "output", "teacher")
        data = list(corpus.read_tagged(data_path))
        init = tagger.load(_need_file(args, "init")) if args.init else None
        model = tagger.train(data, _train_config(args, "teacher"), init=init)
    else:
        out = _default_path(args, "output", "judge_model")
        if args.init:
            raise UsageError("--init only applies to teacher training")
        data = list(corpus.read_judged(data_path))
        model = judge.train_judge(data, _train_config(args, "judge"))
    model.save(out)
    held = model.metadata.get("heldout")
    summary = {"command": f"train {args.kind}", "corpus": str(data_path), "model": str(out),
               "fingerprint": model.fingerprint, "n_sentences": model.metadata["n_sentences"],
               "config": model.metadata["config"], "heldout": held}
    if held and "f1" in held:
        print(f"held-out P={_pct(held['precision'])} R={_pct(held['recall'])} F1={_pct(held['f1'])}",
              file=sys.stderr)
    elif held:
        print(f"held-out accuracy {_pct(held['accuracy'])}%", file=sys.stderr)
    _emit(summary, _summary_path(out))
    return 0


def _loop_config(args) -> selftrain.LoopConfig:
    base = _train_config(args, "teacher")
    return selftrain.LoopConfig(
        iterations_max=args.iterations_max,
        pool_schedule=args.pool_schedule,
        selection_enabled=not args.no_select,
        seed=args.seed,
        dev_set=args.dev,
        stop_patience=args.stop_patience,
        pseudo_count=args.pseudo_count,
        judge_count=args.judge_count,
        error_fraction=args.error_fraction,
        tagger_config=base,
        judge_config=replace(base, seed=stage_seed(args.seed, "judge")),
        student_config=replace(base, seed=stage_seed(args.seed, "student")),
        workers=args.workers,
    )


def _sweep(args, cfg, fluent, dev, out):
    """Teacher dev F1 for each pseudo-corpus size (nested prefixes of one corpus)."""
    sizes = sorted(args.pseudo_size)
    sampler = perturb.NgramSampler(fluent)
    pseudo = perturb.gen_disfluency_corpus(fluent, sampler, sizes[-1], stage_seed(args.seed, "pseudo-corpus"),
                                           workers=args.workers)
    records = []
    with open(out / "sweep.jsonl", "w", encoding="utf-8") as fh:
        for n in sizes:
            model = tagger.train(pseudo[:n], cfg.tagger_config)
            rec = {"pseudo_size": min(n, len(pseudo)), "heldout": model.metadata.get("heldout")}
            if dev:
                rep = evaluate.score(dev, model.predict_many([d.sentence for d in dev]))
                rec.update(precision=rep.precision, recall=rep.recall, f1=rep.f1)
                print(f"pseudo size {n}: dev F1 {_pct(rep.f1)}", file=sys.stderr)
            model.save(out / f"teacher_{n}.bin")
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            records.append(rec)
    return records


def cmd_selftrain(args):
    fluent_path = _need_file(args, "fluent") if not (args.judge_model and args.teacher_model) else None
    fluent = _read_fluent(fluent_path) if fluent_path else []
    dev = list(corpus.read_tagged(_need_file(args, "dev"))) if args.dev else None
    out = _default_path(args, "output_dir", "selftrain")
    out.mkdir(parents=True, exist_ok=True)
    cfg = _loop_config(args)

    if args.pseudo_size:
        if not fluent:
            raise UsageError("--pseudo-size needs --fluent")
        records = _sweep(args, cfg, fluent, dev, out)
        _emit({"command": "selftrain sweep", "output_dir": str(out), "records": records}, out / "summary.json")
        return 0

    pool = list(corpus.read_plain(_need_file(args, "pool")))
    pool_gold = list(corpus.read_tagged(_need_file(args, "pool_gold"))) if args.pool_gold else None
    if pool_gold is not None:
        if [g.tokens for g in pool_gold] != [s.tokens for s in pool]:
            raise UsageError("--pool-gold does not match --pool sentence for sentence")
        pool = [g.sentence for g in pool_gold]
    jm = judge.load(_need_file(args, "judge_model")) if args.judge_model else None
    tm = tagger.load(_need_file(args, "teacher_model")) if args.teacher_model else None
    best, state = selftrain.run_pipeline(fluent, pool, cfg, dev=dev, out_dir=out, judge=jm, teacher=tm,
                                         pool_gold=pool_gold)
    for rec in state.records:
        f1 = "-" if rec["f1"] is None else f"{_pct(rec['f1'])}"
        print(f"t={rec['t']} L={rec['L_t']} J={rec['J_t']} dev F1={f1}", file=sys.stderr)
    print(f"best iteration {state.best_iteration} ({state.selection_basis})", file=sys.stderr)
    _emit({"command": "selftrain", "output_dir": str(out), "best_iteration": state.best_iteration,
           "best_f1": state.best_f1, "best_checkpoint": f"iter_{state.best_iteration:02d}/model.bin",
           "selection_basis": state.selection_basis, "records": state.records}, out / "summary.json")
    return 0


def cmd_evaluate(args):
    gold_path = _need_file(args, "gold")
    pred_path = _need_file(args, "pred")
    if args.judged:
        gold = list(corpus.read_judged(gold_path))
        pred = list(corpus.read_judged(pred_path))
        for i, (g, p) in enumerate(zip(gold, pred)):
            if g.tokens != p.tokens:
                raise evaluate.AlignmentError("token sequences differ", i)
        acc = evaluate.judge_accuracy([g.label for g in gold], [p.label for p in pred])
        print(f"accuracy {_pct(acc)}%", file=sys.stderr)
        summary = {"command": "evaluate", "accuracy": acc, "n": len(gold)}
    else:
        gold = list(corpus.read_tagged(gold_path))
        pred = list(corpus.read_tagged(pred_path))
        rep = evaluate.score_by_category(gold, pred) if args.by_category else evaluate.score(gold, pred)
        print(rep.summary(), file=sys.stderr)
        summary = dict(_report_dict(rep), command="evaluate")
    _emit(summary, args.output)
    return 0


def cmd_infer(args):
    model = tagger.load(_need_file(args, "model"))
    src = _need_file(args, "input")
    out = _default_path(args, "output", "infer")
    if args.normalize:
        with open(src, encoding="utf-8") as fh:
            sents, dropped = corpus.normalize_lines(fh)
    else:
        sents, dropped = list(corpus.read_plain(src)), 0
    tagged = model.predict_many(sents)
    corpus.write_tagged(out, tagged)
    summary = {"command": "infer", "model": str(args.model), "output": str(out), "sentences": len(tagged),
               "dropped": dropped, "d_tokens": sum(lab == corpus.DISFLUENT for t in tagged for lab in t.labels)}
    if args.cleaned:
        corpus.write_plain(args.cleaned, [perturb.strip_D(t) for t in tagged])
        summary["cleaned"] = args.cleaned
    print(f"tagged {len(tagged)} sentences", file=sys.stderr)
    _emit(summary, _summary_path(out))
    return 0


# ---------------------------------------------------------------- parser

def _add_train_options(p):
    d = TrainConfig()
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--batch-size", type=int, default=d.batch_size)
    p.add_argument("--patience", type=int, default=d.patience, help="early-stop patience (0 = off)")
    p.add_argument("--dev-fraction", type=float, default=d.dev_fraction)
    p.add_argument("--hash-bits", type=int, default=d.hash_bits)


def build_parser():
    parser = argparse.ArgumentParser(prog="disfl-selftrain", description=__doc__.split("\n\n")[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1, help="worker processes for corpus generation")
    parser.add_argument("--config", help="JSON or YAML file of option defaults")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command")
    leaves = {}

    p = sub.add_parser("normalize", help="normalize raw transcript lines into plain format")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--keep-case", action="store_true")
    p.add_argument("--keep-punctuation", action="store_true")
    p.add_argument("--keep-partial-words", action="store_true")
    p.add_argument("--keep-fillers", action="store_true")
    p.add_argument("--no-merge", action="store_true", help="do not merge 'you know' / 'i mean'")
    p.set_defaults(func=cmd_normalize)
    leaves["normalize"] = p

    p = sub.add_parser("synth", help="write a synthetic corpus from the bundled grammar")
    p.add_argument("--register", choices=sorted(synthetic.REGISTERS), default="news")
    p.add_argument("--count", type=int, default=10000)
    p.add_argument("--output")
    p.add_argument("--disfluent", action="store_true", help="inject speech-like disfluencies")
    p.add_argument("--p-disfluent", type=float, default=0.6)
    p.add_argument("--gold", help="tagged gold labels for --disfluent output")
    p.set_defaults(func=cmd_synth)
    leaves["synth"] = p

    p = sub.add_parser("gen-pseudo", help="build a pseudo corpus from fluent text")
    gsub = p.add_subparsers(dest="kind")
    for kind in ("disfluency", "judge"):
        q = gsub.add_parser(kind)
        q.add_argument("--fluent")
        q.add_argument("--count", type=int)
        q.add_argument("--output")
        if kind == "judge":
            q.add_argument("--error-fraction", type=float, default=0.5)
        q.set_defaults(func=cmd_gen_pseudo)
        leaves[f"gen-pseudo {kind}"] = q

    p = sub.add_parser("train", help="train a teacher tagger or a judge")
    tsub = p.add_subparsers(dest="kind")
    for kind in ("teacher", "judge"):
        q = tsub.add_parser(kind)
        q.add_argument("--corpus")
        q.add_argument("--output")
        q.add_argument("--init", help="fine-tune from this tagger model")
        _add_train_options(q)
        q.set_defaults(func=cmd_train)
        leaves[f"train {kind}"] = q

    p = sub.add_parser("selftrain", help="run the self-training loop")
    p.add_argument("--fluent")
    p.add_argument("--pool")
    p.add_argument("--pool-gold", help="gold labels for the pool (adds selected/rejected F1)")
    p.add_argument("--dev")
    p.add_argument("--output-dir")
    p.add_argument("--no-select", action="store_true", help="skip the judge gate")
    p.add_argument("--pool-schedule", type=_int_list, help="comma-separated L_t values")
    p.add_argument("--pseudo-size", type=_int_list, help="sweep teacher pseudo-corpus sizes instead")
    p.add_argument("--iterations-max", type=int, default=8)
    p.add_argument("--stop-patience", type=int, default=2)
    p.add_argument("--pseudo-count", type=int, default=50000)
    p.add_argument("--judge-count", type=int, default=100000)
    p.add_argument("--error-fraction", type=float, default=0.5)
    p.add_argument("--judge-model", help="use this judge instead of training one")
    p.add_argument("--teacher-model", help="use this teacher instead of training one")
    _add_train_options(p)
    p.set_defaults(func=cmd_selftrain)
    leaves["selftrain"] = p

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--by-category", action="store_true")
    p.add_argument("--judged", action="store_true", help="inputs are right/error files")
    p.add_argument("--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)
    leaves["evaluate"] = p

    p = sub.add_parser("infer", help="tag a plain file with a trained model")
    p.add_argument("--model")
    p.add_argument("--input")
    p.add_argument("--output")
    p.add_argument("--cleaned", help="also write the D-stripped text")
    p.add_argument("--normalize", action="store_true", help="normalize raw input lines first")
    p.set_defaults(func=cmd_infer)
    leaves["infer"] = p
    return parser, leaves


def _load_config(path):
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a mapping")
    return {k.replace("-", "_"): v for k, v in data.items()}


def parse_args(argv=None):
    parser, leaves = build_parser()
    args = parser.parse_args(argv)
    if not args.command or not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        raise UsageError("no command given")
    if args.config:
        if not Path(args.config).is_file():
            raise UsageError(f"--config: no such file: {args.config}")
        cfg = _load_config(args.config)
        leaf = leaves[args.command if args.command not in ("gen-pseudo", "train")
                      else f"{args.command} {args.kind}"]
        known = {a.dest for a in leaf._actions} | {a.dest for a in parser._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            raise UsageError(f"{args.config}: unknown options {unknown}")
        # re-parse with the file as defaults so explicit flags still win
        top = {a.dest for a in parser._actions}
        parser.set_defaults(**{k: v for k, v in cfg.items() if k in top})
        leaf.set_defaults(**{k: v for k, v in cfg.items() if k not in top})
        args = parser.parse_args(argv)
        for key in ("pool_schedule", "pseudo_size"):
            val = getattr(args, key, None)
            if isinstance(val, (list, tuple)):
                val = ",".join(str(v) for v in val)
            if val is not None and not isinstance(val, list):
                try:
                    setattr(args, key, _int_list(val))
                except argparse.ArgumentTypeError as exc:
                    raise UsageError(f"{args.config}: {key}: {exc}") from None
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"disfl-selftrain: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"disfl-selftrain: error: {exc}", file=sys.stderr)
        return 2
    except (corpus.CorpusError, evaluate.AlignmentError, ModelError, perturb.PerturbError,
            ValueError, OSError) as exc:
        print(f"disfl-selftrain: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
