"""Command-line interface.

Exit codes: 0 on success, 1 on a domain error (bad data, invalid config),
2 on a usage error (argparse). The TVSG_DATA_DIR environment variable sets
the default data root used by ``serve``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .anonymize import anonymize_corpus
from .annotations import agreement_report, read_annotations
from .dataset import (
    SPLIT_NAMES,
    SplitSpec,
    compute_stats,
    read_corpus,
    read_scenes,
    split_corpus,
    write_corpus,
    write_scenes,
)
from .encoder import EncoderConfig
from .errors import ConfigError, SchemaError, TvsgError
from .evaluate import (
    AXES,
    breakdown,
    instance_accuracy,
    random_baseline_from_records,
    read_predictions,
    scene_macro_accuracy,
    write_predictions,
)
from .models import ARCHS, LONGFORMER_P, MrConfig, load_model
from .parsing import build_alias_table, chain_episodes, default_rules, load_rules, parse_episode, select_main_characters
from .retrieval import DEFAULT_WINDOW, SCORERS, BM25, read_relevance, retrieve_history, recall_at_k
from .synth import MODES, STYLE, SynthConfig, generate_corpus, generate_raw_episodes
from .training import TrainConfig, learning_curve, predict_records, train, write_metric_log

DEFAULT_DATA_DIR = "tvsg_data"


def _data_dir_default() -> str:
    return os.environ.get("TVSG_DATA_DIR", DEFAULT_DATA_DIR)


def _table(headers: list[str], rows: list[list]) -> str:
    cells = [[str(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    def fmt(row):
        return "  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(r) for r in cells)
    return "\n".join(lines)


def _emit(payload: dict, args, table_fn=None) -> None:
    if getattr(args, "format", "json") == "table" and table_fn is not None:
        print(table_fn(payload))
    else:
        print(json.dumps(payload, ensure_ascii=False, indent=2))


# --- subcommands ----------------------------------------------------------

def cmd_parse(args) -> int:
    rules = load_rules(args.rules) if args.rules else default_rules()
    episodes = []
    for path in args.inputs:
        text = Path(path).read_text(encoding="utf-8")
        episode_id = args.episode_prefix + Path(path).stem
        episodes.append(parse_episode(text, rules, args.show, episode_id))
    scenes = chain_episodes(episodes)
    write_scenes(scenes, args.output)
    print(f"parsed {len(scenes)} scenes from {len(episodes)} episodes -> {args.output}")
    return 0


def _auto_cast(scenes, max_chars: int):
    counts: dict[str, dict[str, int]] = {}
    for scene in scenes:
        for line in scene.lines:
            if line.kind == "dialogue" and line.speaker:
                canonical = line.speaker.strip().lower()
                per = counts.setdefault(canonical, {})
                per[line.speaker.strip()] = per.get(line.speaker.strip(), 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-sum(kv[1].values()), kv[0]))
    return [(canonical, sorted(variants)) for canonical, variants in ranked[:max_chars]]


def cmd_anonymize(args) -> int:
    scenes = read_scenes(args.scenes)
    if args.cast:
        with open(args.cast, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        cast = [(entry["canonical"], entry.get("variants", [])) for entry in raw]
    else:
        cast = _auto_cast(scenes, args.max_chars)
    table = build_alias_table(cast)
    roster = select_main_characters(scenes, table, max_n=args.max_chars)
    corpus = anonymize_corpus(scenes, table, roster, base_seed=args.seed)
    write_corpus(corpus, args.output)
    dropped = len(scenes) - len(corpus)
    print(
        f"anonymized {len(corpus)} scenes (dropped {dropped} without roster dialogue), "
        f"roster={roster} -> {args.output}"
    )
    return 0


def cmd_stats(args) -> int:
    if len(args.corpus) == 1 and not args.names:
        corpus = read_corpus(args.corpus[0])
        report = compute_stats(corpus)
    else:
        names = args.names.split(",") if args.names else [Path(p).stem for p in args.corpus]
        if len(names) != len(args.corpus):
            raise ConfigError("--names must match the number of corpus files")
        report = compute_stats({n: read_corpus(p) for n, p in zip(names, args.corpus)})

    def as_table(payload: dict) -> str:
        rows = []
        for show, st in payload["shows"].items():
            rows.append([
                show,
                " ".join(f"{k}={v}" for k, v in sorted(st["scenes"].items())),
                st["lines"],
                f"{st['tokens_per_utterance']['avg']:.1f}/{st['tokens_per_utterance']['max']}",
                f"{st['tokens_per_scene']['avg']:.1f}/{st['tokens_per_scene']['max']}",
                f"{st['tokens_per_character']['avg']:.1f}/{st['tokens_per_character']['max']}",
            ])
        return _table(
            ["show", "scenes", "lines", "tok/utt avg/max", "tok/scene avg/max", "tok/char avg/max"],
            rows,
        )

    _emit(report.to_dict(), args, as_table)
    return 0


def cmd_split(args) -> int:
    corpus = read_corpus(args.corpus)
    try:
        ratios = tuple(float(x) for x in args.ratios.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --ratios {args.ratios!r}: {exc}") from exc
    spec = SplitSpec(ratios=ratios, policy=args.policy, seed=args.seed)
    splits = split_corpus(corpus, spec)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in SPLIT_NAMES:
        write_corpus(splits[name], outdir / f"{name}.jsonl")
    print(" ".join(f"{name}={len(splits[name])}" for name in SPLIT_NAMES) + f" -> {outdir}")
    return 0


def _add_model_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--arch", choices=ARCHS, default=LONGFORMER_P)
    sub.add_argument("--dim", type=int, default=64)
    sub.add_argument("--layers", type=int, default=2)
    sub.add_argument("--heads", type=int, default=2)
    sub.add_argument("--max-len", type=int, default=512)
    sub.add_argument("--attention", choices=["full", "window"], default="full")
    sub.add_argument("--window", type=int, default=0, help="half-width for window attention")
    sub.add_argument("--dropout", type=float, default=0.0)
    sub.add_argument("--epochs", type=int, default=50)
    sub.add_argument("--lr", type=float, default=3e-4)
    sub.add_argument("--batch-size", type=int, default=8)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--patience", type=int, default=0, help="early stop after N flat epochs (0 = off)")
    sub.add_argument("--candidate-masked", action="store_true",
                     help="restrict the training loss to each scene's candidates")
    sub.add_argument("--no-background", action="store_true",
                     help="drop background lines from the flat token stream")
    sub.add_argument("--rows", type=int, default=6, help="row count for --arch mr")
    sub.add_argument("--seg-len", type=int, default=64, help="row length for --arch mr")
    sub.add_argument("--no-reverse", action="store_true", help="fill rows from the scene start")
    sub.add_argument("--no-fill-empty", action="store_true",
                     help="do not reserve one row per present speaker ID")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        arch=args.arch,
        encoder=EncoderConfig(
            dim=args.dim, layers=args.layers, heads=args.heads, max_len=args.max_len,
            attention=args.attention, window=args.window, dropout=args.dropout,
            seed=args.seed,
        ),
        mr=MrConfig(rows=args.rows, seg_len=args.seg_len,
                    reverse=not args.no_reverse, fill_empty=not args.no_fill_empty),
        epochs=args.epochs, lr=args.lr, batch_size=args.batch_size, seed=args.seed,
        patience=args.patience, candidate_masked=args.candidate_masked,
        include_background=not args.no_background,
    )


def cmd_train(args) -> int:
    cfg = _train_config(args)
    train_set = read_corpus(args.train)
    dev_set = read_corpus(args.dev)
    from .models import save_model

    model, log = train(cfg, train_set, dev_set)
    save_model(args.output, model)
    if args.log:
        write_metric_log(log, args.log)
    best = [r for r in log if r["metric"] == "best_instance_accuracy"][-1]
    print(f"best dev accuracy {best['value']:.4f} at epoch {best['epoch']} -> {args.output}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    corpus = read_corpus(args.corpus)
    records, skipped = predict_records(
        model, corpus, joint=args.joint, keep_logits=not args.no_logits, on_error="skip"
    )
    if skipped:
        print(f"warning: skipped {skipped} scenes the model cannot represent", file=sys.stderr)
    write_predictions(records, args.output)
    print(f"wrote {len(records)} prediction records -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    records = read_predictions(args.preds)
    payload = {
        "instances": len(records),
        "instance_accuracy": instance_accuracy(records),
        "scene_macro_accuracy": scene_macro_accuracy(records),
        "random_baseline_analytic": random_baseline_from_records(records),
    }
    if args.simulated_trials:
        payload["random_baseline_simulated"] = random_baseline_from_records(
            records, mode="simulated", trials=args.simulated_trials, seed=args.seed
        )

    def as_table(p: dict) -> str:
        return _table(["metric", "value"], [
            [k, f"{v:.4f}" if isinstance(v, float) else v] for k, v in p.items()
        ])

    _emit(payload, args, as_table)
    return 0


def cmd_breakdown(args) -> int:
    records = read_predictions(args.preds)
    annotations = read_annotations(args.annotations) if args.annotations else None
    report = breakdown(records, args.axis, annotations)

    def as_table(p: dict) -> str:
        rows = [[r["category"], f"{r['accuracy']:.4f}", r["support"]] for r in p["rows"]]
        head = _table(["category", "accuracy", "support"], rows)
        return head + f"\nmatched={p['matched']} unmatched={p['unmatched']}"

    _emit(report.to_dict(), args, as_table)
    return 0


def cmd_curve(args) -> int:
    cfg = _train_config(args)
    train_all = read_corpus(args.train)
    dev_all = read_corpus(args.dev)
    by_show: dict[str, list] = {}
    for inst in train_all:
        by_show.setdefault(inst.show, []).append(inst)
    dev_target = [inst for inst in dev_all if inst.show == args.target_show]
    donors = [s for s in args.donors.split(",") if s] if args.donors else []
    entries = learning_curve(cfg, args.target_show, donors, by_show, dev_target)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(json.dumps(entry, ensure_ascii=False))
            fh.write("\n")
    for entry in entries:
        print(f"donors={entry['donors']} dev_accuracy={entry['dev_accuracy']:.4f}")
    return 0


def _read_any_scenes(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        first = ""
        for raw in fh:
            if raw.strip():
                first = raw
                break
    if first and "candidates" in json.loads(first):
        return read_corpus(path)
    return read_scenes(path)


def cmd_retrieve(args) -> int:
    corpus = _read_any_scenes(args.corpus)
    if args.relevance:
        relevance = read_relevance(args.relevance)
        results = {}
        by_ref = {(sc.show, sc.episode_id, sc.scene_index): sc for sc in corpus}
        for query_ref in relevance:
            query = by_ref.get(query_ref)
            if query is None:
                raise ConfigError(f"relevance query {query_ref} not in corpus")
            ranked = retrieve_history(query, corpus, k=args.k, window=args.window,
                                      scorer=args.scorer)
            results[query_ref] = [ref for ref, _ in ranked]
        value = recall_at_k(results, relevance, args.k)
        print(json.dumps({"recall_at_k": value, "k": args.k, "queries": len(relevance)}))
        return 0
    matches = [sc for sc in corpus if sc.show == args.show and sc.scene_index == args.scene_index]
    if not matches:
        raise ConfigError(f"no scene {args.scene_index} for show {args.show!r}")
    ranked = retrieve_history(matches[0], corpus, k=args.k, window=args.window,
                              scorer=args.scorer)
    print(json.dumps([
        {"show": ref[0], "episode_id": ref[1], "scene_index": ref[2], "score": score}
        for ref, score in ranked
    ], indent=2))
    return 0


def cmd_kappa(args) -> int:
    report = agreement_report(read_annotations(args.a), read_annotations(args.b))

    def as_table(p: dict) -> str:
        rows = []
        for group, info in p["groups"].items():
            k = info.get("kappa")
            rows.append([group, "n/a" if k is None else f"{k:.4f}"])
        return _table(["group", "kappa"], rows) + f"\nitems={p['n_items']}"

    _emit(report.to_dict(), args, as_table)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        corpus=read_corpus(args.corpus),
        data_dir=Path(args.data_dir),
        reveal_correct=not args.no_reveal,
    )
    app = create_app(config, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(show=args.show, chars=args.chars, scenes=args.scenes,
                      seed=args.seed, mode=args.mode)
    if args.raw_dir:
        raw_dir = Path(args.raw_dir)
        raw_dir.mkdir(parents=True, exist_ok=True)
        for episode_id, text in generate_raw_episodes(cfg):
            (raw_dir / f"{episode_id}.txt").write_text(text, encoding="utf-8")
    corpus = generate_corpus(cfg)
    write_corpus(corpus, args.output)
    n_inst = sum(len(inst.gold) for inst in corpus)
    print(f"synthesized {len(corpus)} scenes / {n_inst} instances -> {args.output}")
    return 0


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvsg",
        description="Benchmark toolkit for guessing anonymized speakers in scene transcripts.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("parse", help="parse raw transcripts into a scene corpus")
    sub.add_argument("inputs", nargs="+", help="episode text files, in show order")
    sub.add_argument("--rules", help="rule config file (key: value lines)")
    sub.add_argument("--show", required=True)
    sub.add_argument("--episode-prefix", default="")
    sub.add_argument("-o", "--output", required=True)
    sub.set_defaults(func=cmd_parse)

    sub = subs.add_parser("anonymize", help="mask main characters behind speaker IDs")
    sub.add_argument("scenes", help="scene corpus from `parse`")
    sub.add_argument("--cast", help="JSON cast file [{canonical, variants}, ...]")
    sub.add_argument("--max-chars", type=int, default=6)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("-o", "--output", required=True)
    sub.set_defaults(func=cmd_anonymize)

    sub = subs.add_parser("stats", help="corpus statistics per show")
    sub.add_argument("corpus", nargs="+", help="masked corpus files")
    sub.add_argument("--names", help="comma-separated split names for multiple files")
    sub.add_argument("--format", choices=["json", "table"], default="json")
    sub.set_defaults(func=cmd_stats)

    sub = subs.add_parser("split", help="partition a corpus into train/dev/test")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--ratios", default="0.9,0.05,0.05")
    sub.add_argument("--policy", choices=["chronological", "seeded_random"],
                     default="chronological")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("-o", "--outdir", required=True)
    sub.set_defaults(func=cmd_split)

    sub = subs.add_parser("train", help="train a speaker-guessing model")
    sub.add_argument("--train", required=True)
    sub.add_argument("--dev", required=True)
    sub.add_argument("-o", "--output", required=True, help="checkpoint path (.npz)")
    sub.add_argument("--log", help="metric log JSONL path")
    _add_model_args(sub)
    sub.set_defaults(func=cmd_train)

    sub = subs.add_parser("predict", help="dump predictions for a corpus")
    sub.add_argument("--model", required=True)
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--joint", action="store_true",
                     help="greedy one-to-one assignment across a scene's IDs")
    sub.add_argument("--no-logits", action="store_true")
    sub.add_argument("-o", "--output", required=True)
    sub.set_defaults(func=cmd_predict)

    sub = subs.add_parser("eval", help="score a prediction dump")
    sub.add_argument("--preds", required=True)
    sub.add_argument("--simulated-trials", type=int, default=0)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--format", choices=["json", "table"], default="json")
    sub.set_defaults(func=cmd_eval)

    sub = subs.add_parser("breakdown", help="accuracy along one axis")
    sub.add_argument("--preds", required=True)
    sub.add_argument("--axis", choices=AXES, required=True)
    sub.add_argument("--annotations", help="annotation records for evidence axes")
    sub.add_argument("--format", choices=["json", "table"], default="json")
    sub.set_defaults(func=cmd_breakdown)

    sub = subs.add_parser("curve", help="dev accuracy as donor shows are added")
    sub.add_argument("--train", required=True, help="multi-show training corpus")
    sub.add_argument("--dev", required=True)
    sub.add_argument("--target-show", required=True)
    sub.add_argument("--donors", default="", help="comma-separated donor shows, in order")
    sub.add_argument("-o", "--output", required=True)
    _add_model_args(sub)
    sub.set_defaults(func=cmd_curve)

    sub = subs.add_parser("retrieve", help="rank preceding scenes for a query scene")
    sub.add_argument("--corpus", required=True, help="scene or masked corpus")
    sub.add_argument("--show")
    sub.add_argument("--scene-index", type=int)
    sub.add_argument("--relevance", help="JSONL relevance judgments; prints recall@k")
    sub.add_argument("--scorer", choices=SCORERS, default=BM25)
    sub.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    sub.add_argument("-k", type=int, default=3)
    sub.set_defaults(func=cmd_retrieve)

    sub = subs.add_parser("kappa", help="inter-annotator agreement per label group")
    sub.add_argument("--a", required=True, help="first annotator's records")
    sub.add_argument("--b", required=True, help="second annotator's records")
    sub.add_argument("--format", choices=["json", "table"], default="json")
    sub.set_defaults(func=cmd_kappa)

    sub = subs.add_parser("serve", help="run the human-study HTTP service")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--data-dir", default=_data_dir_default(),
                     help="session and log directory (default: $TVSG_DATA_DIR or ./tvsg_data)")
    sub.add_argument("--host", default="127.0.0.1")
    sub.add_argument("--port", type=int, default=8008)
    sub.add_argument("--no-reveal", action="store_true",
                     help="do not tell annotators whether they were right")
    sub.add_argument("--static", help="static UI bundle to serve at /")
    sub.set_defaults(func=cmd_serve)

    sub = subs.add_parser("synth", help="generate a seeded synthetic show corpus")
    sub.add_argument("--show", default="synthshow")
    sub.add_argument("--chars", type=int, default=4)
    sub.add_argument("--scenes", type=int, default=50)
    sub.add_argument("--seed", type=int, default=7)
    sub.add_argument("--mode", choices=MODES, default=STYLE)
    sub.add_argument("--raw-dir", help="also write raw episode transcripts here")
    sub.add_argument("-o", "--output", required=True)
    sub.set_defaults(func=cmd_synth)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except TvsgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
