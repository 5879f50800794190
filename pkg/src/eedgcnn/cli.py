"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Config precedence: built-in defaults < ``--config`` file < command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import PRESETS, AblationCell, AblationMatrix, grid_cells, run_ablation
from .config import (ConfigError, ModelConfig, TrainConfig, apply_overrides, config_dict, git_blob_hash,
                     read_kv_file)
from .corpus import CorpusError, EventAnnotation, parse_corpus, select_split, write_corpus
from .evaluate import evaluate
from .layers import load_params
from .model import EEDGCNN
from .providers import ProviderError
from .synthetic import SyntheticSpec, SyntheticSpecError, generate_synthetic
from .train import DivergenceError, train

log = logging.getLogger("eedgcnn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
PROVIDER_KEYS = ("provider", "embeddings_path", "embedding_url")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt_default(val) -> str:
    if isinstance(val, tuple):
        return ",".join(str(v) for v in val) if len(val) <= 8 else f"{len(val)} items"
    return repr(val) if isinstance(val, str) else str(val)


def _add_dataclass_flags(parser, cfg, group_title: str, skip=("seed",)) -> None:
    group = parser.add_argument_group(group_title)
    for f in fields(cfg):
        if f.name in skip:
            continue
        default = getattr(cfg, f.name)
        meta = "," if isinstance(default, tuple) else None
        help_text = f.metadata.get("help", f.name.replace("_", " "))
        ch = f.metadata.get("choices")
        if ch:
            help_text += f" [{'|'.join(ch)}]"
        help_text += f" (default: {_fmt_default(default)})"
        group.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=argparse.SUPPRESS,
                           metavar=(f"A{meta}B" if meta else f.name.upper()), help=help_text)


def _common(parser, fmt: str = "table") -> None:
    parser.add_argument("--config", help="flat key = value config file (default: none)")
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="master seed for initialisation, shuffling and dropout (default: 0)")
    parser.add_argument("--format", choices=("table", "json"), default=fmt,
                        help=f"standard output format (default: {fmt})")
    parser.add_argument("--log-level", default="warning", choices=("debug", "info", "warning", "error"),
                        help="log verbosity on stderr (default: warning)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eedgcnn", description="Dilated gated convolutional event argument tagger.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-data", help="generate a synthetic corpus")
    _common(p)
    p.add_argument("--spec", help="synthetic spec JSON file (default: built-in spec)")
    p.add_argument("--out", required=True, help="output corpus path (JSON lines)")
    _add_dataclass_flags(p, SyntheticSpec(), "synthetic spec options (override --spec)", skip=("seed", "type_roles"))

    p = sub.add_parser("train", help="train a tagger")
    _common(p)
    p.add_argument("--corpus", required=True, help="training corpus (JSON lines)")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--split", default="train", choices=("train", "all"),
                   help="sentences to train on (default: train)")
    p.add_argument("--val-split", default="val", choices=("val", "none"),
                   help="split for best-checkpoint selection (default: val)")
    p.add_argument("--loss-curve", help="CSV file for the per-epoch loss curve (default: <out>.loss.csv)")
    _add_dataclass_flags(p, ModelConfig(), "model options")
    _add_dataclass_flags(p, TrainConfig(), "training options")

    p = sub.add_parser("eval", help="score a model on a corpus")
    _common(p)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--corpus", required=True, help="evaluation corpus (JSON lines)")
    p.add_argument("--triggers", default="gold", choices=("gold", "predicted"),
                   help="use annotated triggers or the trigger model's output (default: gold)")
    p.add_argument("--trigger-model", help="trigger-task model for --triggers predicted (default: none)")
    p.add_argument("--split", default="test", choices=("train", "val", "test", "all"),
                   help="sentences to score (default: test)")
    p.add_argument("--report", help="write the report as JSON to this file (default: none)")
    p.add_argument("--embeddings-path", default=argparse.SUPPRESS, help="override the model's embedding fixture (default: as saved)")
    p.add_argument("--embedding-url", default=argparse.SUPPRESS, help="override the model's embedding service (default: as saved)")

    p = sub.add_parser("tag", help="tag sentences from a JSON-lines file")
    _common(p, fmt="json")
    p.add_argument("--model", required=True, help="model file (argument or trigger task)")
    p.add_argument("--sentence-file", required=True, help="sentences (JSON lines; events used as triggers)")
    p.add_argument("--trigger-model", help="tag triggers first instead of using the file's events (default: none)")
    p.add_argument("--embeddings-path", default=argparse.SUPPRESS, help="override the model's embedding fixture (default: as saved)")
    p.add_argument("--embedding-url", default=argparse.SUPPRESS, help="override the model's embedding service (default: as saved)")

    p = sub.add_parser("ablate", help="run an ablation matrix")
    _common(p)
    p.add_argument("--corpus", required=True, help="corpus (JSON lines); split 80/10/10 by id")
    p.add_argument("--preset", default="event-type", choices=sorted(PRESETS) + ["grid"],
                   help="cell set (default: event-type)")
    p.add_argument("--cells", help="JSON file [{name, overrides}] replacing --preset (default: none)")
    p.add_argument("--dims", default="10,50,100,200,400", help="widths for dimension-sweep (default: 10,50,100,200,400)")
    p.add_argument("--grid-features", default="simple,full", help="grid axis (default: simple,full)")
    p.add_argument("--grid-input-form", default="single,pair", help="grid axis (default: single,pair)")
    p.add_argument("--grid-event-type", default="none,one_hot,400", help="grid axis (default: none,one_hot,400)")
    p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated seeds (default: 0,1,2,3,4)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes (default: 1)")
    p.add_argument("--out", help="directory for report.json, table.txt and loss curves (default: none)")
    _add_dataclass_flags(p, ModelConfig(), "base model options")
    _add_dataclass_flags(p, TrainConfig(), "base training options")

    p = sub.add_parser("inspect-model", help="describe a model file")
    _common(p)
    p.add_argument("--model", required=True, help="model file")
    return parser


# -- helpers ------------------------------------------------------------------

def _split_overrides(args, file_values: dict) -> tuple[dict, dict]:
    """Model and train overrides from the config file, then flags on top."""
    m_names = {f.name for f in fields(ModelConfig)}
    t_names = {f.name for f in fields(TrainConfig)}
    merged = dict(file_values)
    for name in m_names | t_names:
        if name in vars(args):
            merged[name] = vars(args)[name]
    unknown = set(merged) - m_names - t_names
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    model = {k: v for k, v in merged.items() if k in m_names}
    trn = {k: v for k, v in merged.items() if k in t_names}
    return model, trn


def _file_values(args) -> dict:
    return read_kv_file(args.config) if args.config else {}


def _write_manifest(out_path, command: str, argv, resolved: dict, inputs) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "resolved": resolved,
        "inputs": {str(p): git_blob_hash(p) for p in inputs if p and Path(p).exists()},
    }
    Path(str(out_path) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _provider_overrides(args) -> dict:
    return {k: vars(args)[k] for k in ("embeddings_path", "embedding_url") if k in vars(args)}


def _emit(obj, fmt: str, table: str) -> None:
    if fmt == "json":
        print(json.dumps(obj, sort_keys=True))
    else:
        print(table)


# -- commands -----------------------------------------------------------------

def cmd_gen_data(args, argv) -> int:
    spec = SyntheticSpec.load(args.spec) if args.spec else SyntheticSpec()
    updates = _file_values(args)
    names = {f.name for f in fields(SyntheticSpec)}
    updates.update({k: v for k, v in vars(args).items() if k in names})
    unknown = set(updates) - names
    if unknown:
        raise ConfigError(f"unknown synthetic spec keys: {', '.join(sorted(unknown))}")
    spec = apply_overrides(spec, updates)
    corpus = generate_synthetic(spec)
    write_corpus(args.out, corpus)
    _write_manifest(args.out, "gen-data", argv, {"spec": json.loads(spec.to_json())}, [args.spec])
    n_events = sum(len(s.events) for s in corpus)
    _emit({"out": args.out, "sentences": len(corpus), "events": n_events}, args.format,
          f"wrote {len(corpus)} sentences ({n_events} events) to {args.out}")
    return EXIT_OK


def cmd_train(args, argv) -> int:
    m_ov, t_ov = _split_overrides(args, _file_values(args))
    seed = args.seed if "seed" in vars(args) else int(m_ov.get("seed", t_ov.get("seed", 0)))
    mcfg = apply_overrides(ModelConfig(), {**m_ov, "seed": seed}).validate()
    tcfg = apply_overrides(TrainConfig(), {**t_ov, "seed": seed}).validate()
    corpus = parse_corpus(args.corpus, mcfg.roles)
    sentences = select_split(corpus, args.split)
    val = select_split(corpus, "val") if args.val_split == "val" else None
    if val is not None and (not val or args.split == "all"):
        val = None
    if not sentences:
        raise CorpusError(f"{args.corpus}: no sentences in split {args.split!r}")
    model = EEDGCNN.from_corpus(mcfg, sentences)
    result = train(model, sentences, tcfg, val_sentences=val)
    model.save(args.out)
    curve = args.loss_curve or str(args.out) + ".loss.csv"
    with open(curve, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_score"])
        for i, loss in enumerate(result.losses):
            w.writerow([i + 1, repr(loss), repr(result.val_scores[i]) if i < len(result.val_scores) else ""])
    _write_manifest(args.out, "train", argv,
                    {"model_config": config_dict(mcfg), "train_config": config_dict(tcfg), "seed": seed,
                     "split": args.split, "val_split": args.val_split}, [args.corpus, args.config])
    summary = {"out": args.out, "epochs": result.epochs_run, "final_loss": result.losses[-1] if result.losses else None,
               "best_epoch": result.best_epoch + 1 if result.best_epoch >= 0 else None,
               "params": model.param_count()}
    _emit(summary, args.format, "\n".join(f"{k}: {v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    model = EEDGCNN.load(args.model, overrides=_provider_overrides(args))
    corpus = select_split(parse_corpus(args.corpus, model.config.roles), args.split)
    trig = EEDGCNN.load(args.trigger_model, overrides=_provider_overrides(args)) if args.trigger_model else None
    if args.triggers == "predicted" and trig is None and model.config.task == "argument":
        raise UsageError("eval: --triggers predicted needs --trigger-model")
    report = evaluate(model, corpus, args.triggers, trig)
    report.metadata.update({"model": args.model, "corpus": args.corpus, "split": args.split})
    if args.report:
        Path(args.report).write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
        _write_manifest(args.report, "eval", argv, {"triggers": args.triggers, "split": args.split},
                        [args.model, args.corpus, args.trigger_model])
    _emit(report.as_dict(), args.format, report.table())
    return EXIT_OK


def _span_list(spans, key: str) -> list:
    return [{"span": list(sp), key: name} for sp, name in spans]


def cmd_tag(args, argv) -> int:
    model = EEDGCNN.load(args.model, overrides=_provider_overrides(args))
    sentences = parse_corpus(args.sentence_file)
    trig = EEDGCNN.load(args.trigger_model, overrides=_provider_overrides(args)) if args.trigger_model else None
    for s in sentences:
        if model.config.task == "trigger":
            out = {"id": s.id, "triggers": _span_list(model.tag_triggers(s), "event_type")}
        else:
            events = ([EventAnnotation(sp, t) for sp, t in trig.tag_triggers(s)] if trig is not None else s.events)
            out = {"id": s.id, "events": [
                {"trigger": list(ev.trigger_span), "event_type": ev.event_type,
                 "arguments": _span_list(model.predict_roles(s, ev), "role")}
                for ev in events
            ]}
        if args.format == "json":
            print(json.dumps(out, ensure_ascii=False))
        else:
            items = out["triggers"] if "triggers" in out else [
                {"span": a["span"], "role": f"{e['event_type']}:{a['role']}"} for e in out["events"] for a in e["arguments"]
            ]
            desc = "  ".join(f"{' '.join(s.tokens[i['span'][0]:i['span'][1] + 1])}/{i.get('event_type', i.get('role'))}"
                             for i in items)
            print(f"{s.id}\t{desc}")
    return EXIT_OK


def cmd_ablate(args, argv) -> int:
    m_ov, t_ov = _split_overrides(args, _file_values(args))
    m_ov.pop("seed", None)
    t_ov.pop("seed", None)
    if args.cells:
        spec = json.loads(Path(args.cells).read_text(encoding="utf-8"))
        cells = [AblationCell(c["name"], c.get("overrides", {})) for c in spec]
    elif args.preset == "grid":
        cells = grid_cells(args.grid_features.split(","), args.grid_input_form.split(","), args.grid_event_type.split(","))
    elif args.preset == "dimension-sweep":
        cells = PRESETS[args.preset]([int(d) for d in args.dims.split(",")])
    else:
        cells = PRESETS[args.preset]()
    try:
        seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
    except ValueError:
        raise UsageError(f"ablate: --seeds must be comma-separated integers, got {args.seeds!r}") from None
    matrix = AblationMatrix(cells, seeds, m_ov, t_ov).validate()
    corpus = parse_corpus(args.corpus)
    result = run_ablation(matrix, corpus, workers=args.workers)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(result.as_dict(), indent=2, sort_keys=True) + "\n")
        (out / "table.txt").write_text(result.table() + "\n")
        with open(out / "losses.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cell", "seed", "epoch", "train_loss"])
            for r in result.runs:
                for i, loss in enumerate(r.losses):
                    w.writerow([r.cell, r.seed, i + 1, repr(loss)])
        _write_manifest(out / "report.json", "ablate", argv,
                        {"cells": [{"name": c.name, "overrides": c.overrides} for c in cells], "seeds": list(seeds),
                         "model": m_ov, "train": t_ov}, [args.corpus, args.config, args.cells])
    _emit(result.as_dict()["summary"], args.format, result.table())
    return EXIT_OK


def cmd_inspect(args, argv) -> int:
    pf = load_params(args.model)
    header = pf.header
    params = [{"name": e["name"], "shape": e["shape"], "layer": e["layer"]} for e in header["params"]]
    total = sum(int(a.size) for a in pf.arrays.values())
    info = {"config": header["config"], "labels": header["labels"], "event_types": header["event_types"],
            "pos_tags": len(header["pos_tags"]), "params": params, "total_params": total}
    lines = [f"task: {header['config']['task']}   labels: {len(header['labels'])}   parameters: {total}",
             f"dilations: {header['config']['dilations']}   hidden: {header['config']['d_hidden']}"]
    width = max(len(p["name"]) for p in params)
    for p in params:
        extra = f"  dilation={p['layer']['dilation']}" if "dilation" in p["layer"] else ""
        lines.append(f"  {p['name']:<{width}}  {'x'.join(map(str, p['shape'])):>14}{extra}")
    _emit(info, args.format, "\n".join(lines))
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "tag": cmd_tag,
    "ablate": cmd_ablate,
    "inspect-model": cmd_inspect,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format="%(levelname)s %(name)s: %(message)s")
    try:
        # overflow on the way to a NaN loss is reported once, as a numeric failure
        with np.errstate(over="ignore", invalid="ignore"):
            return COMMANDS[args.command](args, argv)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        raise
    except (CorpusError, ProviderError, SyntheticSpecError, OSError, ValueError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        sys.stdout = None
        code = EXIT_OK
    sys.exit(code)
