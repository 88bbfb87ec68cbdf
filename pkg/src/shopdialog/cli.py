"""Command-line pipeline: validate / simulate / realize / gold / split / stats / eval.

Subcommands compose through files (JSON, JSON Lines); there is no hidden
state and all randomness derives from --seed, so re-running a command with
the same inputs reproduces its outputs byte for byte.  Every output artifact
gets a sibling "<name>.manifest.json" recording the invocation.

Exit codes: 0 success, 1 validation/input error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import sys
from pathlib import Path

from . import __version__
from .catalog import load_catalog
from .engine import generate_corpus, load_policy, read_flows, write_flows
from .errors import ShopDialogError, TaskMismatch, ValidationError
from .evalhub import (
    SPLIT_NAMES,
    TASKS,
    build_gold,
    corpus_stats,
    eval_act,
    eval_recommend,
    eval_response,
    eval_set_task,
    eval_set_task_macro,
    read_predictions,
    split_corpus,
    write_predictions,
)
from .ontology import load_ontology
from .realizer import load_templates, realize_corpus


def _write_manifest(out_path: Path, args: argparse.Namespace, argv: list[str], outputs: list[str]) -> None:
    manifest = {
        "subcommand": args.command,
        "argv": argv,
        "inputs": {
            k: str(v)
            for k, v in vars(args).items()
            if k in ("scenes", "metadata", "ontology", "policy", "templates", "flows", "pred", "gold")
            and v is not None
        },
        "outputs": outputs,
        "seed": getattr(args, "seed", None),
        "config": str(getattr(args, "policy", None)) if getattr(args, "policy", None) else None,
        "created_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "tool_version": __version__,
    }
    out_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def cmd_validate(args, argv) -> int:
    scenes, metadata = load_catalog(args.scenes, args.metadata)
    ont = load_ontology(args.ontology)
    # Cross-check: every metadata value must sit in the ontology value space,
    # otherwise a simulated customer could face a value no concept covers.
    problems = []
    for proto, attrs in metadata.items():
        for attr, value in attrs.items():
            space = ont.value_spaces.get(attr)
            if space is None or value not in space:
                problems.append(f"{proto}: {attr}={value!r} not covered by the ontology")
    if problems:
        raise ValidationError("; ".join(problems[:5]))
    if args.policy:
        load_policy(args.policy)
    if args.templates:
        load_templates(args.templates)
    n_items = sum(len(s.items) for s in scenes)
    print(f"OK: {len(scenes)} scenes, {n_items} items, {len(ont.concepts)} concepts")
    return 0


def cmd_simulate(args, argv) -> int:
    scenes, _ = load_catalog(args.scenes, args.metadata)
    ont = load_ontology(args.ontology)
    cfg = load_policy(args.policy)
    flows = generate_corpus(scenes, ont, cfg, args.n, args.seed, jobs=args.jobs)
    count = write_flows(flows, args.out)
    _write_manifest(Path(str(args.out) + ".manifest.json"), args, argv, [str(args.out)])
    print(f"wrote {count} dialogs to {args.out}")
    return 0


def cmd_realize(args, argv) -> int:
    scenes, _ = load_catalog(args.scenes, args.metadata)
    ont = load_ontology(args.ontology)
    templates = load_templates(args.templates)
    flows = read_flows(args.flows)
    realized = realize_corpus(flows, templates, ont, scenes, args.seed, jobs=args.jobs)
    write_flows(realized, args.out)
    _write_manifest(Path(str(args.out) + ".manifest.json"), args, argv, [str(args.out)])
    print(f"realized {len(realized)} dialogs to {args.out}")
    return 0


def cmd_gold(args, argv) -> int:
    scenes, _ = load_catalog(args.scenes, args.metadata)
    ont = load_ontology(args.ontology)
    flows = read_flows(args.flows)
    task = args.task.upper()
    header, rows = build_gold(flows, ont, scenes, task, spd_mode=args.spd_mode)
    write_predictions(args.out, header, rows)
    _write_manifest(Path(str(args.out) + ".manifest.json"), args, argv, [str(args.out)])
    print(f"wrote {len(rows)} {task} gold rows to {args.out}")
    return 0


def cmd_split(args, argv) -> int:
    flows = read_flows(args.flows)
    ratios = tuple(float(r) for r in args.ratios.split(","))
    parts = split_corpus(flows, ratios, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for name in SPLIT_NAMES:
        path = out_dir / f"{name}.jsonl"
        write_flows(parts[name], path)
        outputs.append(str(path))
    _write_manifest(out_dir / "split.manifest.json", args, argv, outputs)
    print("split sizes: " + ", ".join(f"{n}={len(parts[n])}" for n in SPLIT_NAMES))
    return 0


def cmd_stats(args, argv) -> int:
    flows = read_flows(args.flows)
    report = corpus_stats(flows)
    out = Path(args.out)
    if args.format == "csv":
        with open(out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["section", "round", "act", "value"])
            for field, value in report.to_dict().items():
                if field in ("candidate_items_by_round", "act_distribution_by_round"):
                    continue
                writer.writerow([field, "", "", value])
            for rnd, mean in enumerate(report.candidate_items_by_round, 1):
                writer.writerow(["candidate_items", rnd, "", mean])
            for rnd, row in enumerate(report.act_distribution_by_round, 1):
                for act, p in row.items():
                    writer.writerow(["act_distribution", rnd, act, p])
    else:
        _write_json(out, report.to_dict())
    _write_manifest(Path(str(out) + ".manifest.json"), args, argv, [str(out)])
    print(f"stats for {report.n_dialogs} dialogs written to {out}")
    return 0


def _check_declared_task(header: dict, task: str, path) -> None:
    declared = header.get("task")
    if declared is not None and declared != task:
        raise TaskMismatch(f"{path} declares task {declared!r}, expected {task!r}")


def cmd_eval(args, argv) -> int:
    task = args.task.upper()
    if task not in TASKS:
        raise TaskMismatch(f"unknown task {args.task!r}")
    pred_header, pred_rows = read_predictions(args.pred)
    gold_header, gold_rows = read_predictions(args.gold)
    _check_declared_task(pred_header, task, args.pred)
    _check_declared_task(gold_header, task, args.gold)

    report: dict = {"task": task, "n_rounds": len(gold_rows), "tool_version": __version__}
    if task in ("SPD", "RRU"):
        cast = (lambda xs: set(map(str, xs))) if task == "SPD" else (lambda xs: set(map(int, xs)))
        preds = {k: cast(v) for k, v in pred_rows.items()}
        gold = {k: cast(v) for k, v in gold_rows.items()}
        if task == "SPD":
            report["spd_mode"] = gold_header.get("spd_mode", "cumulative")
        report["micro"] = eval_set_task(preds, gold, task).to_dict()
        report["macro"] = eval_set_task_macro(preds, gold).to_dict()
    elif task == "ACT":
        act_report = eval_act(
            {k: str(v) for k, v in pred_rows.items()},
            {k: str(v) for k, v in gold_rows.items()},
        )
        report.update(act_report.to_dict())
    elif task == "RESPONSE":
        report["bleu4"] = eval_response(
            {k: str(v) for k, v in pred_rows.items()},
            {k: str(v) for k, v in gold_rows.items()},
        )
    elif task == "RECOMMEND":
        gold = {k: {int(i) for i in v} for k, v in gold_rows.items()}
        report["micro"] = eval_recommend(pred_rows, gold).to_dict()

    if args.out:
        out = Path(args.out)
        if args.format == "csv":
            with open(out, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["metric", "value"])
                for key, value in sorted(_flatten(report).items()):
                    writer.writerow([key, value])
        else:
            _write_json(out, report)
        _write_manifest(Path(str(out) + ".manifest.json"), args, argv, [str(out)])
    else:
        print(json.dumps(report, indent=2, ensure_ascii=False))
    return 0


def _flatten(obj: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in obj.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(_flatten(value, name))
        else:
            flat[name] = value
    return flat


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shopdialog",
        description="Recommendation dialog simulation and benchmark pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_catalog_flags(p):
        p.add_argument("--scenes", required=True, help="scene JSON file")
        p.add_argument("--metadata", required=True, help="prototype metadata JSON file")
        p.add_argument("--ontology", required=True, help="ontology JSON file")

    p = sub.add_parser("validate", help="validate scenes, metadata and ontology")
    add_catalog_flags(p)
    p.add_argument("--policy", help="also validate a policy config")
    p.add_argument("--templates", help="also validate a template file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="generate dialog flows by self-play")
    add_catalog_flags(p)
    p.add_argument("--policy", required=True, help="policy config JSON")
    p.add_argument("--n", type=int, required=True, help="number of dialogs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("realize", help="fill utterances into dialog flows")
    add_catalog_flags(p)
    p.add_argument("--templates", required=True, help="template JSON file")
    p.add_argument("--flows", required=True, help="input flow JSONL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("gold", help="derive gold annotations from flows")
    add_catalog_flags(p)
    p.add_argument("--flows", required=True, help="input flow JSONL")
    p.add_argument("--task", required=True, choices=[t.lower() for t in TASKS])
    p.add_argument("--spd-mode", choices=["cumulative", "scene_only"], default="cumulative")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.set_defaults(func=cmd_gold)

    p = sub.add_parser("split", help="partition a corpus into the four benchmark splits")
    p.add_argument("--flows", required=True, help="input flow JSONL")
    p.add_argument("--ratios", default="0.65,0.05,0.15,0.15", help="four comma-separated ratios")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("stats", help="corpus statistics report")
    p.add_argument("--flows", required=True, help="input flow JSONL")
    p.add_argument("--out", required=True, help="output report path")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", help="score a prediction file against gold")
    p.add_argument("--task", required=True, choices=[t.lower() for t in TASKS])
    p.add_argument("--pred", required=True, help="prediction JSONL")
    p.add_argument("--gold", required=True, help="gold JSONL")
    p.add_argument("--out", help="report path (default: print to stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry; scoring is one pass")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ShopDialogError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
