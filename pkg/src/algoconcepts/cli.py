"""Command-line front end.

Every subcommand writes its artifacts plus ``<command>.manifest.json`` into
``--out``.  Exit codes: 0 success, 1 verification failure, 2 usage error.
Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import logging
import subprocess
import sys
import time
from dataclasses import asdict, replace
from importlib import metadata
from pathlib import Path

from . import io
from .algoexec import schema_for
from .decoder import DecoderModel, TrainConfig, relevant_concepts
from .evalmetrics import fit_decision_tree, tree_to_dot, tree_to_json, tree_to_text
from .graphgen import GENERALISATION_SIZES, derive_seed, make_dataset, make_test_graphs
from .logic import LogicConfig, format_formula
from .pipeline import (ALGORITHMS, PipelineConfig, check_replay, default_train_config, evaluate,
                       extract_rules, fit_relevance, learn_termination, run_repro, traces_for)

log = logging.getLogger("algoconcepts")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2
SPLITS = ("train", "validation", "test")


class UsageError(Exception):
    pass


class VerificationError(Exception):
    def __init__(self, msg: str, details: dict | None = None):
        super().__init__(msg)
        self.details = details or {}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def package_version() -> str:
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--tags", "--always", "--dirty"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# argument helpers -----------------------------------------------------------

def _counts(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:c integers, got {text!r}")
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers a:b:c, got {text!r}")
    return parts


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _common(p: argparse.ArgumentParser, *, sizes: bool = False) -> None:
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", default=".", type=Path, help="output directory")
    if sizes:
        p.add_argument("--size", dest="sizes", type=int, nargs="+", default=list(GENERALISATION_SIZES),
                       help="test graph sizes")
        p.add_argument("--count", type=int, default=30, help="test graphs per size")
        p.add_argument("--train-size", dest="size", type=int, default=None,
                       help="training graph size when rules or a model are derived on the fly")
    else:
        p.add_argument("--size", type=int, default=None, help="training graph size")
    p.add_argument("--counts", type=_counts, default=None, help="graphs per category, train:val:test")


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda-l1", type=float, default=None)
    p.add_argument("--prune-epoch", type=int, default=None)
    p.add_argument("--no-prune", action="store_true", help="disable the preset prune epoch")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--hidden", type=int, default=None, help="hidden width; 0 for a linear decoder")


def _logic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--dont-care", type=_on_off, default=True, metavar="{on|off}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="algoconcepts", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate train/validation/test graphs")
    _common(p)

    p = sub.add_parser("trace", help="ground-truth traces for one split")
    _common(p)
    p.add_argument("--split", choices=SPLITS, default="train")
    p.add_argument("--graphs", type=Path, help="graph JSONL to trace instead of generating")

    p = sub.add_parser("train", help="train the concept decoder")
    _common(p)
    _train_flags(p)
    p.add_argument("--traces", type=Path)

    p = sub.add_parser("extract", help="per-label DNF rules")
    _common(p)
    _logic_flags(p)
    p.add_argument("--traces", type=Path)
    p.add_argument("--model", type=Path, help="decoder whose unpruned concepts restrict the rules")

    p = sub.add_parser("term-rule", help="smallest existential termination rule")
    _common(p)
    p.add_argument("--traces", type=Path)
    p.add_argument("--model", type=Path)

    p = sub.add_parser("exec-rules", help="replay with rules and check against the true algorithm")
    _common(p, sizes=True)
    p.add_argument("--rules", type=Path, required=True)
    p.add_argument("--term-rule", type=Path)

    p = sub.add_parser("eval", help="metrics report")
    _common(p, sizes=True)
    _logic_flags(p)
    _train_flags(p)
    p.add_argument("--mode", choices=("formula", "decoder", "both"), default="formula")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--rules", type=Path)
    p.add_argument("--term-rule", type=Path)
    p.add_argument("--model", type=Path)

    p = sub.add_parser("tree", help="decision tree on ground-truth concepts")
    _common(p)
    p.add_argument("--traces", type=Path)
    p.add_argument("--max-depth", type=int, default=None)

    p = sub.add_parser("repro", help="full pipeline for one algorithm")
    _common(p)
    _train_flags(p)
    _logic_flags(p)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--test-sizes", type=int, nargs="+", default=list(GENERALISATION_SIZES))
    p.add_argument("--count", type=int, default=30, help="test graphs per size")
    return parser


# shared steps ---------------------------------------------------------------

def _train_config(args) -> TrainConfig:
    cfg = default_train_config(args.algorithm, args.seed, lambda_l1=args.lambda_l1,
                               prune_epoch=args.prune_epoch, epochs=args.epochs,
                               learning_rate=args.lr, batch_size=args.batch, hidden=args.hidden)
    if args.no_prune:
        cfg = replace(cfg, prune_epoch=None)
    return cfg


def _train_traces(args):
    if getattr(args, "traces", None):
        traces = io.load_traces(args.traces)
        if any(t.algorithm != args.algorithm for t in traces):
            raise UsageError(f"{args.traces} holds traces of another algorithm")
        return traces
    ds = make_dataset(args.algorithm, args.size, args.counts, args.seed)
    return traces_for(args.algorithm, ds.train)


def _load_model(path) -> DecoderModel | None:
    return None if path is None else io.model_from_json(io.load_json(path))


def _load_rules(args):
    alg, labels, term = io.rules_from_json(io.load_json(args.rules))
    if alg != args.algorithm:
        raise UsageError(f"{args.rules} holds rules for {alg}, not {args.algorithm}")
    if args.term_rule:
        term = io.rule_from_json(io.load_json(args.term_rule))
    return labels, term


def _test_graphs(args) -> dict:
    return {n: make_test_graphs(args.algorithm, n, args.count, derive_seed(args.seed, 99))
            for n in args.sizes}


def _render_rules(algorithm: str, labels, term) -> str:
    schema = schema_for(algorithm)
    lines = [f"{schema.label_names[k]} ⟺ {format_formula(f, schema)}" for k, f in sorted(labels.items())]
    if term is not None:
        lines.append(term.render(schema))
    return "\n".join(lines) + "\n"


# commands -------------------------------------------------------------------

def cmd_gen(args) -> dict:
    ds = make_dataset(args.algorithm, args.size, args.counts, args.seed)
    files = {}
    for split in SPLITS:
        path = args.out / f"graphs_{split}.jsonl"
        io.save_graphs(getattr(ds, split), path)
        files[split] = str(path)
    return {"files": files, "graphs": {s: len(getattr(ds, s)) for s in SPLITS}}


def cmd_trace(args) -> dict:
    if args.graphs:
        graphs = io.load_graphs(args.graphs)
    else:
        graphs = getattr(make_dataset(args.algorithm, args.size, args.counts, args.seed), args.split)
    traces = traces_for(args.algorithm, graphs)
    path = args.out / f"traces_{args.split}.jsonl"
    io.save_traces(traces, path)
    return {"files": {"traces": str(path)}, "traces": len(traces),
            "steps": sum(len(t.steps) for t in traces)}


def cmd_train(args) -> dict:
    cfg = _train_config(args)
    model = fit_relevance(args.algorithm, _train_traces(args), cfg)
    path = args.out / "model.json"
    io.dump_json(io.model_to_json(model), path)
    buf = _stdio.StringIO()
    w = csv.DictWriter(buf, fieldnames=["epoch", "loss", "accuracy"], lineterminator="\n")
    w.writeheader()
    w.writerows(model.history)
    io.atomic_write_text(args.out / "training_history.csv", buf.getvalue())
    names = schema_for(args.algorithm).names
    return {"files": {"model": str(path), "history": str(args.out / "training_history.csv")},
            "train_config": asdict(cfg), "final_accuracy": model.history[-1]["accuracy"],
            "pruned": [names[j] for j, p in enumerate(model.pruned) if p]}


def cmd_extract(args) -> dict:
    model = _load_model(args.model)
    relevant = relevant_concepts(model) if model is not None else None
    logic = LogicConfig(args.threshold, args.dont_care)
    labels = extract_rules(args.algorithm, _train_traces(args), relevant, logic)
    path = args.out / "rules.json"
    io.dump_json(io.rules_to_json(args.algorithm, labels, None,
                                  {"relevant": None if relevant is None else list(relevant)}), path)
    text = _render_rules(args.algorithm, labels, None)
    io.atomic_write_text(args.out / "rules.txt", text)
    sys.stdout.write(text)
    return {"files": {"rules": str(path)}}


def cmd_term_rule(args) -> dict:
    model = _load_model(args.model)
    relevant = relevant_concepts(model) if model is not None else None
    rule = learn_termination(args.algorithm, _train_traces(args), relevant)
    if rule is None:
        raise UsageError(f"{args.algorithm} runs a fixed number of steps and has no termination rule")
    path = args.out / "term_rule.json"
    io.dump_json(io.rule_to_json(rule, schema_for(args.algorithm)), path)
    sys.stdout.write(rule.render(schema_for(args.algorithm)) + "\n")
    return {"files": {"term_rule": str(path)}}


def cmd_exec_rules(args) -> dict:
    labels, term = _load_rules(args)
    checks = [c for n, gs in sorted(_test_graphs(args).items())
              for c in check_replay(args.algorithm, gs, labels, term)]
    failed = [c for c in checks if not c.equal]
    summary = {"graphs": len(checks), "equal": len(checks) - len(failed)}
    if failed:
        first = failed[0]
        raise VerificationError("rule replay diverged from the reference execution",
                                {**summary, "first_divergence": {"size": first.size, "graph": first.index,
                                                                 **first.divergence}})
    return summary


def cmd_eval(args) -> dict:
    modes = ("decoder", "formula") if args.mode == "both" else (args.mode,)
    model = _load_model(args.model)
    traces = None
    if "decoder" in modes and model is None:
        traces = _train_traces(args)
        model = fit_relevance(args.algorithm, traces, _train_config(args))
    if args.rules:
        labels, term = _load_rules(args)
    else:
        traces = traces or _train_traces(args)
        relevant = relevant_concepts(model) if model is not None else None
        logic = LogicConfig(args.threshold, args.dont_care)
        labels = extract_rules(args.algorithm, traces, relevant, logic)
        term = learn_termination(args.algorithm, traces)
    report = evaluate(args.algorithm, _test_graphs(args), labels, term, model, args.noise, args.seed, modes)
    path = args.out / "report.json"
    io.dump_json(report.to_json(), path)
    return {"files": {"report": str(path)}}


def cmd_tree(args) -> dict:
    from .algoexec import labeled_rows

    X, y = labeled_rows(_train_traces(args))
    tree = fit_decision_tree(X, y, args.max_depth)
    schema = schema_for(args.algorithm)
    io.dump_json(tree_to_json(tree), args.out / "tree.json")
    text = tree_to_text(tree, schema.names, schema.label_names)
    io.atomic_write_text(args.out / "tree.txt", text)
    io.atomic_write_text(args.out / "tree.dot", tree_to_dot(tree, schema.names, schema.label_names))
    sys.stdout.write(text)
    return {"files": {"tree": str(args.out / "tree.json")}, "depth": tree.depth(),
            "leaves": len(tree.leaves()), "split_concepts": sorted(schema.names[j] for j in tree.split_concepts())}


def cmd_repro(args) -> dict:
    cfg = PipelineConfig(args.algorithm, args.seed, args.size, args.counts, tuple(args.test_sizes),
                         args.count, _train_config(args), LogicConfig(args.threshold, args.dont_care),
                         args.noise, str(args.out))
    res = run_repro(cfg)
    schema = schema_for(args.algorithm)
    io.dump_json(io.rules_to_json(args.algorithm, res.label_rules, res.term_rule,
                                  {"relevant": list(res.relevant)}), args.out / "rules.json")
    io.atomic_write_text(args.out / "rules.txt", _render_rules(args.algorithm, res.label_rules, res.term_rule))
    io.dump_json(res.report.to_json(), args.out / "report.json")
    io.dump_json(io.model_to_json(res.model), args.out / "model.json")
    sys.stdout.write(_render_rules(args.algorithm, res.label_rules, res.term_rule))
    out = {"config": cfg.to_json(), "relevant": [schema.names[j] for j in res.relevant],
           "replay_equal": sum(c.equal for c in res.replay), "replay_total": len(res.replay)}
    if not res.ok:
        bad = next(c for c in res.replay if not c.equal)
        raise VerificationError("rule replay diverged from the reference execution",
                                {**out, "first_divergence": {"size": bad.size, "graph": bad.index,
                                                             **bad.divergence}})
    return out


COMMANDS = {"gen": cmd_gen, "trace": cmd_trace, "train": cmd_train, "extract": cmd_extract,
            "term-rule": cmd_term_rule, "exec-rules": cmd_exec_rules, "eval": cmd_eval,
            "tree": cmd_tree, "repro": cmd_repro}


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def _write_manifest(args, started: float, status: str, result: dict) -> None:
    manifest = {
        "command": args.command,
        "args": {k: _jsonable(v) for k, v in sorted(vars(args).items())},
        "seed": args.seed,
        "version": package_version(),
        "wall_time_s": round(time.perf_counter() - started, 3),
        "status": status,
        "result": result,
    }
    io.dump_json(manifest, args.out / f"{args.command}.manifest.json")


def _fail(code: int, kind: str, msg: str, details: dict | None = None) -> int:
    payload = {"error": kind, "message": msg, "exit_code": code}
    if details:
        payload["details"] = details
    sys.stderr.write(json.dumps(payload, default=str) + "\n")
    return code


def run_command(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        result = COMMANDS[args.command](args)
    except VerificationError as exc:
        _write_manifest(args, started, "verification_failed", exc.details)
        return _fail(EXIT_VERIFY, "verification", str(exc), exc.details)
    except (UsageError, ValueError, OSError, KeyError) as exc:
        return _fail(EXIT_USAGE, type(exc).__name__, str(exc))
    except Exception as exc:  # a pipeline stage failed on valid input
        return _fail(EXIT_VERIFY, type(exc).__name__, str(exc))
    _write_manifest(args, started, "ok", result)
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
