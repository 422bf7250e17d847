"""Command-line entry point.

Logs go to standard error; JSON results go to standard output or the
``--out`` path. Exit codes: 0 ok, 2 parse failure or missing file,
3 precondition violation, 4 diverged training, 5 gradcheck failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from dpgcnn import __version__
from dpgcnn.datasets.citation import load_content, read_cites
from dpgcnn.errors import DpgcnnError, GradcheckFailed, ParseError, exit_code_for
from dpgcnn.graph.dual import DualMode, build_dual, count_report, sparsify_dual
from dpgcnn.graph.io import read_edge_list, write_edge_list, write_id_map
from dpgcnn.graph.primal import (
    DirectedGraph,
    add_self_loops,
    connected,
    remove_self_loops,
    to_bidirected,
    weak_components,
)
from dpgcnn.layers.spec import ModelSpec
from dpgcnn.training.metrics import dumps, write_metrics
from dpgcnn.training.suites import SUITES, run_suite
from dpgcnn.training.sweep import ExperimentRunner, run_experiment, with_epochs
from dpgcnn.training.trainer import evaluate
from dpgcnn.utils.config import load_config, load_experiment
from dpgcnn.utils.logging import get_logger, setup_logging

log = get_logger(__name__)


def _emit(data: Any, out: Optional[str]) -> None:
    """Write canonical JSON to ``out`` or standard output."""
    text = dumps(data)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_seeds(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers: {e}")


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{path}: no such file")
    return p


# ---------------------------------------------------------------------------
# dualize
# ---------------------------------------------------------------------------


def cmd_dualize(args: argparse.Namespace) -> int:
    edges = read_edge_list(_require_file(args.edges))
    g = edges.graph()
    mode = DualMode(args.mode)
    if args.undirected or mode is DualMode.CLASSIC:
        g = to_bidirected(g)
    if args.self_loops:
        g = add_self_loops(g)

    dual = build_dual(g, mode)
    if args.sparsify is not None:
        dual = sparsify_dual(dual, args.sparsify, args.seed)

    labels = edges.labels
    arc = dual.dual_to_arc
    names = [f"{labels[s]}:{labels[d]}" for s, d in zip(g.src[arc], g.dst[arc])]
    written = write_edge_list(((names[u], names[v]) for u, v in dual.edge_pairs()), args.out)
    if edges.mapped:
        write_id_map(edges.id_map, Path(args.out).with_suffix(".ids.json"))

    stats: Dict[str, Any] = {
        "mode": mode.value,
        "report": count_report(dual).to_dict(),
        "primal_connected": connected(g),
        "dual_connected": connected(dual) if dual.n else False,
        "construction_ops": dual.construction_ops,
        "sparsified_k": dual.sparsified_k,
        "dual_edges_written": written,
    }
    _emit(stats, args.stats)
    log.info("dualize_finished", out=args.out, dual_vertices=dual.n, dual_edges=written)
    return 0


# ---------------------------------------------------------------------------
# train / eval
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    experiment = load_experiment(_require_file(args.experiment), args.data_dir)
    if args.epochs is not None:
        experiment = with_epochs(experiment, args.epochs)
    summary = run_experiment(
        experiment,
        seeds=args.seeds,
        jobs=args.jobs,
        continue_on_failure=args.continue_on_failure,
        timestamps=args.timestamps,
    )
    out_dir = Path(args.out or Path("runs") / (experiment.name or "experiment"))
    write_metrics(summary, out_dir, args.timestamps)
    print(summary.headline())
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    experiment = load_experiment(_require_file(args.experiment), args.data_dir)
    if args.model:
        experiment.model = ModelSpec.from_json(_require_file(args.model))
    if args.untrained:
        experiment = with_epochs(experiment, 0)

    run = ExperimentRunner(experiment, args.timestamps).fit(args.seed)
    masks = run.masks
    test_loss, test_acc = evaluate(run.model, run.context, masks.labels, masks.test)
    _emit(
        {
            "name": experiment.name,
            "seed": args.seed,
            "trained": not args.untrained,
            "best_epoch": run.metrics.best_epoch,
            "params": run.metrics.params,
            "test_loss": test_loss,
            "test_acc": test_acc,
            "val_acc": run.metrics.val_acc,
        },
        args.out,
    )
    return 0


# ---------------------------------------------------------------------------
# gradcheck
# ---------------------------------------------------------------------------


def cmd_gradcheck(args: argparse.Namespace) -> int:
    scopes = sorted(SUITES) if args.scope == "all" else [args.scope]
    seeds = list(range(args.cases))
    reports = [run_suite(s, seeds, args.threshold, args.max_entries) for s in scopes]
    summary = {"passed": all(r.passed for r in reports), "suites": [r.to_dict() for r in reports]}
    _emit(summary, args.out)
    failed = [r.scope for r in reports if not r.passed]
    if failed:
        raise GradcheckFailed(failed)
    return 0


# ---------------------------------------------------------------------------
# info
# ---------------------------------------------------------------------------


def graph_stats(g: DirectedGraph) -> Dict[str, Any]:
    """Size, symmetry and degree statistics of a graph."""
    simple = to_bidirected(remove_self_loops(g))
    degree = simple.out_degree()
    return {
        "vertices": g.n,
        "arcs": g.num_arcs,
        "undirected_edges": g.undirected_edge_count(),
        "self_loops": int(np.count_nonzero(g.src == g.dst)),
        "bidirected": g.is_bidirected,
        "weak_components": weak_components(g.n, g.src, g.dst),
        "degree_max": int(degree.max(initial=0)),
        "degree_mean": float(degree.mean()) if g.n else 0.0,
    }


def cmd_info(args: argparse.Namespace) -> int:
    if args.edges:
        edges = read_edge_list(_require_file(args.edges))
        stats = graph_stats(edges.graph())
        stats["duplicates"] = edges.duplicates
    elif args.content and args.cites:
        content = load_content(_require_file(args.content))
        g, cites = read_cites(_require_file(args.cites), content)
        stats = graph_stats(g)
        stats.update(
            classes=content.classes,
            feature_width=content.q,
            cites=cites.to_dict(),
        )
    else:
        raise ParseError("info needs --edges or both --content and --cites")
    _emit(stats, args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", default=None, help="Application config (YAML)")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("--verbose", "-v", action="store_true", help="Log at DEBUG")
    noise.add_argument("--quiet", "-q", action="store_true", help="Log warnings and errors only")
    common.add_argument("--data-dir", default=None, help="Root for relative dataset paths")
    common.add_argument(
        "--no-timestamps",
        dest="timestamps",
        action="store_false",
        help="Leave wall times and log timestamps out (byte-stable output)",
    )
    common.add_argument("--out", "-o", default=None, help="Output path")

    parser = argparse.ArgumentParser(
        prog="dpgcnn", description="Dual-primal graph attention networks"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dualize", parents=[common], help="Build the dual of an edge list")
    p.add_argument("edges", help="src<TAB>dst edge list")
    p.add_argument("--mode", choices=[m.value for m in DualMode], default=DualMode.CHAIN.value)
    p.add_argument("--undirected", action="store_true", help="Treat every line as an edge")
    p.add_argument("--self-loops", action="store_true", help="Add (i, i) arcs first")
    p.add_argument("--sparsify", type=int, default=None, metavar="K")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats", default=None, help="Stats JSON path (default: stdout)")
    p.set_defaults(func=cmd_dualize, out_required=True)

    p = sub.add_parser("train", parents=[common], help="Run an experiment's seed sweep")
    p.add_argument("experiment", help="Experiment config (JSON)")
    p.add_argument("--seeds", type=_parse_seeds, default=None, help="e.g. 1,2,3")
    p.add_argument("--jobs", "-j", type=int, default=None, help="Parallel runs")
    p.add_argument("--epochs", type=int, default=None, help="Override max_epochs")
    p.add_argument("--continue-on-failure", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="Train once, then score the test set")
    p.add_argument("experiment", help="Experiment config (JSON)")
    p.add_argument("--model", default=None, help="Model spec JSON replacing the experiment's")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--untrained", action="store_true", help="Score the initial weights")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common], help="Finite-difference gradient suites")
    p.add_argument("--scope", choices=sorted(SUITES) + ["all"], default="all")
    p.add_argument("--cases", type=int, default=3, help="Random instances per case")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--max-entries", type=int, default=24, help="Checked entries per parameter")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("info", parents=[common], help="Graph and dataset statistics")
    p.add_argument("--edges", default=None)
    p.add_argument("--content", default=None)
    p.add_argument("--cites", default=None)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the ``dpgcnn`` command."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "out_required", False) and not args.out:
        parser.error(f"{args.command} needs --out")

    app = load_config(args.config)
    level = "DEBUG" if args.verbose else "WARNING" if args.quiet else app.app.log_level
    setup_logging(level, timestamps=args.timestamps)
    if args.data_dir is None:
        args.data_dir = app.app.data_dir
    if getattr(args, "jobs", 0) is None:
        args.jobs = app.app.jobs

    try:
        return int(args.func(args))
    except (DpgcnnError, FileNotFoundError, IsADirectoryError) as e:
        log.error("command_failed", command=args.command, error=str(e), kind=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
