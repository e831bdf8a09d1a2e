"""Command-line front end: ``playcover <subcommand> ...``.

Exit status is 0 on success, 2 on usage or validation errors and 1 on an
unexpected internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .buffer import TAU, VisitBuffer
from .coordinator import (
    BUFFER_FILE,
    COVERAGE_FILE,
    EDGES_FILE,
    LABELS_FILE,
    OUTLIER_FILE,
    SEMANTIC_FILE,
    SUMMARY_FILE,
    CoverageLog,
    ExperimentConfig,
    ExperimentError,
    run_experiment,
)
from .diagnostics import InsufficientData, detect_stuck
from .graph import DEFAULT_LINK_RADIUS, DEFAULT_MIN_CLUSTER, ConnectivityGraph, cluster, semantic_map, shortest_path
from .world import ScenarioError, load_scenario

OUT_ENV = "PLAYCOVER_OUT"
DEFAULT_OUT = "playcover-out"
CURVE_FILE = "coverage_curve.dat"

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _point(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z in meters, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z in meters, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _run_dir(path: str) -> Path:
    d = Path(path)
    if not (d / BUFFER_FILE).is_file():
        raise UsageError(f"{d}: no {BUFFER_FILE} (not a run directory?)")
    return d


def _load_buffer(d: Path) -> VisitBuffer:
    try:
        return VisitBuffer.load(d / BUFFER_FILE)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_graph(d: Path, buf: VisitBuffer) -> ConnectivityGraph:
    edges = d / EDGES_FILE
    if not edges.is_file():
        raise UsageError(f"{d}: no {EDGES_FILE}")
    try:
        return ConnectivityGraph.read_edges(edges, buf)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{edges}: {exc}") from None


# --- subcommands ------------------------------------------------------------------

def cmd_validate(args: argparse.Namespace) -> int:
    scn = load_scenario(args.scenario)
    eb = scn.exploration_boundary
    disabled = sum(1 for b in scn.blocks if not b.collision_enabled)
    traps = sum(1 for b in scn.blocks if b.surface_class.value == "stuck_trap")
    print(f"scenario {scn.name}: OK")
    print(f"  blocks {scn.block_count()} (collision disabled {disabled}, stuck traps {traps})")
    print(f"  elevators {len(scn.elevators)}")
    print(f"  rois {len(scn.rois)}" + (f" ({', '.join(r.name for r in scn.rois)})" if scn.rois else ""))
    print(f"  exploration boundary volume {eb.volume:.1f} m^3")
    if scn.estimated_max_points:
        print(f"  estimated max points {scn.estimated_max_points}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    load_scenario(args.scenario)  # surface load errors before any work
    try:
        cfg = ExperimentConfig(
            scenario=args.scenario, policy=args.policy, workers=args.workers, steps=args.steps,
            seed=args.seed, log_interval=args.log_interval, out_dir=out, estimated_max=args.estimated_max,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = run_experiment(cfg)
    steps, points, frac, _ = res.coverage.final
    print(f"{res.episodes} episodes, {steps} steps, {points} points, coverage {frac:.3f} "
          f"(estimate {res.coverage.estimated_max})")
    print("terminations: " + ", ".join(f"{k} {v}" for k, v in sorted(res.causes.items())))
    print(f"recorded trajectories: {len(res.recorder.recorded)}")
    print(f"artifacts in {out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    d = _run_dir(args.run_dir)
    path = d / COVERAGE_FILE
    if not path.is_file():
        raise UsageError(f"{d}: no {COVERAGE_FILE}")
    try:
        log = CoverageLog.read(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"{'steps':>10} {'points':>7} {'coverage':>9} {'seconds':>10}")
    for s, n, c, t in log.rows:
        print(f"{s:>10} {n:>7} {c:>9.4f} {t:>10.1f}")
    curve = Path(args.curve) if args.curve else d / CURVE_FILE
    # plot-ready: simulated hours vs percent covered
    lines = ["# hours percent_covered"] + [f"{t / 3600.0!r} {100.0 * c!r}" for _, _, c, t in log.rows]
    curve.write_text("\n".join(lines) + "\n")
    summary = d / SUMMARY_FILE
    if summary.is_file():
        doc = json.loads(summary.read_text())
        print(f"episodes {doc.get('episodes')}, terminations {doc.get('causes')}, wall clock {doc.get('wall_seconds', 0):.1f}s")
    print(f"curve written to {curve}")
    return EXIT_OK


def cmd_path(args: argparse.Namespace) -> int:
    d = _run_dir(args.run_dir)
    buf = _load_buffer(d)
    if not len(buf):
        raise UsageError(f"{d}: buffer is empty")
    graph = _load_graph(d, buf)
    res = shortest_path(graph, buf, args.src, args.dst, max_snap=args.snap)
    if not res.reachable:
        print(f"unreachable (from point {res.start} to point {res.goal})")
        return EXIT_OK
    for i in res.nodes:
        x, y, z = buf.points[i]
        print(f"{i} {x:.3f} {y:.3f} {z:.3f}")
    print(f"cost {res.cost:.3f}")
    return EXIT_OK


def cmd_clusters(args: argparse.Namespace) -> int:
    d = _run_dir(args.run_dir)
    buf = _load_buffer(d)
    try:
        labels = cluster(buf, args.radius, args.min_size)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    buf.export(d / LABELS_FILE, ("cluster", labels.labels))
    noise = labels.labels.count(-1)
    print(f"{labels.n_clusters} clusters, {noise} noise points of {len(buf)}")
    for c in range(labels.n_clusters):
        members = labels.members(c)
        ys = [buf.points[i][1] for i in members]
        print(f"  cluster {c}: {len(members)} points, height {min(ys):.1f}..{max(ys):.1f} m")
    if (d / EDGES_FILE).is_file():
        sem = semantic_map(_load_graph(d, buf), labels, buf)
        sem.write(d / SEMANTIC_FILE)
        for (a, b), e in sorted(sem.edges.items()):
            print(f"  {a} -> {b} {e.tag} ({e.count} traversals)")
    return EXIT_OK


def cmd_stuck(args: argparse.Namespace) -> int:
    d = _run_dir(args.run_dir)
    buf = _load_buffer(d)
    try:
        rep = detect_stuck(buf)
    except InsufficientData as exc:
        raise UsageError(f"{d}: {exc}") from None
    rep.write(d / OUTLIER_FILE, buf)
    q1, q2, q3 = rep.quartiles
    print(f"terminations: mean {rep.mean:.2f} std {rep.std:.2f} quartiles {q1:g}/{q2:g}/{q3:g} threshold {rep.threshold:.2f}")
    if not rep.flagged:
        print("no outliers")
    for i, count, score in rep.flagged:
        x, y, z = buf.points[i]
        print(f"{i} {x:.3f} {y:.3f} {z:.3f} terminations {count} score {score:.2f}")
    return EXIT_OK


EXPORTS = ("edges", "graphml", "buffer", "labels", "semantic")


def cmd_export(args: argparse.Namespace) -> int:
    d = _run_dir(args.run_dir)
    buf = _load_buffer(d)
    target = Path(args.output)
    what = args.format
    if what == "buffer":
        buf.export(target)
    elif what in ("edges", "graphml"):
        graph = _load_graph(d, buf)
        if what == "edges":
            graph.write_edges(target)
        else:
            graph.write_graphml(target)
    else:
        labels = cluster(buf, args.radius, args.min_size)
        if what == "labels":
            buf.export(target, ("cluster", labels.labels))
        else:
            semantic_map(_load_graph(d, buf), labels, buf).write(target)
    print(f"wrote {target}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="playcover", description="Curiosity-driven playtest coverage runs and analyses.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="load a scenario and print a summary")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("run", help="run an exploration experiment")
    s.add_argument("scenario")
    s.add_argument("--policy", choices=("random", "curiosity"), default="curiosity")
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--steps", type=_positive_int, default=2_000_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    s.add_argument("--log-interval", type=_positive_int, default=10_000)
    s.add_argument("--estimated-max", type=_positive_int, default=None,
                   help="coverage denominator (default: scenario value or flood-fill estimate)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("report", help="print the coverage curve of a run")
    s.add_argument("run_dir")
    s.add_argument("--curve", help=f"plot-ready output file (default: RUN_DIR/{CURVE_FILE})")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("path", help="shortest traversable path between two points")
    s.add_argument("run_dir")
    s.add_argument("--from", dest="src", type=_point, required=True, metavar="X,Y,Z")
    s.add_argument("--to", dest="dst", type=_point, required=True, metavar="X,Y,Z")
    s.add_argument("--snap", type=float, default=TAU, metavar="M",
                   help="endpoints farther than this from every visited point are unreachable (default: tau)")
    s.set_defaults(func=cmd_path)

    for name, func, help_ in (("clusters", cmd_clusters, "cluster buffer points into regions"),
                              ("export", cmd_export, "write one artifact in a chosen format")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("run_dir")
        s.add_argument("--radius", type=float, default=DEFAULT_LINK_RADIUS)
        s.add_argument("--min-size", type=_positive_int, default=DEFAULT_MIN_CLUSTER)
        if name == "export":
            s.add_argument("--format", choices=EXPORTS, required=True)
            s.add_argument("-o", "--output", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("stuck", help="flag stuck spots from termination counts")
    s.add_argument("run_dir")
    s.set_defaults(func=cmd_stuck)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
