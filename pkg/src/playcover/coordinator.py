"""Experiment driver: W workers feeding one central visit buffer and policy.

With a single worker, episodes run in-process directly against the central
buffer, which makes the run bit-reproducible. With several workers, each
episode is simulated in a worker process against a snapshot of the buffer
and policy taken at dispatch time; the coordinator then replays every
finished episode into the central buffer and policy in arrival order.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import time
from concurrent.futures import FIRST_COMPLETED, Future, ProcessPoolExecutor, wait
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .buffer import VisitBuffer
from .diagnostics import EB_ID, EXIT, InsufficientData, TrajectoryRecorder, detect_stuck
from .graph import build_graph, cluster, semantic_map
from .policy import (
    EPISODE_STEPS,
    SAMPLE_STRIDE,
    EpisodeResult,
    RandomPolicy,
    TabularPolicy,
    epsilon_at,
    replay_episode,
    run_episode,
)
from .world import DT, Scenario, load_scenario

log = logging.getLogger(__name__)

POLICY_KINDS = ("random", "curiosity")
DEFAULT_LOG_INTERVAL = 10_000
MIN_BUDGET = EPISODE_STEPS
# elevator phases are decorrelated by starting each episode at a random clock
T0_SPAN = 1000.0

BUFFER_FILE = "buffer.csv"
COVERAGE_FILE = "coverage.csv"
TRAJECTORY_DIR = "trajectories"
OUTLIER_FILE = "outliers.csv"
CHECKPOINT_FILE = "policy.json"
EDGES_FILE = "graph.edges"
GRAPHML_FILE = "graph.graphml"
LABELS_FILE = "buffer_labeled.csv"
SEMANTIC_FILE = "semantic.txt"
SUMMARY_FILE = "summary.json"
COVERAGE_HEADER = "steps,points,coverage,seconds"


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str | Path
    policy: str = "curiosity"
    workers: int = 1
    steps: int = 2_000_000
    seed: int = 0
    log_interval: int = DEFAULT_LOG_INTERVAL
    out_dir: str | Path | None = None
    # overrides the scenario's estimated_max_points (else the flood-fill oracle)
    estimated_max: int | None = None

    def __post_init__(self) -> None:
        if self.policy not in POLICY_KINDS:
            raise ValueError(f"policy must be one of {POLICY_KINDS}, got {self.policy!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.steps < MIN_BUDGET:
            raise ValueError(f"steps budget must be >= {MIN_BUDGET}")
        if self.log_interval < 1:
            raise ValueError("log interval must be >= 1")
        if self.estimated_max is not None and self.estimated_max < 1:
            raise ValueError("estimated_max must be >= 1")

    def worker_seeds(self) -> list[int]:
        # string seeding is hashed with sha512, so this is stable across runs and platforms
        return [random.Random(f"playcover:{self.seed}:{w}").getrandbits(63) for w in range(self.workers)]


@dataclass
class CoverageLog:
    estimated_max: int
    rows: list[tuple[int, int, float, float]] = field(default_factory=list)

    def append(self, row: tuple[int, int, float, float]) -> None:
        if self.rows and row[1] < self.rows[-1][1]:
            raise ValueError("buffer size decreased between coverage rows")
        self.rows.append(row)

    @property
    def final(self) -> tuple[int, int, float, float]:
        return self.rows[-1]

    def write(self, path: str | Path) -> None:
        lines = [COVERAGE_HEADER]
        lines += [f"{s},{n},{c!r},{t!r}" for s, n, c, t in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def read(cls, path: str | Path, estimated_max: int = 0) -> CoverageLog:
        text = Path(path).read_text().splitlines()
        if not text or text[0] != COVERAGE_HEADER:
            raise ValueError(f"{path}: not a coverage log")
        out = cls(estimated_max)
        for line in text[1:]:
            if line.strip():
                s, n, c, t = line.split(",")
                out.append((int(s), int(n), float(c), float(t)))
        return out


def log_coverage(buffer: VisitBuffer, estimated_max: int, steps: int, clock: float) -> tuple[int, int, float, float]:
    return (steps, len(buffer), buffer.coverage(estimated_max), clock)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    buffer: VisitBuffer
    policy: RandomPolicy | TabularPolicy
    coverage: CoverageLog
    recorder: TrajectoryRecorder
    episodes: int
    steps: int
    causes: dict[str, int]
    exits: list[tuple[float, float, float]]
    samples: list[list[tuple[float, float, float]]]
    wall_seconds: float
    artifacts: dict[str, Path] = field(default_factory=dict)


def resolve_estimate(scn: Scenario, override: int | None = None) -> int:
    if override is not None:
        return override
    if scn.estimated_max_points:
        return scn.estimated_max_points
    from .reach import estimate

    return estimate(scn).estimated_max


# --- worker side ---------------------------------------------------------------

_WORKER_SCENARIO: Scenario | None = None


def _worker_init(scn: Scenario) -> None:
    global _WORKER_SCENARIO
    _WORKER_SCENARIO = scn


def _worker_episode(task: dict) -> EpisodeResult:
    assert _WORKER_SCENARIO is not None
    return run_episode(
        _WORKER_SCENARIO,
        task["policy"],
        task["buffer"],
        random.Random(task["seed"]),
        learn=True,
        episode_id=task["episode"],
        spawn=task["spawn"],
        heading=task["heading"],
        t0=task["t0"],
        keep_transitions=True,
    )


# --- coordinator side -----------------------------------------------------------

class _Run:
    """Single-writer state: the buffer, the policy, logs and recorders."""

    def __init__(self, config: ExperimentConfig, scn: Scenario, est: int):
        self.config = config
        self.scn = scn
        self.est = est
        self.buffer = VisitBuffer()
        self.policy: RandomPolicy | TabularPolicy = TabularPolicy() if config.policy == "curiosity" else RandomPolicy()
        self.coverage = CoverageLog(est)
        self.recorder = TrajectoryRecorder()
        self.steps = 0
        self.episodes = 0
        self.causes: dict[str, int] = {}
        self.exits: list[tuple[float, float, float]] = []
        self.samples: list[list[tuple[float, float, float]]] = []
        self.next_mark = config.log_interval
        self.slot_rngs = [random.Random(s) for s in config.worker_seeds()]
        self.coverage.append(log_coverage(self.buffer, est, 0, 0.0))

    def set_epsilon(self) -> None:
        if isinstance(self.policy, TabularPolicy):
            self.policy.epsilon = epsilon_at(self.steps, self.config.steps)

    def episode_params(self, slot: int) -> dict:
        rng = self.slot_rngs[slot]
        spawn = self.buffer.sample_spawn(rng, self.scn.initial_spawn)
        return {
            "spawn": spawn,
            "heading": rng.random() * 2.0 * math.pi,
            "t0": rng.random() * T0_SPAN,
            "seed": rng.getrandbits(63),
        }

    def step_hook(self, base: int):
        def hook(k: int) -> None:
            total = base + k
            while total >= self.next_mark:
                self.coverage.append(log_coverage(self.buffer, self.est, total, total * DT))
                self.next_mark += self.config.log_interval
        return hook

    def finish(self, result: EpisodeResult) -> None:
        self.steps += result.steps
        self.episodes += 1
        self.causes[result.cause] = self.causes.get(result.cause, 0) + 1
        sampled = result.sampled(SAMPLE_STRIDE)
        self.samples.append([p for _, p in sampled])
        for ev in result.events:
            if ev.boundary == EB_ID and ev.direction == EXIT:
                self.exits.append(ev.point)
            self.recorder.offer(ev, sampled)

    def close_log(self) -> None:
        last = self.coverage.rows[-1]
        if last[0] != self.steps or last[1] != len(self.buffer):
            self.coverage.append(log_coverage(self.buffer, self.est, self.steps, self.steps * DT))


def _run_inline(run: _Run) -> None:
    while run.steps < run.config.steps:
        run.set_epsilon()
        p = run.episode_params(0)
        result = run_episode(
            run.scn, run.policy, run.buffer, random.Random(p["seed"]),
            learn=True, episode_id=run.episodes, spawn=p["spawn"], heading=p["heading"], t0=p["t0"],
            on_step=run.step_hook(run.steps),
        )
        run.finish(result)


def _run_pool(run: _Run) -> None:
    cfg = run.config
    pending: dict[Future, int] = {}
    dispatched = 0
    with ProcessPoolExecutor(max_workers=cfg.workers, initializer=_worker_init, initargs=(run.scn,)) as pool:

        def dispatch(slot: int) -> None:
            nonlocal dispatched
            run.set_epsilon()
            task = run.episode_params(slot)
            task["episode"] = dispatched
            task["buffer"] = run.buffer.copy()
            task["policy"] = run.policy.snapshot() if isinstance(run.policy, TabularPolicy) else run.policy
            pending[pool.submit(_worker_episode, task)] = slot
            dispatched += 1

        for slot in range(cfg.workers):
            dispatch(slot)
        while pending:
            done, _ = wait(pending, return_when=FIRST_COMPLETED)
            for fut in sorted(done, key=lambda f: pending[f]):
                slot = pending.pop(fut)
                try:
                    remote = fut.result()
                except Exception as exc:
                    for other in pending:
                        other.cancel()
                    raise ExperimentError(f"worker {slot} failed: {type(exc).__name__}: {exc}") from exc
                result = replay_episode(remote, run.policy, run.buffer, on_step=run.step_hook(run.steps))
                run.finish(result)
                if run.steps < cfg.steps:
                    dispatch(slot)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run episodes until the step budget is consumed and write all artifacts."""
    scn = load_scenario(config.scenario)
    est = resolve_estimate(scn, config.estimated_max)
    run = _Run(config, scn, est)
    t_start = time.perf_counter()
    if config.workers == 1:
        _run_inline(run)
    else:
        _run_pool(run)
    run.close_log()
    wall = time.perf_counter() - t_start
    log.info("finished %d episodes, %d steps, %d points in %.1fs", run.episodes, run.steps, len(run.buffer), wall)
    result = ExperimentResult(
        config, run.buffer, run.policy, run.coverage, run.recorder, run.episodes, run.steps,
        run.causes, run.exits, run.samples, wall,
    )
    if config.out_dir is not None:
        result.artifacts = write_artifacts(result, Path(config.out_dir))
    return result


def write_artifacts(result: ExperimentResult, out: Path) -> dict[str, Path]:
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / fname for name, fname in (
        ("buffer", BUFFER_FILE), ("coverage", COVERAGE_FILE), ("outliers", OUTLIER_FILE),
        ("checkpoint", CHECKPOINT_FILE), ("edges", EDGES_FILE), ("graphml", GRAPHML_FILE),
        ("labels", LABELS_FILE), ("semantic", SEMANTIC_FILE), ("summary", SUMMARY_FILE),
    )}
    paths["trajectories"] = out / TRAJECTORY_DIR
    buf = result.buffer
    buf.export(paths["buffer"])
    result.coverage.write(paths["coverage"])
    result.recorder.write(paths["trajectories"])
    try:
        detect_stuck(buf).write(paths["outliers"], buf)
    except InsufficientData:
        paths["outliers"].write_text("# insufficient data\nindex,x,y,z,termination_count,score\n")
    result.policy.save(paths["checkpoint"])

    graph = build_graph(result.samples, buf)
    graph.write_edges(paths["edges"])
    graph.write_graphml(paths["graphml"])
    if len(buf):
        labels = cluster(buf)
        buf.export(paths["labels"], ("cluster", labels.labels))
        semantic_map(graph, labels, buf).write(paths["semantic"])
    else:
        buf.export(paths["labels"], ("cluster", []))
        paths["semantic"].write_text("")

    cfg = asdict(result.config)
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in cfg.items()}
    summary = {
        "config": cfg,
        "estimated_max": result.coverage.estimated_max,
        "episodes": result.episodes,
        "steps": result.steps,
        "points": len(buf),
        "coverage": result.coverage.final[2],
        "causes": result.causes,
        "recorded_trajectories": len(result.recorder.recorded),
        "unmapped_samples": graph.far_samples,
        "wall_seconds": result.wall_seconds,
        "cpu_count": os.cpu_count(),
    }
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths
