import json
import os
import time

import pytest
from scipy.spatial import cKDTree

from playcover import coordinator
from playcover.buffer import TAU, VisitBuffer
from playcover.coordinator import (
    CoverageLog,
    ExperimentConfig,
    ExperimentError,
    resolve_estimate,
    run_experiment,
)
from playcover.policy import EPISODE_STEPS
from playcover.world import DT, load_scenario


def check_invariants(res, workers):
    buf = res.buffer
    assert not cKDTree(buf.points).query_pairs(TAU)
    # every step observed exactly once, plus the spawn point of each episode
    assert sum(buf.counters) == buf.total_observations == res.steps + res.episodes
    assert sum(buf.termination_counters) == res.episodes
    assert sum(res.causes.values()) == res.episodes
    # each boundary exit ends its episode
    assert len(res.exits) == res.causes.get("left_EB", 0)
    b = res.config.steps
    assert b <= res.steps < b + workers * EPISODE_STEPS


def test_inline_smoke_logs_every_interval(tmp_path):
    cfg = ExperimentConfig("flat", policy="random", steps=30_000, log_interval=3_000, seed=3)
    res = run_experiment(cfg)
    marks = [r[0] for r in res.coverage.rows]
    assert marks[:11] == list(range(0, 30_001, 3_000))
    assert marks[-1] == res.steps
    check_invariants(res, 1)
    for steps, points, cov, secs in res.coverage.rows:
        assert secs == pytest.approx(steps * DT)
        assert cov == pytest.approx(min(1.0, points / res.coverage.estimated_max))


def test_inline_runs_are_deterministic(tmp_path):
    outs = []
    for k in range(2):
        cfg = ExperimentConfig("corridor", policy="curiosity", steps=20_000, log_interval=5_000, seed=11,
                               out_dir=tmp_path / f"r{k}")
        outs.append(run_experiment(cfg))
    a, b = (tmp_path / "r0", tmp_path / "r1")
    for name in ("buffer.csv", "coverage.csv", "policy.json", "graph.edges", "outliers.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert outs[0].causes == outs[1].causes


def test_seed_changes_the_run():
    a = run_experiment(ExperimentConfig("flat", policy="curiosity", steps=10_000, seed=1))
    b = run_experiment(ExperimentConfig("flat", policy="curiosity", steps=10_000, seed=2))
    assert list(a.buffer.rows()) != list(b.buffer.rows())


@pytest.mark.parametrize("workers", [2, 4, 8])
def test_pool_run_keeps_invariants(workers):
    res = run_experiment(ExperimentConfig("mesa", policy="curiosity", workers=workers, steps=6_000 * workers,
                                          log_interval=2_000, seed=5))
    check_invariants(res, workers)
    assert res.episodes >= workers
    assert [r[1] for r in res.coverage.rows] == sorted(r[1] for r in res.coverage.rows)


def crash(task):
    raise RuntimeError("simulated crash")


def test_worker_failure_surfaces(monkeypatch):
    monkeypatch.setattr(coordinator, "_worker_episode", crash)
    with pytest.raises(ExperimentError, match="simulated crash"):
        run_experiment(ExperimentConfig("flat", workers=2, steps=EPISODE_STEPS, seed=0))


@pytest.mark.parametrize("kwargs", [
    {"policy": "greedy"},
    {"workers": 0},
    {"steps": EPISODE_STEPS - 1},
    {"log_interval": 0},
    {"estimated_max": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig("flat", **kwargs)


def test_worker_seeds_are_stable_and_distinct():
    cfg = ExperimentConfig("flat", workers=4, seed=9)
    seeds = cfg.worker_seeds()
    assert seeds == ExperimentConfig("flat", workers=4, seed=9).worker_seeds()
    assert len(set(seeds)) == 4
    assert seeds[0] != ExperimentConfig("flat", workers=4, seed=10).worker_seeds()[0]


def test_coverage_log_roundtrip_and_monotone(tmp_path):
    log = CoverageLog(100, [(0, 0, 0.0, 0.0), (10, 3, 0.03, 0.2)])
    log.write(tmp_path / "c.csv")
    back = CoverageLog.read(tmp_path / "c.csv", 100)
    assert back.rows == log.rows and back.final == (10, 3, 0.03, 0.2)
    with pytest.raises(ValueError):
        log.append((20, 2, 0.02, 0.4))
    (tmp_path / "x.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        CoverageLog.read(tmp_path / "x.csv")


def test_final_row_is_points_over_estimate():
    res = run_experiment(ExperimentConfig("flat", policy="curiosity", steps=6_000, estimated_max=50))
    steps, points, cov, _ = res.coverage.final
    assert (steps, points) == (res.steps, len(res.buffer))
    assert cov == min(1.0, points / 50)


def test_resolve_estimate_prefers_override_then_fixture():
    scn = load_scenario("flat")
    assert resolve_estimate(scn, 7) == 7
    assert resolve_estimate(scn) == scn.estimated_max_points


def test_artifacts_written(tmp_path):
    res = run_experiment(ExperimentConfig("corridor", policy="curiosity", steps=15_000, seed=0, out_dir=tmp_path))
    for key, path in res.artifacts.items():
        assert path.exists(), key
    assert len(VisitBuffer.load(tmp_path / "buffer.csv")) == len(res.buffer)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["steps"] == res.steps and summary["points"] == len(res.buffer)
    assert sum(summary["causes"].values()) == res.episodes
    if res.recorder.recorded:
        assert any((tmp_path / "trajectories").iterdir())


@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs at least 4 cores to measure parallel speed-up")
def test_more_workers_finish_sooner():
    def wall(workers):
        t = time.perf_counter()
        run_experiment(ExperimentConfig("flat", policy="curiosity", workers=workers, steps=120_000, seed=0))
        return time.perf_counter() - t

    one, four = wall(1), wall(4)
    assert four < one / 1.5, (one, four)
