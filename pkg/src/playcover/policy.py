"""Exploration policies and the episode runner.

Both the uniform random baseline and the tabular learner act on the same
54-action grid and go through the same :func:`run_episode` code path.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .agent_io import build_observation
from .buffer import VisitBuffer
from .diagnostics import EB_ID, ENTER, EXIT, BoundaryEvent, crossing_point
from .world import DT, ActionCommand, CharacterState, Scenario, advance, compiled

EPISODE_STEPS = 3000
GAMMA = 0.98
ALPHA = 0.1
EPS_START = 1.0
EPS_END = 0.1
EPS_DECAY_FRACTION = 0.2
SAMPLE_STRIDE = 25

# Value orderings per component; index = ((f * 3 + t) * 3 + s) * 2 + j over these.
# Index 0 (what an unseen state picks greedily) is "walk forward and jump".
FORWARD_VALUES = (1, 0, -1)
TURN_VALUES = (0, -1, 1)
STRAFE_VALUES = (0, -1, 1)
JUMP_VALUES = (1, 0)

ACTIONS: tuple[tuple[int, int, int, int], ...] = tuple(
    itertools.product(FORWARD_VALUES, TURN_VALUES, STRAFE_VALUES, JUMP_VALUES)
)
N_ACTIONS = len(ACTIONS)
_ACTION_INDEX = {a: i for i, a in enumerate(ACTIONS)}

TIME_UP, LEFT_EB, FROZEN = "time_up", "left_EB", "frozen"

StateKey = tuple[int, int, int]


def action_command(index: int) -> ActionCommand:
    f, t, s, j = ACTIONS[index]
    return ActionCommand(float(f), float(t), float(s), j)


def action_index(forward: int, turn: int, strafe: int, jump: int) -> int:
    return _ACTION_INDEX[(forward, turn, strafe, jump)]


def heading_octant(heading: float) -> int:
    return int(heading / (math.pi / 4.0)) % 8


def state_key(point_index: int, state: CharacterState) -> StateKey:
    return (point_index, heading_octant(state.heading), 1 if state.ground_contact else 0)


class Policy(Protocol):
    learns: bool
    needs_observation: bool

    def act(self, key: StateKey, rng: random.Random, observation: list[float] | None = None) -> int: ...


class RandomPolicy:
    """Uniform draw over the action grid every step."""

    learns = False
    needs_observation = False

    def act(self, key: StateKey, rng: random.Random, observation: list[float] | None = None) -> int:
        return rng.randrange(N_ACTIONS)

    def update(self, s: StateKey, a: int, r: float, s2: StateKey, terminal: bool = False) -> None:
        pass

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"format": "playcover.random", "version": 1, "n_actions": N_ACTIONS}))


def act_random(rng: random.Random) -> ActionCommand:
    return action_command(rng.randrange(N_ACTIONS))


def epsilon_at(steps_done: int, total_steps: int) -> float:
    """Linear decay from EPS_START to EPS_END over the first 20% of training."""
    horizon = EPS_DECAY_FRACTION * total_steps
    if horizon <= 0:
        return EPS_END
    u = min(1.0, steps_done / horizon)
    return EPS_START + (EPS_END - EPS_START) * u


@dataclass
class TabularPolicy:
    """One-step Q-learning over (buffer point, heading octant, ground) keys."""

    gamma: float = GAMMA
    alpha: float = ALPHA
    epsilon: float = EPS_START
    q: dict[StateKey, list[float]] = field(default_factory=dict)

    learns = True
    needs_observation = False

    def row(self, key: StateKey) -> list[float]:
        return self.q.get(key) or [0.0] * N_ACTIONS

    def act(self, key: StateKey, rng: random.Random, observation: list[float] | None = None) -> int:
        return act_greedy(self, key, rng)

    def update(self, s: StateKey, a: int, r: float, s2: StateKey, terminal: bool = False) -> None:
        if not math.isfinite(r):
            raise ValueError("reward must be finite")
        row = self.q.get(s)
        if row is None:
            row = self.q[s] = [0.0] * N_ACTIONS
        target = r
        if not terminal:
            nxt = self.q.get(s2)
            if nxt is not None:
                target += self.gamma * max(nxt)
        row[a] += self.alpha * (target - row[a])

    def snapshot(self) -> TabularPolicy:
        return TabularPolicy(self.gamma, self.alpha, self.epsilon, {k: list(v) for k, v in self.q.items()})

    # checkpoint: JSON, floats written with repr precision so reloads are exact
    def save(self, path: str | Path) -> None:
        doc = {
            "format": "playcover.qtable",
            "version": 1,
            "n_actions": N_ACTIONS,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "table": [[*k, v] for k, v in sorted(self.q.items())],
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path: str | Path) -> TabularPolicy:
        doc = json.loads(Path(path).read_text())
        if doc.get("format") != "playcover.qtable" or doc.get("version") != 1:
            raise ValueError(f"{path}: unsupported checkpoint")
        if doc["n_actions"] != N_ACTIONS:
            raise ValueError(f"{path}: action count mismatch")
        q = {(int(i), int(o), int(g)): [float(x) for x in v] for i, o, g, v in doc["table"]}
        return cls(doc["gamma"], doc["alpha"], doc["epsilon"], q)


def load_policy(path: str | Path) -> RandomPolicy | TabularPolicy:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") == "playcover.random":
        return RandomPolicy()
    return TabularPolicy.load(path)


def act_greedy(policy: TabularPolicy, key: StateKey, rng: random.Random) -> int:
    if policy.epsilon > 0.0 and rng.random() < policy.epsilon:
        return rng.randrange(N_ACTIONS)
    row = policy.q.get(key)
    if row is None:
        return 0
    return row.index(max(row))


def update(policy: TabularPolicy, s: StateKey, a: int, r: float, s2: StateKey, terminal: bool = False) -> TabularPolicy:
    policy.update(s, a, r, s2, terminal)
    return policy


@dataclass
class EpisodeResult:
    trajectory: list[tuple[int, tuple[float, float, float]]]
    total_reward: float
    cause: str
    events: list[BoundaryEvent] = field(default_factory=list)
    steps: int = 0
    termination_index: int = -1
    # per-step (octant, ground, action) for replay by a central owner
    transitions: list[tuple[int, int, int]] | None = None
    spawn_octant: int = 0

    def sampled(self, stride: int = SAMPLE_STRIDE) -> list[tuple[int, tuple[float, float, float]]]:
        """Every ``stride``-th sample plus the last one and any crossing steps."""
        keep = {e.step for e in self.events}
        last = len(self.trajectory) - 1
        return [
            (s, p) for k, (s, p) in enumerate(self.trajectory)
            if s % stride == 0 or s in keep or k == last
        ]


def run_episode(
    scenario: Scenario,
    policy: Policy,
    buffer: VisitBuffer,
    rng: random.Random,
    *,
    learn: bool = True,
    max_steps: int = EPISODE_STEPS,
    episode_id: int = 0,
    spawn: tuple[float, float, float] | None = None,
    heading: float | None = None,
    t0: float | None = None,
    script: list[int] | None = None,
    keep_transitions: bool = False,
    on_step: Callable[[int], None] | None = None,
) -> EpisodeResult:
    """Simulate one episode, feeding every visited position to ``buffer``.

    ``script`` replaces the policy's choices with a fixed action-index list
    (repeating its last entry); the policy is still updated when learning.
    ``on_step`` is called with the step number after each step is applied.
    """
    cw = compiled(scenario)
    if spawn is None:
        spawn = buffer.sample_spawn(rng, scenario.initial_spawn)
    if heading is None:
        heading = rng.random() * 2.0 * math.pi
    if t0 is None:
        t0 = 0.0
    state = CharacterState(position=tuple(float(c) for c in spawn), heading=heading)  # type: ignore[arg-type]

    eb = scenario.exploration_boundary
    ebx0, eby0, ebz0 = eb.min
    ebx1, eby1, ebz1 = eb.max
    rois = [(r.name, r.box) for r in scenario.rois]
    roi_inside = [r[1].contains(state.position) for r in rois]

    pos = state.position
    idx, _, _ = buffer.observe(pos, state.ground_contact)
    key = (idx, heading_octant(state.heading), 0)
    trajectory = [(0, pos)]
    transitions: list[tuple[int, int, int]] | None = [] if keep_transitions else None
    events: list[BoundaryEvent] = []
    total = 0.0
    cause = TIME_UP
    do_learn = learn and policy.learns
    want_obs = policy.needs_observation
    observe = buffer.observe
    act = policy.act
    actions = ACTIONS
    n_script = len(script) if script else 0
    k = 0
    for k in range(1, max_steps + 1):
        if n_script:
            a = script[k - 1] if k <= n_script else script[-1]
        else:
            obs = build_observation(scenario, state, t0 + (k - 1) * DT) if want_obs else None
            a = act(key, rng, obs)
        f, tu, s, j = actions[a]
        prev = pos
        state = advance(cw, state, f, tu, s, j, t0 + (k - 1) * DT)
        pos = state.position
        grounded = state.ground_contact
        idx, _, r = observe(pos, grounded)
        total += r
        h = state.heading
        octant = int(h / 0.7853981633974483) % 8
        key2 = (idx, octant, 1 if grounded else 0)
        trajectory.append((k, pos))
        if transitions is not None:
            transitions.append((octant, key2[2], a))

        terminal = False
        x, y, z = pos
        if not (ebx0 <= x <= ebx1 and eby0 <= y <= eby1 and ebz0 <= z <= ebz1):
            events.append(BoundaryEvent(EB_ID, crossing_point(eb, prev, pos, EXIT), EXIT, episode_id, k))
            cause = LEFT_EB
            terminal = True
        for n, (name, box) in enumerate(rois):
            inside = box.contains(pos)
            if inside != roi_inside[n]:
                d = ENTER if inside else EXIT
                events.append(BoundaryEvent(name, crossing_point(box, prev, pos, d), d, episode_id, k))
                roi_inside[n] = inside
        if state.frozen:
            cause = FROZEN
            terminal = True
        if do_learn:
            policy.update(key, a, r, key2, terminal)  # type: ignore[attr-defined]
        key = key2
        if on_step is not None:
            on_step(k)
        if terminal:
            break

    term_idx = buffer.record_termination(pos, state.ground_contact)
    return EpisodeResult(trajectory, total, cause, events, k, term_idx, transitions, heading_octant(heading))


def replay_episode(
    result: EpisodeResult,
    policy: Policy,
    buffer: VisitBuffer,
    *,
    learn: bool = True,
    on_step: Callable[[int], None] | None = None,
) -> EpisodeResult:
    """Apply an episode simulated elsewhere to ``buffer`` and ``policy``.

    Performs the same observe / update / record_termination sequence that
    :func:`run_episode` performs live, so rewards come from this buffer's
    counters rather than the ones the simulating worker saw.
    """
    if result.transitions is None or len(result.transitions) != len(result.trajectory) - 1:
        raise ValueError("episode result carries no per-step transitions")
    do_learn = learn and policy.learns
    observe = buffer.observe
    traj = result.trajectory
    idx, _, _ = observe(traj[0][1], False)
    key = (idx, result.spawn_octant, 0)
    total = 0.0
    n = len(result.transitions)
    grounded = False
    pos = traj[0][1]
    for k, (octant, ground, a) in enumerate(result.transitions, start=1):
        pos = traj[k][1]
        grounded = ground == 1
        idx, _, r = observe(pos, grounded)
        total += r
        key2 = (idx, octant, ground)
        if do_learn:
            policy.update(key, a, r, key2, k == n and result.cause != TIME_UP)  # type: ignore[attr-defined]
        key = key2
        if on_step is not None:
            on_step(k)
    term_idx = buffer.record_termination(pos, grounded)
    return EpisodeResult(traj, total, result.cause, result.events, result.steps, term_idx,
                         result.transitions, result.spawn_octant)
