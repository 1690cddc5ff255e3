"""Improved MCTS controller.

Each iteration descends with UCT to a leaf (exploration weights shrink as
nodes accumulate visits), expands a non-terminal leaf into up to ``k``
model proposals, rolls out from the first new child under a policy picked
by problem length, scores the outcome with the model and backpropagates.
"""

from __future__ import annotations

import enum
import json
import logging
import math
import random
from collections import Counter
from dataclasses import asdict, dataclass
from functools import partial
from typing import Callable, Sequence

from . import prompts
from .gateway import GenerationRequest, Model, ProtocolError, TransportError
from .prompts import AnswerExtractionError, StepParseError, ValueParseError
from .tree import NoSolutionError, ReasoningState, SearchTree, clamp_reward

logger = logging.getLogger(__name__)


class SearchAborted(Exception):
    """The model backend failed for good; ``trace`` holds the partial tree."""

    def __init__(self, message: str, trace: str):
        super().__init__(message)
        self.trace = trace


class SimulationPolicy(str, enum.Enum):
    GREEDY = "greedy"
    RANDOM = "random"


@dataclass
class MctsConfig:
    c0: float = 1.414
    kappa: float = 0.5
    complexity_threshold: int = 60
    iterations: int = 32
    expand_width: int = 3
    max_depth: int = 8
    rollout_temperature: float = 0.7
    seed: int = 0
    # False flips the gate: greedy rollouts for short problems instead
    greedy_when_complex: bool = True
    # measure complexity on problem + chain instead of the bare problem
    per_node_complexity: bool = False
    max_tokens: int = 512
    # "child": each child's exploration weight decays with its own visits;
    # "parent": one weight per selection, from the parent's visits
    decay_by: str = "child"

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("c0 must be > 0")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        for name in ("complexity_threshold", "iterations", "expand_width", "max_depth", "max_tokens"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.rollout_temperature < 0:
            raise ValueError("rollout_temperature must be >= 0")
        if self.decay_by not in ("child", "parent"):
            raise ValueError(f"decay_by must be 'child' or 'parent', got {self.decay_by!r}")


@dataclass
class SearchResult:
    answer: str
    steps: list[str]
    root_visits: int
    best_q: float
    policy_counts: dict[str, int]
    trace: str
    fallback: bool = False
    warnings: int = 0

    def to_json(self) -> str:
        d = asdict(self)
        d.pop("trace")
        return json.dumps(d, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def dynamic_exploration(c0: float, kappa: float, visits: int) -> float:
    """Exploration weight after ``visits`` visits: c0 / (1 + kappa * ln(1 + N))."""
    return c0 / (1.0 + kappa * math.log1p(visits))


def complexity(problem_text: str) -> int:
    return len(problem_text.split())


def choose_simulation_policy(config: MctsConfig, node_state: ReasoningState) -> SimulationPolicy:
    text = node_state.problem_text
    if config.per_node_complexity:
        text = " ".join((text, *node_state.steps))
    complex_ = complexity(text) >= config.complexity_threshold
    if complex_ == config.greedy_when_complex:
        return SimulationPolicy.GREEDY
    return SimulationPolicy.RANDOM


def cot_answer(
    problem: str,
    model: Model,
    options: Sequence[str] | None = None,
    *,
    max_tokens: int = 512,
    seed_tag: str = "cot",
) -> str:
    """Zero-shot chain-of-thought: one prompt, then answer extraction."""
    req = prompts.render_cot(
        problem, options, model_name=model.name, max_tokens=max_tokens, seed_tag=seed_tag
    )
    return prompts.extract_answer(model.generate(req).content, options)


class MctsSearch:
    def __init__(
        self,
        problem: str,
        config: MctsConfig,
        model: Model,
        options: Sequence[str] | None = None,
    ):
        self.problem = problem
        self.config = config
        self.model = model
        self.options = list(options) if options else None
        self.tree = SearchTree(problem, rng_seed=config.seed)
        self.rng = random.Random(config.seed)
        self.policy_counts: Counter[str] = Counter()
        self.warnings = 0
        self._terminal_values: dict[int, float] = {}
        self._iteration = 0

    def _call(self, req: GenerationRequest) -> str:
        return self.model.generate(req).content

    def _terminal_answer(self, step: str) -> str | None:
        if not prompts.has_answer_marker(step):
            return None
        try:
            return prompts.extract_answer(step, self.options)
        except AnswerExtractionError:
            return None

    def _propose(self, state: ReasoningState, k: int, temperature: float, seed_tag: str) -> list[str]:
        req = prompts.render_propose_steps(
            self.problem,
            state.steps,
            k,
            model_name=self.model.name,
            temperature=temperature,
            max_tokens=self.config.max_tokens,
            seed_tag=seed_tag,
        )
        steps = prompts.parse_step_list(self._call(req), k)
        seen, unique = set(), []
        for s in steps:
            key = prompts.normalize_step(s)
            if key not in seen:
                seen.add(key)
                unique.append(s)
        return unique

    def _score(self, state: ReasoningState) -> float:
        req = prompts.render_value_score(
            self.problem,
            state.steps,
            state.answer or "",
            model_name=self.model.name,
            max_tokens=self.config.max_tokens,
            seed_tag="value",
        )
        try:
            return prompts.parse_value(self._call(req))
        except ValueParseError:
            self.warnings += 1
            logger.warning("unparseable value reply; scoring 0")
            return 0.0

    def terminal_reward(self, node_id: int) -> float:
        if node_id not in self._terminal_values:
            self._terminal_values[node_id] = self._score(self.tree[node_id].state)
        return self._terminal_values[node_id]

    def expand(self, node_id: int) -> list[int]:
        cfg = self.config
        node = self.tree[node_id]
        try:
            steps = self._propose(
                node.state, cfg.expand_width, cfg.rollout_temperature, f"s{cfg.seed}/expand"
            )
        except StepParseError:
            self.warnings += 1
            logger.warning("expansion of node %d produced no steps", node_id)
            return []
        children = []
        for step in steps:
            answer = self._terminal_answer(step)
            children.append(self.tree.add_child(node_id, step, answer is not None, answer))
        return children

    def simulate(self, node_id: int, policy: SimulationPolicy) -> tuple[ReasoningState, float]:
        cfg = self.config
        node = self.tree[node_id]
        if node.terminal:
            raise ValueError("cannot roll out from a terminal node")
        state, depth = node.state, node.depth
        while depth < cfg.max_depth:
            try:
                if policy is SimulationPolicy.GREEDY:
                    step = self._propose(state, 1, 0.0, "greedy")[0]
                else:
                    tag = f"s{cfg.seed}/i{self._iteration}/d{depth}"
                    candidates = self._propose(state, cfg.expand_width, cfg.rollout_temperature, tag)
                    step = self.rng.choice(candidates)
            except StepParseError:
                self.warnings += 1
                break
            depth += 1
            answer = self._terminal_answer(step)
            state = state.extend(step, answer)
            if answer is not None:
                return state, self._score(state)
        return state, 0.0

    def exploration_weight(self, parent_id: int) -> float | Callable[[int], float]:
        cfg = self.config
        if cfg.decay_by == "parent":
            return dynamic_exploration(cfg.c0, cfg.kappa, self.tree[parent_id].visits)
        return partial(dynamic_exploration, cfg.c0, cfg.kappa)

    def iterate(self) -> None:
        cfg, tree = self.config, self.tree
        node_id = tree.root
        while tree[node_id].children:
            node_id = tree.select_best_child(node_id, self.exploration_weight(node_id))

        node = tree[node_id]
        if not node.terminal:
            if node.depth >= cfg.max_depth or not self.expand(node_id):
                tree.backpropagate(node_id, 0.0)
                return
            # all new children are unvisited, so this picks the first one
            node_id = tree.select_best_child(node_id, self.exploration_weight(node_id))
            node = tree[node_id]

        if node.terminal:
            reward = self.terminal_reward(node_id)
        else:
            policy = choose_simulation_policy(cfg, node.state)
            self.policy_counts[policy.value] += 1
            _, reward = self.simulate(node_id, policy)
        tree.backpropagate(node_id, clamp_reward(reward))

    def run(self) -> SearchResult:
        try:
            for self._iteration in range(self.config.iterations):
                self.iterate()
        except (TransportError, ProtocolError) as exc:
            raise SearchAborted(f"search aborted: {exc}", self.tree.export_trace()) from exc

        fallback = False
        try:
            steps, answer, best_q = self.tree.best_terminal_chain()
        except NoSolutionError:
            fallback, steps, best_q = True, [], 0.0
            try:
                answer = cot_answer(
                    self.problem, self.model, self.options, max_tokens=self.config.max_tokens
                )
            except AnswerExtractionError:
                self.warnings += 1
                answer = ""
            except (TransportError, ProtocolError) as exc:
                raise SearchAborted(f"fallback failed: {exc}", self.tree.export_trace()) from exc
        return SearchResult(
            answer=answer,
            steps=steps,
            root_visits=self.tree[self.tree.root].visits,
            best_q=best_q,
            policy_counts=dict(sorted(self.policy_counts.items())),
            trace=self.tree.export_trace(),
            fallback=fallback,
            warnings=self.warnings,
        )


def run_search(
    problem: str,
    config: MctsConfig,
    model: Model,
    options: Sequence[str] | None = None,
) -> SearchResult:
    return MctsSearch(problem, config, model, options).run()
