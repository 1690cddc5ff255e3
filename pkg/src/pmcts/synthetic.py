"""Reward trees with known optima, served through the model interface.

Leaves are indexed lexicographically by their 1-based branch path, so
path ``[i1, ..., id]`` maps to ``sum((i - 1) * b ** (d - 1 - pos))``.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import random
import re
from dataclasses import asdict, dataclass
from decimal import Decimal
from pathlib import Path

from .gateway import GenerationRequest, GenerationResponse
from .prompts import ANSWER_MARKER
from .search import MctsConfig, run_search

_BRANCH_RE = re.compile(r"take branch (\d+)")


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticTreeSpec:
    depth: int
    branching: int
    leaf_rewards: tuple[float, ...]
    seed: int = 0
    margin: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "leaf_rewards", tuple(float(r) for r in self.leaf_rewards))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.depth, int) or self.depth < 1:
            raise SpecError(f"depth must be a positive integer, got {self.depth!r}")
        if not isinstance(self.branching, int) or self.branching < 1:
            raise SpecError(f"branching must be a positive integer, got {self.branching!r}")
        n = self.branching**self.depth
        if len(self.leaf_rewards) != n:
            raise SpecError(f"expected {n} leaf rewards, got {len(self.leaf_rewards)}")
        bad = [r for r in self.leaf_rewards if not 0.0 <= r <= 1.0]
        if bad:
            raise SpecError(f"leaf rewards outside [0, 1]: {bad[:3]}")
        if self.margin is not None:
            ranked = sorted(self.leaf_rewards, reverse=True)
            gap = ranked[0] - ranked[1] if len(ranked) > 1 else 1.0
            if gap < self.margin - 1e-9:
                raise SpecError(f"optimum margin {gap:.4f} below required {self.margin}")

    @property
    def problem_text(self) -> str:
        return (
            f"Synthetic tree with depth {self.depth} and branching {self.branching} "
            f"(seed {self.seed}): reach the best leaf."
        )

    def leaf_index(self, path: list[int]) -> int:
        idx = 0
        for i in path:
            idx = idx * self.branching + (i - 1)
        return idx

    def reward(self, path: list[int]) -> float:
        if len(path) != self.depth or not all(1 <= i <= self.branching for i in path):
            raise SpecError(f"{path} is not a leaf path")
        return self.leaf_rewards[self.leaf_index(path)]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def random_spec(depth: int, branching: int, seed: int, margin: float = 0.2) -> SyntheticTreeSpec:
    """Seeded rewards with a single optimum exactly ``margin`` above the rest."""
    rng = random.Random(seed)
    n = branching**depth
    rewards = [round(rng.uniform(0.0, 1.0 - margin), 6) for _ in range(n)]
    if n > 1:
        best = rng.randrange(n)
        others = rewards[:best] + rewards[best + 1 :]
        rewards[best] = min(1.0, round(max(others) + margin, 6))
    return SyntheticTreeSpec(depth, branching, tuple(rewards), seed, margin if n > 1 else None)


def load_spec(path: str | Path) -> SyntheticTreeSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return SyntheticTreeSpec(
            depth=raw["depth"],
            branching=raw["branching"],
            leaf_rewards=raw["leaf_rewards"],
            seed=raw.get("seed", 0),
            margin=raw.get("margin"),
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise SpecError(f"{path}: {exc}") from exc


def known_optimum(spec: SyntheticTreeSpec) -> tuple[list[int], float]:
    best_path, best = None, -1.0
    for path in itertools.product(range(1, spec.branching + 1), repeat=spec.depth):
        r = spec.leaf_rewards[spec.leaf_index(list(path))]
        if r > best:
            best_path, best = list(path), r
    return best_path, best


def answer_for(path: list[int]) -> str:
    return "-".join(map(str, path))


def reward_text(x: float) -> str:
    # positional notation only: an exponent would fool the value parser
    return f"{Decimal(repr(x)):f}"


class SyntheticModel:
    """Model handle driven by a reward tree instead of a language model.

    Understands the built-in propose, value and chain-of-thought prompts:
    proposals list every branch, the last level carries the answer marker,
    and value requests are answered with the reached leaf's reward.
    """

    def __init__(self, spec: SyntheticTreeSpec, name: str = "synthetic"):
        spec.validate()
        self.spec = spec
        self.name = name
        self.calls = 0

    def generate(self, request: GenerationRequest) -> GenerationResponse:
        self.calls += 1
        prompt = request.prompt
        path = [int(m) for m in _BRANCH_RE.findall(prompt)]
        if "Proposed answer:" in prompt:
            return GenerationResponse(reward_text(self.spec.reward(path)))
        if "Propose " in prompt:
            if len(path) >= self.spec.depth:
                return GenerationResponse("")
            lines = []
            for i in range(1, self.spec.branching + 1):
                step = f"take branch {i}"
                if len(path) + 1 == self.spec.depth:
                    step += f". {ANSWER_MARKER} {answer_for(path + [i])}"
                lines.append(f"{i}. {step}")
            return GenerationResponse("\n".join(lines))
        # chain-of-thought fallback walks the first branches
        return GenerationResponse(f"{ANSWER_MARKER} {answer_for([1] * self.spec.depth)}")


def as_scripted_model(spec: SyntheticTreeSpec) -> SyntheticModel:
    return SyntheticModel(spec)


def path_from_steps(steps: list[str]) -> list[int]:
    return [int(m) for s in steps for m in _BRANCH_RE.findall(s)]


@dataclass
class BenchRow:
    variant: str
    runs: int
    root_hits: int
    leaf_hits: int
    total_regret: float

    @property
    def root_hit_rate(self) -> float:
        return self.root_hits / self.runs

    @property
    def leaf_hit_rate(self) -> float:
        return self.leaf_hits / self.runs

    @property
    def mean_regret(self) -> float:
        return self.total_regret / self.runs


def convergence_run(spec: SyntheticTreeSpec, config: MctsConfig) -> tuple[bool, bool, float]:
    """One search on ``spec``: (root action optimal, leaf optimal, regret)."""
    best_path, best = known_optimum(spec)
    result = run_search(spec.problem_text, config, SyntheticModel(spec))
    path = path_from_steps(result.steps)
    reached = spec.reward(path) if len(path) == spec.depth else 0.0
    return path[:1] == best_path[:1], path == best_path, best - reached


def benchmark(
    config: MctsConfig,
    runs: int,
    *,
    spec: SyntheticTreeSpec | None = None,
    depth: int = 3,
    branching: int = 3,
    margin: float = 0.2,
) -> list[BenchRow]:
    """Dynamic-c (``config`` as given) against fixed-c (kappa = 0).

    Run ``i`` searches with seed ``config.seed + i``; without a fixed
    ``spec`` it also draws a fresh tree from that seed.
    """
    rows = []
    for variant, kappa in (("dynamic-c", config.kappa), ("fixed-c", 0.0)):
        row = BenchRow(variant, runs, 0, 0, 0.0)
        for i in range(runs):
            seed = config.seed + i
            tree = spec if spec is not None else random_spec(depth, branching, seed, margin)
            cfg = dataclasses.replace(
                config, kappa=kappa, seed=seed, expand_width=max(config.expand_width, tree.branching)
            )
            root_ok, leaf_ok, regret = convergence_run(tree, cfg)
            row.root_hits += root_ok
            row.leaf_hits += leaf_ok
            row.total_regret += regret
        rows.append(row)
    return rows


def format_bench(rows: list[BenchRow]) -> str:
    lines = ["variant,runs,root_hit_rate,leaf_hit_rate,mean_regret"]
    for r in rows:
        lines.append(
            f"{r.variant},{r.runs},{r.root_hit_rate:.4f},{r.leaf_hit_rate:.4f},{r.mean_regret:.4f}"
        )
    return "\n".join(lines) + "\n"
