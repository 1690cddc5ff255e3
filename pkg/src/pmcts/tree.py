"""Search tree storage, UCT scoring and statistics backpropagation.

Nodes live in a flat list and are addressed by their index, so iteration
order (and therefore every tie-break) is the insertion order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable


class TreeError(Exception):
    """Structural problem with the tree (missing node, no children)."""


class IllegalExpansionError(TreeError):
    pass


class NoSolutionError(TreeError):
    """No visited terminal node exists in the tree."""


@dataclass(frozen=True)
class ReasoningState:
    problem_text: str
    steps: tuple[str, ...] = ()
    answer: str | None = None

    def extend(self, step: str, answer: str | None = None) -> ReasoningState:
        return ReasoningState(self.problem_text, self.steps + (step,), answer)


@dataclass
class Node:
    id: int
    parent: int | None
    state: ReasoningState
    depth: int = 0
    terminal: bool = False
    children: list[int] = field(default_factory=list)
    visits: int = 0
    value_sum: float = 0.0

    @property
    def q(self) -> float:
        if self.visits < 1:
            raise ValueError(f"node {self.id} has no visits; mean value undefined")
        return self.value_sum / self.visits

    @property
    def step(self) -> str:
        return self.state.steps[-1] if self.state.steps else ""


class SearchTree:
    def __init__(self, problem_text: str, rng_seed: int = 0):
        self.rng_seed = rng_seed
        self.nodes: list[Node] = [Node(id=0, parent=None, state=ReasoningState(problem_text))]

    root = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, node_id: int) -> Node:
        if not isinstance(node_id, int) or not 0 <= node_id < len(self.nodes):
            raise TreeError(f"no node with id {node_id!r}")
        return self.nodes[node_id]

    def add_child(
        self, parent: int, step: str, terminal: bool = False, answer: str | None = None
    ) -> int:
        p = self[parent]
        if p.terminal:
            raise IllegalExpansionError(f"node {parent} is terminal and cannot be expanded")
        if terminal != bool(answer):
            raise ValueError("a child carries an answer iff it is terminal")
        node = Node(
            id=len(self.nodes),
            parent=parent,
            state=p.state.extend(step, answer),
            depth=p.depth + 1,
            terminal=terminal,
        )
        self.nodes.append(node)
        p.children.append(node.id)
        return node.id

    def path_to_root(self, node_id: int) -> list[int]:
        path = []
        cur: int | None = self[node_id].id
        while cur is not None:
            path.append(cur)
            cur = self.nodes[cur].parent
        return path

    def select_best_child(self, parent: int, c: float | Callable[[int], float]) -> int:
        """Child with the highest UCT score; ties go to the earliest child.

        ``c`` is either a fixed exploration weight or a function of the
        child's own visit count.
        """
        p = self[parent]
        if not p.children:
            raise TreeError(f"node {parent} has no children to select from")
        best, best_score = p.children[0], -math.inf
        for cid in p.children:
            child = self.nodes[cid]
            q = child.value_sum / child.visits if child.visits else 0.0
            weight = c(child.visits) if callable(c) else c
            score = uct_score(q, child.visits, max(p.visits, 1), weight)
            # strict comparison keeps the first maximal child
            if score > best_score:
                best, best_score = cid, score
        return best

    def backpropagate(self, leaf: int, reward: float) -> None:
        if not 0.0 <= reward <= 1.0:
            raise ValueError(f"reward {reward} outside [0, 1]")
        for nid in self.path_to_root(leaf):
            node = self.nodes[nid]
            node.visits += 1
            node.value_sum += reward

    def best_terminal_chain(self) -> tuple[list[str], str, float]:
        candidates = [n for n in self.nodes if n.terminal and n.visits >= 1]
        if not candidates:
            raise NoSolutionError("no visited terminal node")
        best = max(candidates, key=lambda n: (n.q, n.visits, -n.id))
        return list(best.state.steps), best.state.answer or "", best.q

    def export_trace(self) -> str:
        """One JSON record per node, in id order."""
        lines = []
        for n in self.nodes:
            rec = {
                "id": n.id,
                "parent": n.parent,
                "depth": n.depth,
                "step": n.step,
                "N": n.visits,
                "W": n.value_sum,
                "terminal": n.terminal,
                "answer": n.state.answer,
            }
            lines.append(json.dumps(rec, ensure_ascii=False, sort_keys=True))
        return "\n".join(lines) + "\n"


def uct_score(q: float, n_child: int, n_parent: int, c: float) -> float:
    """Q + c * sqrt(ln(N_parent) / n_child); unvisited children score +inf."""
    if n_parent < 1:
        raise ValueError("parent visit count must be >= 1")
    if n_child < 0 or c < 0:
        raise ValueError("n_child and c must be non-negative")
    if n_child == 0:
        return math.inf
    if c == 0:
        return q
    return q + c * math.sqrt(math.log(n_parent) / n_child)


def clamp_reward(x: float) -> float:
    return min(1.0, max(0.0, x))


def load_trace(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]
