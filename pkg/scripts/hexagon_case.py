#!/usr/bin/env python
"""Replay the hexagon interior-angle walkthrough and print the tree."""

import argparse

from pmcts.scenarios import HEXAGON_QUESTION, hexagon_model
from pmcts.search import MctsConfig, MctsSearch

ap = argparse.ArgumentParser()
ap.add_argument("--iterations", type=int, default=4)
args = ap.parse_args()

search = MctsSearch(HEXAGON_QUESTION, MctsConfig(iterations=args.iterations), hexagon_model())
result = search.run()


def show(node_id):
    node = search.tree[node_id]
    q = f"{node.q:.3f}" if node.visits else "  -  "
    print(f"{'  ' * node.depth}[{node.id}] N={node.visits} Q={q} {node.step or HEXAGON_QUESTION}")
    for child in node.children:
        show(child)


show(0)
print(f"\nanswer: {result.answer}")
