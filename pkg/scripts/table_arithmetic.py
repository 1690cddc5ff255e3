#!/usr/bin/env python
"""Recompute the macro average of per-subset accuracies from counts."""

from pmcts.evaluation import aggregate_report

COUNTS = {"part1": (533, 1000), "part2": (827, 1000), "part3": (677, 1000), "part4": (734, 1250)}

results = [(part, i < correct) for part, (correct, total) in COUNTS.items() for i in range(total)]
report = aggregate_report(results, strategy="improved-mcts", model_name="glm-4-flash")
print(report.summary_csv(), end="")
print(f"full precision macro: {report.macro_average}")
