"""Dataset ingestion, per-task strategy runs, scoring and reports."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import string
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .gateway import Model
from .prompts import LABELS, AnswerExtractionError, format_problem
from .search import MctsConfig, cot_answer, run_search

STRATEGIES = ("improved-mcts", "cot")


class DatasetError(ValueError):
    def __init__(self, path: str | Path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class TaskRecord:
    id: str
    question: str
    gold: str
    part: str
    options: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.gold.strip():
            raise ValueError("gold answer must be non-empty")
        if self.options is not None and option_label(self.gold, self.options) is None:
            raise ValueError(f"gold {self.gold!r} matches no option label or text")


@dataclass
class PartScore:
    correct: int
    total: int

    @property
    def exact(self) -> Fraction:
        return Fraction(100 * self.correct, self.total)

    @property
    def accuracy(self) -> float:
        return float(self.exact)


@dataclass
class TaskOutcome:
    id: str
    part: str
    predicted: str
    correct: bool
    flagged: bool = False


@dataclass
class RunReport:
    per_part: dict[str, PartScore]
    strategy: str = ""
    model_name: str = ""
    wall_time_s: float = 0.0
    flagged: list[str] = field(default_factory=list)

    @property
    def macro_exact(self) -> Fraction:
        return sum((p.exact for p in self.per_part.values()), Fraction(0)) / len(self.per_part)

    @property
    def macro_average(self) -> float:
        return float(self.macro_exact)

    @property
    def total(self) -> int:
        return sum(p.total for p in self.per_part.values())

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "strategy": self.strategy,
            "model_name": self.model_name,
            "per_part": {
                name: {"correct": p.correct, "total": p.total, "accuracy": round2(p.exact)}
                for name, p in self.per_part.items()
            },
            "macro_average": round2(self.macro_exact),
            "macro_average_full": self.macro_average,
            "flagged": list(self.flagged),
        }
        if timing:
            d["wall_time_s"] = round(self.wall_time_s, 3)
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, ensure_ascii=False) + "\n"

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["part", "correct", "total", "accuracy"])
        for name, p in self.per_part.items():
            w.writerow([name, p.correct, p.total, f"{round2(p.exact):.2f}"])
        w.writerow(["macro", "", self.total, f"{round2(self.macro_exact):.2f}"])
        return buf.getvalue()


def round2(x: Fraction | float) -> float:
    """Half-up rounding to two decimals, computed on the exact value."""
    d = Decimal(x.numerator) / Decimal(x.denominator) if isinstance(x, Fraction) else Decimal(repr(x))
    return float(d.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def option_label(text: str, options: Sequence[str]) -> str | None:
    """Label of the option named by ``text`` (as a letter or by its text)."""
    norm = _normalize(text)
    labels = LABELS[: len(options)]
    if len(norm) == 1 and norm.upper() in labels:
        return norm.upper()
    for label, opt in zip(labels, options):
        if _normalize(opt) == norm:
            return label
    return None


_PUNCT = str.maketrans("", "", string.punctuation)


def _normalize(s: str) -> str:
    return " ".join(s.translate(_PUNCT).casefold().split())


def load_dataset(path: str | Path) -> list[TaskRecord]:
    """JSON Lines with fields id, question, answer, and optional options, part.

    ``part`` defaults to the file stem so one file per subset works as-is.
    """
    path = Path(path)
    records, seen = [], set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(raw, dict):
                raise DatasetError(path, lineno, "record is not an object")
            for key in ("id", "question", "answer"):
                if key not in raw:
                    raise DatasetError(path, lineno, f"missing field {key!r}")
            options = raw.get("options")
            if options is not None and (
                not isinstance(options, list) or not all(isinstance(o, str) for o in options)
            ):
                raise DatasetError(path, lineno, "options must be a list of strings")
            tid = str(raw["id"])
            if tid in seen:
                raise DatasetError(path, lineno, f"duplicate id {tid!r}")
            seen.add(tid)
            try:
                records.append(
                    TaskRecord(
                        id=tid,
                        question=str(raw["question"]),
                        gold=str(raw["answer"]),
                        part=str(raw.get("part") or path.stem),
                        options=tuple(options) if options else None,
                    )
                )
            except ValueError as exc:
                raise DatasetError(path, lineno, str(exc)) from None
    return records


def run_cot_baseline(task: TaskRecord, config: MctsConfig, model: Model) -> str:
    return cot_answer(
        task.question, model, task.options, max_tokens=config.max_tokens, seed_tag="cot"
    )


def score_answer(predicted: str, gold: str, options: Sequence[str] | None = None) -> bool:
    if options:
        p, g = option_label(predicted, options), option_label(gold, options)
        if p is not None and g is not None:
            return p == g
    return _normalize(predicted) == _normalize(gold) and bool(_normalize(gold))


def task_seed(global_seed: int, task_id: str) -> int:
    h = hashlib.sha256(task_id.encode("utf-8")).digest()
    return (global_seed + int.from_bytes(h[:8], "big")) % 2**63


def aggregate_report(results: Iterable[tuple[str, bool]], **meta) -> RunReport:
    per_part: dict[str, PartScore] = {}
    for part, ok in results:
        score = per_part.setdefault(part, PartScore(0, 0))
        score.total += 1
        score.correct += bool(ok)
    if not per_part:
        raise ValueError("cannot aggregate an empty result list")
    return RunReport(per_part=dict(sorted(per_part.items())), **meta)


def evaluate_task(task: TaskRecord, strategy: str, config: MctsConfig, model: Model) -> TaskOutcome:
    flagged = False
    if strategy == "cot":
        try:
            predicted = run_cot_baseline(task, config, model)
        except AnswerExtractionError:
            predicted, flagged = "", True
    elif strategy == "improved-mcts":
        cfg = dataclasses.replace(config, seed=task_seed(config.seed, task.id))
        result = run_search(format_problem(task.question, task.options), cfg, model, task.options)
        predicted, flagged = result.answer, result.fallback
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    ok = bool(predicted) and score_answer(predicted, task.gold, task.options)
    return TaskOutcome(task.id, task.part, predicted, ok, flagged)


def evaluate(
    tasks: Sequence[TaskRecord],
    strategy: str,
    config: MctsConfig,
    model: Model,
    parallelism: int = 1,
) -> tuple[RunReport, list[TaskOutcome]]:
    t0 = time.monotonic()
    if parallelism > 1:
        with ThreadPoolExecutor(parallelism) as pool:
            outcomes = list(pool.map(lambda t: evaluate_task(t, strategy, config, model), tasks))
    else:
        outcomes = [evaluate_task(t, strategy, config, model) for t in tasks]
    report = aggregate_report(
        ((o.part, o.correct) for o in outcomes),
        strategy=strategy,
        model_name=model.name,
        wall_time_s=time.monotonic() - t0,
        flagged=[o.id for o in outcomes if o.flagged],
    )
    return report, outcomes
