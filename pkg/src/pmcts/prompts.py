"""Prompt templates and reply parsers.

Placeholders understood by every template:

    {problem}  problem text (multiple-choice options already appended)
    {steps}    numbered reasoning chain so far, or "(none yet)"
    {k}        requested step count phrase, e.g. "exactly 3 distinct next steps"
    {options}  lettered option list, empty for free-form questions
    {answer}   candidate final answer (value scoring only)

A template directory holds ``<name>.txt`` files: system text, a line
containing only ``---``, then the user pattern.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .gateway import GenerationRequest

ANSWER_MARKER = "The answer is"
COT_TRIGGER = "Let's think step by step."
PLACEHOLDERS = ("problem", "steps", "k", "options", "answer")
_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")
_MARKER_RE = re.compile(re.escape(ANSWER_MARKER), re.IGNORECASE)
_STEP_LINE_RE = re.compile(r"^\s*(?:\d+[.)]|[-*])\s+(.*\S)\s*$")
_DECIMAL_RE = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)")
LABELS = string.ascii_uppercase


class PromptError(Exception):
    pass


class StepParseError(PromptError):
    pass


class ValueParseError(PromptError):
    pass


class AnswerExtractionError(PromptError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    system_text: str
    user_pattern: str

    def render(self, **values: str) -> str:
        needed = set(_PLACEHOLDER_RE.findall(self.user_pattern))
        missing = needed - values.keys()
        if missing:
            raise PromptError(f"template {self.name!r} needs unbound placeholders {sorted(missing)}")
        # one pass, so placeholder-like text inside values is left alone
        return _PLACEHOLDER_RE.sub(lambda m: str(values[m.group(1)]), self.user_pattern)


_SOLVER_SYSTEM = (
    "You are a careful scientific problem solver. You reason one small step at a time "
    "and never state facts you cannot justify."
)

BUILTIN_TEMPLATES = {
    "propose": PromptTemplate(
        "propose",
        _SOLVER_SYSTEM,
        "Problem:\n{problem}\n\n"
        "Steps so far:\n{steps}\n\n"
        "Propose {k} toward solving the problem. "
        'Write each step on its own line, numbered "1.", "2.", and so on. '
        f'If a step reaches the final result, end it with "{ANSWER_MARKER} <answer>".',
    ),
    "value": PromptTemplate(
        "value",
        "You are a strict grader of scientific solutions.",
        "Problem:\n{problem}\n\n"
        "Solution steps:\n{steps}\n\n"
        "Proposed answer: {answer}\n\n"
        "Score the proposed answer by how likely it is to be correct. "
        "Reply with a single number between 0 and 1.",
    ),
    "cot": PromptTemplate(
        "cot",
        _SOLVER_SYSTEM,
        "{problem}\n{options}\n"
        f'{COT_TRIGGER} Finish with "{ANSWER_MARKER} <answer>".',
    ),
}

_templates = dict(BUILTIN_TEMPLATES)


def load_template_dir(path: str | Path) -> dict[str, PromptTemplate]:
    """Read ``<name>.txt`` overrides and install them over the built-ins."""
    loaded = {}
    for f in sorted(Path(path).glob("*.txt")):
        text = f.read_text(encoding="utf-8")
        system, sep, user = text.partition("\n---\n")
        if not sep:
            raise PromptError(f"{f}: missing '---' separator line")
        loaded[f.stem] = PromptTemplate(f.stem, system.strip(), user.strip("\n"))
    _templates.update(loaded)
    return loaded


def reset_templates() -> None:
    _templates.clear()
    _templates.update(BUILTIN_TEMPLATES)


def get_template(name: str) -> PromptTemplate:
    return _templates[name]


def format_steps(steps: Sequence[str]) -> str:
    if not steps:
        return "(none yet)"
    return "\n".join(f"{i}. {s}" for i, s in enumerate(steps, 1))


def format_options(options: Sequence[str] | None) -> str:
    if not options:
        return ""
    return "\n".join(f"{LABELS[i]}. {o}" for i, o in enumerate(options))


def format_problem(question: str, options: Sequence[str] | None) -> str:
    opts = format_options(options)
    return f"{question}\n{opts}" if opts else question


def _step_phrase(k: int) -> str:
    if k == 1:
        return "exactly 1 next step (a single line numbered 1.)"
    return f"exactly {k} distinct alternative next steps"


def _request(template: PromptTemplate, user: str, **kw) -> GenerationRequest:
    return GenerationRequest(
        model_name=kw.get("model_name", ""),
        messages=(("system", template.system_text), ("user", user)),
        temperature=kw.get("temperature", 0.0),
        max_tokens=kw.get("max_tokens", 512),
        seed_tag=kw.get("seed_tag", ""),
    )


def render_propose_steps(
    problem: str, steps_so_far: Sequence[str], k: int, **request_kw
) -> GenerationRequest:
    if k < 1:
        raise ValueError("k must be >= 1")
    t = get_template("propose")
    user = t.render(
        problem=problem, steps=format_steps(steps_so_far), k=_step_phrase(k), options="", answer=""
    )
    return _request(t, user, **request_kw)


def render_value_score(
    problem: str, steps: Sequence[str], answer: str, **request_kw
) -> GenerationRequest:
    t = get_template("value")
    user = t.render(problem=problem, steps=format_steps(steps), answer=answer, k="", options="")
    return _request(t, user, **request_kw)


def render_cot(question: str, options: Sequence[str] | None = None, **request_kw) -> GenerationRequest:
    t = get_template("cot")
    user = t.render(problem=question, options=format_options(options), steps="", k="", answer="")
    return _request(t, user, **request_kw)


def parse_step_list(content: str, k: int) -> list[str]:
    steps = []
    for line in content.splitlines():
        m = _STEP_LINE_RE.match(line)
        if m and m.group(1).strip():
            steps.append(m.group(1).strip())
    if not steps:
        raise StepParseError("no enumerated steps in reply")
    return steps[:k]


def parse_value(content: str) -> float:
    m = _DECIMAL_RE.search(content)
    if m is None:
        raise ValueParseError(f"no number in value reply {content[:80]!r}")
    return min(1.0, max(0.0, float(m.group(0))))


def normalize_step(step: str) -> str:
    return " ".join(step.split())


def has_answer_marker(text: str) -> bool:
    return _MARKER_RE.search(text) is not None


def extract_answer(content: str, options: Sequence[str] | None = None) -> str:
    """Token after the last "The answer is" marker, trimmed of punctuation.

    With options, the token must name an option by label or by a prefix of
    its text; the option label is returned.
    """
    matches = list(_MARKER_RE.finditer(content))
    if not matches:
        raise AnswerExtractionError("answer marker not found")
    rest = content[matches[-1].end():].split()
    token = rest[0].strip(string.punctuation) if rest else ""
    if not token:
        raise AnswerExtractionError("nothing follows the answer marker")
    if not options:
        return token
    labels = LABELS[: len(options)]
    if len(token) == 1 and token.upper() in labels:
        return token.upper()
    low = token.casefold()
    for label, text in zip(labels, options):
        if text.casefold().startswith(low):
            return label
    raise AnswerExtractionError(f"answer {token!r} matches no option")
