import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmcts import prompts
from pmcts.prompts import (
    AnswerExtractionError,
    PromptError,
    PromptTemplate,
    StepParseError,
    ValueParseError,
    extract_answer,
    parse_step_list,
    parse_value,
    render_propose_steps,
    render_value_score,
)
from pmcts.scenarios import HEXAGON_QUESTION

RESIDUAL = ("{problem}", "{steps}", "{k}", "{options}", "{answer}")


def test_propose_three_paths():
    req = render_propose_steps(HEXAGON_QUESTION, [], 3)
    assert HEXAGON_QUESTION in req.prompt
    assert "exactly 3 distinct" in req.prompt
    assert "(none yet)" in req.prompt
    assert req.messages[0][0] == "system" and req.messages[-1][0] == "user"
    assert not any(p in req.prompt for p in RESIDUAL)


def test_propose_singular():
    req = render_propose_steps("q", [], 1)
    assert "exactly 1 next step" in req.prompt
    assert "steps toward" not in req.prompt


def test_propose_includes_prior_chain_verbatim():
    req = render_propose_steps("q", ["Split into  triangles", "Count: 4"], 2)
    assert "1. Split into  triangles\n2. Count: 4" in req.prompt


def test_propose_rejects_k_zero():
    with pytest.raises(ValueError):
        render_propose_steps("q", [], 0)


@given(st.text(), st.lists(st.text(), max_size=4), st.integers(1, 9))
def test_render_is_pure(problem, steps, k):
    assert render_propose_steps(problem, steps, k) == render_propose_steps(problem, steps, k)


def test_placeholder_text_in_values_is_not_expanded():
    req = render_propose_steps("what is {steps}?", ["{k}"], 2)
    assert "what is {steps}?" in req.prompt and "1. {k}" in req.prompt


def test_template_unbound_placeholder():
    t = PromptTemplate("x", "sys", "{problem} and {k}")
    with pytest.raises(PromptError):
        t.render(problem="p")


def test_parse_step_list():
    assert parse_step_list("1. Use formula\n2. Split into triangles", 3) == [
        "Use formula",
        "Split into triangles",
    ]
    five = "\n".join(f"{i}) step {i}" for i in range(1, 6))
    assert parse_step_list(five, 3) == ["step 1", "step 2", "step 3"]
    assert parse_step_list("Intro\n- first\n-   \n- second", 5) == ["first", "second"]


def test_parse_step_list_rejects_paragraph():
    with pytest.raises(StepParseError):
        parse_step_list("We should use the polygon formula and then multiply.", 3)


@pytest.mark.parametrize(
    "reply,score",
    [("0.8", 0.8), ("Score: 1.2 because it is right", 1.0), ("-0.5", 0.0), ("1", 1.0), (".25 overall", 0.25)],
)
def test_parse_value(reply, score):
    assert parse_value(reply) == score


def test_parse_value_no_number():
    with pytest.raises(ValueParseError):
        parse_value("excellent")


@given(st.text())
def test_parse_value_always_in_unit_interval(reply):
    try:
        v = parse_value(reply)
    except ValueParseError:
        return
    assert 0.0 <= v <= 1.0


def test_value_prompt_carries_answer():
    req = render_value_score("q", ["a", "b"], "720")
    assert "Proposed answer: 720" in req.prompt and "1. a\n2. b" in req.prompt


def test_extract_answer_free_form():
    assert extract_answer("Therefore the total is 720. The answer is 720") == "720"
    assert extract_answer("The answer is 5. Wait, the answer is 6.") == "6"


def test_extract_answer_options():
    opts = ["alpha", "beta", "gamma", "delta"]
    assert extract_answer("the answer is c.", opts) == "C"
    assert extract_answer("The answer is Beta", opts) == "B"
    with pytest.raises(AnswerExtractionError):
        extract_answer("The answer is omega", opts)
    with pytest.raises(AnswerExtractionError):
        extract_answer("The answer is E", opts)


@pytest.mark.parametrize("text", ["I am not sure.", "The answer is", "The answer is ..."])
def test_extract_answer_missing(text):
    with pytest.raises(AnswerExtractionError):
        extract_answer(text)


@given(st.text())
def test_extract_answer_idempotent(text):
    try:
        a = extract_answer(text)
    except AnswerExtractionError:
        return
    assert extract_answer(f"{prompts.ANSWER_MARKER} {a}") == a


def test_cot_prompt_has_trigger_and_options():
    req = prompts.render_cot("Which?", ["x", "y"])
    assert "Let's think step by step." in req.prompt
    assert "A. x\nB. y" in req.prompt


def test_template_dir_override(tmp_path):
    (tmp_path / "value.txt").write_text("Grade it.\n---\nQ: {problem}\nS: {steps}\nA: {answer}\nNumber only.")
    loaded = prompts.load_template_dir(tmp_path)
    assert set(loaded) == {"value"}
    req = render_value_score("q", ["s"], "9")
    assert req.prompt == "Q: q\nS: 1. s\nA: 9\nNumber only."
    assert req.messages[0] == ("system", "Grade it.")
    prompts.reset_templates()
    assert "Proposed answer" in render_value_score("q", ["s"], "9").prompt


def test_template_dir_bad_file(tmp_path):
    (tmp_path / "cot.txt").write_text("no separator here")
    with pytest.raises(PromptError):
        prompts.load_template_dir(tmp_path)
