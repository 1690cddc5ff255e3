import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmcts.prompts import extract_answer, parse_step_list, parse_value, render_propose_steps, render_value_score
from pmcts.search import MctsConfig
from pmcts.synthetic import (
    SpecError,
    SyntheticTreeSpec,
    as_scripted_model,
    benchmark,
    convergence_run,
    format_bench,
    known_optimum,
    load_spec,
    random_spec,
    reward_text,
)


def naive_best(spec):
    """Recursive max over the tree, independent of the leaf indexing."""

    def walk(prefix_rewards, depth):
        if depth == 0:
            return [], prefix_rewards[0]
        size = len(prefix_rewards) // spec.branching
        best = None
        for i in range(spec.branching):
            path, r = walk(prefix_rewards[i * size : (i + 1) * size], depth - 1)
            if best is None or r > best[1]:
                best = ([i + 1] + path, r)
        return best

    return walk(list(spec.leaf_rewards), spec.depth)


def test_depth_one_model():
    spec = SyntheticTreeSpec(1, 2, (0.1, 0.9))
    model = as_scripted_model(spec)
    reply = model.generate(render_propose_steps(spec.problem_text, [], 3)).content
    steps = parse_step_list(reply, 3)
    assert len(steps) == 2
    assert extract_answer(steps[1]) == "2"
    value = model.generate(render_value_score(spec.problem_text, [steps[1]], "2")).content
    assert value == "0.9" and parse_value(value) == 0.9


def test_deeper_proposals_are_not_terminal_until_last_level():
    spec = random_spec(3, 2, seed=0)
    model = as_scripted_model(spec)
    first = parse_step_list(model.generate(render_propose_steps("p", [], 2)).content, 2)
    assert first == ["take branch 1", "take branch 2"]
    last = parse_step_list(model.generate(render_propose_steps("p", ["take branch 2", "take branch 1"], 2)).content, 2)
    assert [extract_answer(s) for s in last] == ["2-1-1", "2-1-2"]


@pytest.mark.parametrize(
    "kw",
    [
        {"depth": 0, "branching": 2, "leaf_rewards": ()},
        {"depth": 1, "branching": 2, "leaf_rewards": (0.1, 1.5)},
        {"depth": 1, "branching": 2, "leaf_rewards": (0.1,)},
        {"depth": 1, "branching": 2, "leaf_rewards": (0.5, 0.6), "margin": 0.2},
    ],
)
def test_spec_validation(kw):
    with pytest.raises(SpecError):
        SyntheticTreeSpec(**kw)


def test_known_optimum_examples():
    assert known_optimum(SyntheticTreeSpec(1, 2, (0.1, 0.9))) == ([2], 0.9)
    assert known_optimum(SyntheticTreeSpec(3, 2, (0.5,) * 8)) == ([1, 1, 1], 0.5)


def test_known_optimum_seeded_depth3_branching3():
    spec = random_spec(3, 3, seed=17)
    assert known_optimum(spec) == naive_best(spec)


@st.composite
def specs(draw):
    depth = draw(st.integers(1, 3))
    branching = draw(st.integers(1, 4))
    rewards = draw(
        st.lists(
            st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 1.0]) | st.floats(0, 1),
            min_size=branching**depth,
            max_size=branching**depth,
        )
    )
    return SyntheticTreeSpec(depth, branching, tuple(rewards))


@given(specs())
def test_known_optimum_matches_recursion(spec):
    assert known_optimum(spec) == naive_best(spec)


@given(st.integers(1, 3), st.integers(2, 4), st.integers(0, 10**6))
def test_random_spec_margin(depth, branching, seed):
    spec = random_spec(depth, branching, seed, margin=0.2)
    ranked = sorted(spec.leaf_rewards, reverse=True)
    assert ranked[0] - ranked[1] >= 0.2 - 1e-9
    assert spec == random_spec(depth, branching, seed, margin=0.2)


def test_spec_file_roundtrip(tmp_path):
    spec = random_spec(2, 3, seed=4)
    (tmp_path / "s.json").write_text(spec.to_json())
    assert load_spec(tmp_path / "s.json") == spec
    (tmp_path / "bad.json").write_text('{"depth": 1}')
    with pytest.raises(SpecError):
        load_spec(tmp_path / "bad.json")


@pytest.mark.parametrize("x", [0.0, 1.0, 0.9, 1e-05, 6.15e-07, 0.123456])
def test_reward_text_positional(x):
    text = reward_text(x)
    assert "e" not in text.lower() and parse_value(text) == x


def test_benchmark_rows_shape_and_determinism():
    cfg = MctsConfig(iterations=60, seed=3)
    rows = benchmark(cfg, 4, depth=2, branching=3)
    assert [r.variant for r in rows] == ["dynamic-c", "fixed-c"]
    for r in rows:
        assert 0 <= r.root_hit_rate <= 1 and 0 <= r.leaf_hit_rate <= 1 and r.mean_regret >= 0
    assert format_bench(rows) == format_bench(benchmark(cfg, 4, depth=2, branching=3))


def test_benchmark_fixed_spec_widens_expansion():
    spec = SyntheticTreeSpec(1, 5, (0.1, 0.2, 0.3, 0.4, 0.99))
    rows = benchmark(MctsConfig(iterations=20), 2, spec=spec)
    assert rows[0].leaf_hits == 2


@st.composite
def small_specs(draw):
    depth, branching = draw(st.integers(1, 3)), draw(st.integers(1, 3))
    rewards = draw(st.lists(st.floats(0, 1), min_size=branching**depth, max_size=branching**depth))
    return SyntheticTreeSpec(depth, branching, tuple(rewards))


@settings(max_examples=5, deadline=None, derandomize=True)
@given(small_specs())
def test_search_lands_near_optimum(spec):
    near = sum(convergence_run(spec, MctsConfig(iterations=200, seed=s))[2] <= 0.05 for s in range(100))
    assert near >= 95
