import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdperl.classifier import ClassifierOracle
from sdperl.environment import FeatureSelectionEnv, Mode, resolve_action
from sdperl.pheromone import PheromoneTable
from sdperl.synthetic import make_planted_dataset


@pytest.fixture(scope="module")
def oracle():
    data, _ = make_planted_dataset(n_rows=200, n_features=30, n_informative=6, seed=1)
    train = data.take(np.arange(150))
    eval_ = data.take(np.arange(150, 200))
    return ClassifierOracle(train, eval_)


def _linear_scan(action, selected, reps, mode):
    best, best_cost = None, None
    for i in range(len(reps)):
        if i in selected:
            continue
        cost = float(((reps[i] - action) ** 2).sum()) if mode == "custom" else -float(action[i])
        if best is None or cost < best_cost:
            best, best_cost = i, cost
    return best


def test_exact_embedding_resolves_to_itself():
    reps = np.random.default_rng(0).standard_normal((20, 5))
    assert resolve_action(reps[12], [], reps, Mode.CUSTOM) == 12
    assert resolve_action(reps[12], [12], reps, Mode.CUSTOM) != 12


def test_equidistant_tie_goes_to_lower_id():
    reps = np.zeros((12, 2))
    reps[:] = 10.0
    reps[3] = [1.0, 0.0]
    reps[9] = [-1.0, 0.0]
    assert resolve_action(np.zeros(2), [], reps, Mode.CUSTOM) == 3
    scores = np.zeros(12)
    scores[[4, 7]] = 5.0
    assert resolve_action(scores, [], np.eye(12), Mode.SIMPLE) == 4
    assert resolve_action(scores, [4], np.eye(12), Mode.SIMPLE) == 7


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["custom", "simple"]), st.integers(0, 49))
def test_resolve_matches_linear_scan(seed, mode, n_sel):
    rng = np.random.default_rng(seed)
    reps = rng.standard_normal((50, 7)) if mode == "custom" else np.eye(50)
    action = rng.standard_normal(reps.shape[1])
    if rng.random() < 0.3:
        action = np.round(action)  # provoke ties
    selected = [int(i) for i in rng.choice(50, n_sel, replace=False)]
    got = resolve_action(action, selected, reps, Mode(mode))
    assert got == _linear_scan(action, selected, reps, mode)
    assert got not in selected


def test_resolve_errors():
    reps = np.eye(3)
    with pytest.raises(ValueError):
        resolve_action(np.zeros(3), [0, 1, 2], reps, Mode.SIMPLE)
    with pytest.raises(ValueError):
        resolve_action(np.zeros(2), [], reps, Mode.CUSTOM)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 20), st.integers(0, 19))
def test_simple_and_custom_agree_on_one_hot_basis(seed, scale, n_sel):
    rng = np.random.default_rng(seed)
    n = 20
    scores = rng.standard_normal(n)
    if rng.random() < 0.3:
        scores = np.round(scores)
    selected = [int(i) for i in rng.choice(n, n_sel, replace=False)]
    # ||a - e_i||^2 = ||a||^2 + 1 - 2 a_i, so the nearest one-hot is the largest entry
    assert (resolve_action(scores * scale, selected, np.eye(n), Mode.CUSTOM)
            == resolve_action(scores, selected, np.eye(n), Mode.SIMPLE))


def test_vanilla_reset(oracle):
    env = FeatureSelectionEnv(oracle, np.eye(30), capacity=20, mode=Mode.SIMPLE)
    state = env.reset(np.random.default_rng(0))
    assert state.selected_ids == [] and state.prev_score == 0.0
    assert not state.slots.any() and state.slots.shape == (20, 30)
    assert env.steps_per_episode == 20


def test_pheromone_reset_seeds_a_third(oracle):
    reps = np.random.default_rng(1).standard_normal((30, 9))
    env = FeatureSelectionEnv(oracle, reps, capacity=20, mode=Mode.CUSTOM, use_pheromone=True)
    state = env.reset(np.random.default_rng(0))
    assert state.seeded_count == 6 and len(set(state.selected_ids)) == 6
    assert np.array_equal(state.slots[:6], reps[state.selected_ids])
    assert not state.slots[6:].any()
    assert state.prev_score == oracle(state.selected_ids)[0]
    assert env.steps_per_episode == 14
    # seeding itself leaves the table untouched
    assert not env.table.count.any()


def test_capacity_bounds(oracle):
    with pytest.raises(ValueError):
        FeatureSelectionEnv(oracle, np.eye(30), capacity=31, mode=Mode.SIMPLE)


def _run_episode(env, rng):
    state = env.reset(rng)
    start = state.prev_score
    rewards = []
    while not state.done:
        out = env.step(rng.standard_normal(env.slot_dim))
        rewards.append(out.reward)
    return start, state, rewards


@pytest.mark.parametrize("mode, use_ph", [("custom", True), ("simple", True), ("custom", False)])
def test_telescoping(oracle, mode, use_ph):
    reps = np.random.default_rng(2).standard_normal((30, 9)) if mode == "custom" else np.eye(30)
    table = PheromoneTable(30)
    env = FeatureSelectionEnv(oracle, reps, capacity=20, mode=Mode(mode), use_pheromone=use_ph,
                              table=table)
    rng = np.random.default_rng(5)
    all_rewards = []
    for _ in range(5):
        start, state, rewards = _run_episode(env, rng)
        assert len(rewards) == env.steps_per_episode
        assert abs(sum(rewards) - (state.prev_score - start)) < 1e-12
        assert len(set(state.selected_ids)) == 20
        all_rewards += rewards
    if use_ph:
        assert abs(table.cum_reward.sum() - sum(all_rewards)) < 1e-9
        assert table.count.sum() == len(all_rewards)
    else:
        assert not table.count.any()


def test_first_step_reward_and_step_after_done(oracle):
    env = FeatureSelectionEnv(oracle, np.eye(30), capacity=2, mode=Mode.SIMPLE)
    env.reset(np.random.default_rng(0))
    a = np.zeros(30)
    a[4] = 1.0
    out = env.step(a)
    assert out.feature_id == 4 and out.reward == out.score == oracle([4])[0]
    out2 = env.step(a)
    assert out2.feature_id != 4 and out2.done
    assert out2.reward == pytest.approx(out2.score - out.score, abs=0)
    with pytest.raises(RuntimeError):
        env.step(a)


def test_oracle_failure_has_step_context(oracle):
    class Broken:
        def __call__(self, subset):
            raise ValueError("boom")

    env = FeatureSelectionEnv(Broken(), np.eye(5), capacity=2, mode=Mode.SIMPLE)
    env.reset(np.random.default_rng(0))
    with pytest.raises(RuntimeError, match="step 0"):
        env.step(np.ones(5))
