import numpy as np
import pytest

from data_model import DomainError, ShapeError
from rl.agents import bernoulli_actor_loss_and_grads, critic_loss_and_grads, gaussian_actor_loss_and_grads
from rl.buffers import RolloutBuffer, Transition
from rl.distributions import bernoulli_log_prob, gaussian_log_prob
from rl.networks import DenseNet
from rl.ppo import (AdamOptimizer, PpoConfig, adam_step, clip_grad_norm, clipped_surrogate, gae,
                    gae_from_next_values, global_norm, normalize_advantages, ppo_losses)


def brute_force_gae(rewards, values, bootstrap, gamma, lam, done_at_end):
    n = len(rewards)
    next_values = list(values[1:]) + [0.0 if done_at_end else bootstrap]
    deltas = [rewards[t] + gamma * next_values[t] - values[t] for t in range(n)]
    return np.array([sum((gamma * lam) ** (l - t) * deltas[l] for l in range(t, n)) for t in range(n)])


def test_gae_with_zero_lambda_is_the_td_error():
    rewards = np.array([1.0, 0.5, -0.2])
    values = np.array([0.3, 0.1, 0.4])
    advantages, returns = gae(rewards, values, 0.7, [False, False, False], gamma=0.9, lam=0.0)
    deltas = rewards + 0.9 * np.array([0.1, 0.4, 0.7]) - values
    np.testing.assert_allclose(advantages, deltas)
    np.testing.assert_allclose(returns, deltas + values)


def test_gae_single_step():
    advantages, _ = gae([1.0], [0.0], 0.5, [False], gamma=1.0, lam=1.0)
    assert advantages[0] == pytest.approx(1.5)


def test_gae_matches_the_double_sum():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 12))
        rewards = rng.normal(size=n)
        values = rng.normal(size=n)
        bootstrap = float(rng.normal())
        gamma, lam = rng.uniform(0.8, 1.0), rng.uniform(0.0, 1.0)
        done = bool(rng.integers(0, 2))
        dones = [False] * (n - 1) + [done]
        advantages, _ = gae(rewards, values, bootstrap, dones, gamma, lam)
        expected = brute_force_gae(rewards, values, bootstrap, gamma, lam, done)
        np.testing.assert_allclose(advantages, expected, atol=1e-10)


def test_truncated_segment_keeps_its_bootstrap():
    rewards = np.array([1.0, 1.0])
    values = np.array([0.5, 0.5])
    next_values = np.array([0.5, 2.0])
    truncated, _ = gae_from_next_values(rewards, values, next_values, np.array([False, False]),
                                        np.array([False, True]), 0.9, 0.9)
    terminated, _ = gae_from_next_values(rewards, values, next_values, np.array([False, True]),
                                         np.array([False, True]), 0.9, 0.9)
    assert truncated[1] == pytest.approx(1.0 + 0.9 * 2.0 - 0.5)
    assert terminated[1] == pytest.approx(0.5)


def test_gae_rejects_misaligned_inputs():
    with pytest.raises(ShapeError):
        gae([1.0, 2.0], [0.0], 0.0, [False, False], 0.99, 0.95)


def test_normalize_advantages():
    normalized = normalize_advantages(np.array([1.0, 2.0, 3.0, 4.0]))
    assert normalized.mean() == pytest.approx(0.0, abs=1e-12)
    assert normalized.std() == pytest.approx(1.0, rel=1e-6)
    assert normalize_advantages(np.array([5.0]))[0] == 0.0


def test_clipped_surrogate_cases():
    advantages = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(clipped_surrogate(np.ones(3), advantages, 0.2), advantages)
    assert clipped_surrogate(np.array([2.0]), np.array([1.0]), 0.2)[0] == pytest.approx(1.2)
    assert clipped_surrogate(np.array([0.5]), np.array([-1.0]), 0.2)[0] == pytest.approx(-0.8)
    assert clipped_surrogate(np.array([0.5]), np.array([1.0]), 0.2)[0] == pytest.approx(0.5)


def test_ppo_losses_at_unit_ratio():
    config = PpoConfig(entropy_coef=0.0)
    advantages = np.array([1.0, -1.0, 2.0])
    log_probs = np.array([-1.0, -2.0, -0.5])
    losses = ppo_losses(advantages, np.array([1.0, 2.0, 3.0]), log_probs, log_probs, np.array([1.0, 1.0, 1.0]),
                        np.zeros(3), config)
    assert losses["actor"] == pytest.approx(-advantages.mean())
    assert losses["critic"] == pytest.approx((0.0 + 1.0 + 4.0) / 3.0)
    assert losses["clip_fraction"] == 0.0


def randomize(net, rng, scale=0.5):
    for p in net.params:
        p[...] = rng.normal(0.0, scale, size=p.shape)
    return net


def check_gradients(params, grads, loss_fn, h=1e-6):
    for p, g in zip(params, grads):
        for index in np.ndindex(p.shape):
            saved = p[index]
            p[index] = saved + h
            up = loss_fn()
            p[index] = saved - h
            down = loss_fn()
            p[index] = saved
            numeric = (up - down) / (2.0 * h)
            assert g[index] == pytest.approx(numeric, rel=1e-4, abs=1e-7)


def test_gaussian_actor_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    actor = randomize(DenseNet([3, 4, 4]), rng)
    log_std = rng.normal(-0.3, 0.2, size=4)
    assert actor.parameter_count + log_std.size <= 50
    x = rng.normal(size=(6, 3))
    u = rng.normal(size=(6, 4))
    config = PpoConfig(entropy_coef=0.05)
    old = gaussian_log_prob(u, actor.forward(x), log_std) + rng.normal(0.0, 0.3, size=6)
    advantages = rng.normal(size=6)

    def loss():
        return gaussian_actor_loss_and_grads(actor, log_std, x, u, old, advantages, config, weight=0.5)[0]

    _, grads, _ = gaussian_actor_loss_and_grads(actor, log_std, x, u, old, advantages, config, weight=0.5)
    check_gradients(actor.params + [log_std], grads, loss)


def test_bernoulli_actor_gradients_match_finite_differences():
    rng = np.random.default_rng(4)
    actor = randomize(DenseNet([3, 3, 2]), rng)
    x = rng.normal(size=(5, 3))
    selections = rng.integers(0, 2, size=(5, 2)).astype(float)
    config = PpoConfig(entropy_coef=0.05)
    old = bernoulli_log_prob(actor.forward(x), selections) + rng.normal(0.0, 0.3, size=5)
    advantages = rng.normal(size=5)

    def loss():
        return bernoulli_actor_loss_and_grads(actor, x, selections, old, advantages, config)[0]

    _, grads, _ = bernoulli_actor_loss_and_grads(actor, x, selections, old, advantages, config)
    check_gradients(actor.params, grads, loss)


def test_critic_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    critic = randomize(DenseNet([4, 3, 1]), rng)
    x = rng.normal(size=(7, 4))
    returns = rng.normal(size=7)

    def loss():
        return critic_loss_and_grads(critic, x, returns, weight=0.7)[0]

    _, grads = critic_loss_and_grads(critic, x, returns, weight=0.7)
    check_gradients(critic.params, grads, loss)


def test_adam_zero_gradient():
    params = np.array([1.0, -2.0])
    updated, m, v = adam_step(params, np.zeros(2), np.zeros(2), np.zeros(2), lr=0.1, t=1)
    np.testing.assert_array_equal(updated, params)
    _, m2, v2 = adam_step(params, np.zeros(2), np.array([1.0, 1.0]), np.array([1.0, 1.0]), lr=0.1, t=2)
    np.testing.assert_allclose(m2, [0.9, 0.9])
    np.testing.assert_allclose(v2, [0.999, 0.999])


def test_adam_first_step_moves_by_the_learning_rate():
    updated, _, _ = adam_step(np.zeros(3), np.array([0.3, -5.0, 1e-3]), np.zeros(3), np.zeros(3), lr=0.01, t=1)
    np.testing.assert_allclose(updated, [-0.01, 0.01, -0.01], rtol=1e-4)


def test_adam_two_steps_by_hand():
    lr, g, p = 0.1, 0.5, 1.0
    m = v = 0.0
    for t in (1, 2):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        p = p - lr * (m / (1 - 0.9 ** t)) / ((v / (1 - 0.999 ** t)) ** 0.5 + 1e-8)
    params = np.array([1.0])
    m_arr, v_arr = np.zeros(1), np.zeros(1)
    for t in (1, 2):
        params, m_arr, v_arr = adam_step(params, np.array([g]), m_arr, v_arr, lr=lr, t=t)
    assert params[0] == pytest.approx(p, rel=1e-12)


def test_adam_validation():
    with pytest.raises(ShapeError):
        adam_step(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2), 0.1, 1)
    with pytest.raises(DomainError):
        adam_step(np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2), 0.1, 0)


def test_gradient_clipping():
    grads = [np.array([3.0, 0.0]), np.array([4.0])]
    assert global_norm(grads) == pytest.approx(5.0)
    clipped, norm = clip_grad_norm(grads, 0.5)
    assert norm == pytest.approx(5.0)
    assert global_norm(clipped) == pytest.approx(0.5)
    unchanged, _ = clip_grad_norm(grads, 10.0)
    assert unchanged is grads


def test_optimizer_updates_in_place_and_round_trips_state():
    params = [np.ones(2), np.zeros(1)]
    optimizer = AdamOptimizer(params, lr=0.1, max_grad_norm=0.0)
    optimizer.step([np.array([1.0, -1.0]), np.array([2.0])])
    np.testing.assert_allclose(params[0], [0.9, 1.1], rtol=1e-6)
    assert params[1][0] == pytest.approx(-0.1, rel=1e-6)

    clone = AdamOptimizer([p.copy() for p in params], lr=0.1)
    clone.load_state_arrays(optimizer.state_arrays())
    assert clone.t == 1
    np.testing.assert_array_equal(clone.m[0], optimizer.m[0])
    with pytest.raises(ShapeError):
        optimizer.step([np.zeros(2)])


def make_transition(reward, value, next_value, done=False, segment_end=False, agent=0):
    return Transition(observation=np.zeros(2), state=np.zeros(3), action=np.zeros(1), log_prob=0.0,
                      reward=reward, value=value, next_value=next_value, done=done, segment_end=segment_end,
                      agent=agent)


def test_buffer_completes_segments_and_drains_exact_batches():
    buffer = RolloutBuffer(update_size=3, gamma=0.9, gae_lambda=0.8)
    buffer.add(0, make_transition(1.0, 0.2, 0.3))
    buffer.add(1, make_transition(0.5, 0.1, 0.0, done=True, segment_end=True, agent=1))
    assert buffer.completed == 1 and buffer.pending == 1
    assert not buffer.ready()
    buffer.add(0, make_transition(2.0, 0.3, 0.4, segment_end=True))
    assert buffer.completed == 3 and buffer.pending == 0
    assert buffer.ready()

    batch = buffer.drain()
    assert len(batch) == 3
    assert list(batch.agents) == [1, 0, 0]
    expected, returns = gae_from_next_values(np.array([1.0, 2.0]), np.array([0.2, 0.3]), np.array([0.3, 0.4]),
                                             np.array([False, False]), np.array([False, True]), 0.9, 0.8)
    np.testing.assert_allclose(batch.advantages[1:], expected)
    np.testing.assert_allclose(batch.returns[1:], returns)
    assert batch.advantages[0] == pytest.approx(0.5 - 0.1)
    assert buffer.completed == 0 and buffer.updates_drained == 1


def test_buffer_keeps_the_remainder():
    buffer = RolloutBuffer(update_size=2, gamma=0.99, gae_lambda=0.95)
    for _ in range(5):
        buffer.add("a", make_transition(1.0, 0.0, 0.0, segment_end=True))
    buffer.drain()
    buffer.drain()
    assert buffer.completed == 1
    assert not buffer.ready()
    assert buffer.total_added == 5
    subset = buffer.drain().subset(np.array([0]))
    assert len(subset) == 1
