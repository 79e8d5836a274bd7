import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_task
from sipl.belief import (
    Belief, ZeroLikelihoodError, correct, initial_belief, propagate, update,
)
from sipl.env import derive_rng, generate
from sipl.model import InteractionIndicator, build_model
from sipl.solver import uniform_strategy
from sipl.tasks import EAST, LISTEN, NORTH, observation_bits


def test_initial_belief_product(task3):
    task = make_task(support_i=((0, 0), (0, 1)), support_j=((2, 2), (2, 1), (2, 0)))
    m = build_model(task)
    b = initial_belief(task, m)
    assert abs(b.probs.sum() - 1.0) < 1e-15
    assert (b.probs > 0).sum() == 6
    assert np.allclose(b.probs[b.probs > 0], 1.0 / 6.0)


def test_initial_belief_singleton_delta(task3):
    m = build_model(task3)
    b = initial_belief(task3, m)
    s = (m.geom.cell_index[(0, 0)], m.geom.cell_index[(2, 2)])
    assert b.probs[s[0] * m.n_free + s[1]] == 1.0
    assert b.probs.sum() == 1.0


def test_propagate_delta_deterministic(task3_det):
    m = build_model(task3_det)
    X = m.indicator
    b = initial_belief(task3_det, m)
    mass = propagate(b, m, X, a_i=EAST, a_j=NORTH)
    si = m.geom.cell_index[(0, 1)]
    sj = m.geom.cell_index[(1, 2)]
    expected = np.zeros(m.n_joint)
    expected[si * m.n_free + sj] = 1.0
    assert np.array_equal(mass, expected)


def test_propagate_mass_conserved(task4):
    m = build_model(task4)
    rng = np.random.default_rng(0)
    for name in ("never", "always", "radius"):
        X = {"never": InteractionIndicator.no_pairs(m.geom),
             "always": InteractionIndicator.all_pairs(m.geom),
             "radius": m.indicator}[name]
        p = rng.dirichlet(np.ones(m.n_joint))
        for a_i in range(6):
            for a_j in range(6):
                mass = propagate(Belief(probs=p), m, X, a_i, a_j=a_j)
                assert abs(mass.sum() - 1.0) < 1e-12
        mass = propagate(Belief(probs=p), m, X, EAST,
                         opponent_strategy=uniform_strategy(m.n_joint, "j"))
        assert abs(mass.sum() - 1.0) < 1e-12


def test_propagate_noninteractive_equals_two_convolutions(task3):
    m = build_model(task3)
    never = InteractionIndicator.no_pairs(m.geom)
    rng = np.random.default_rng(7)
    bel = rng.dirichlet(np.ones(m.n_joint))
    got = propagate(Belief(probs=bel), m, never, a_i=EAST, a_j=NORTH)
    nf = m.n_free
    # j-convolution then i-convolution, written as explicit loops
    mid = np.zeros((nf, nf))
    grid = bel.reshape(nf, nf)
    for si in range(nf):
        for sj in range(nf):
            for sjn in range(nf):
                mid[si, sjn] += grid[si, sj] * m.t_j[sj, NORTH, sjn]
    out = np.zeros((nf, nf))
    for si in range(nf):
        for sin in range(nf):
            for sjn in range(nf):
                out[sin, sjn] += mid[si, sjn] * m.t_i[si, EAST, sin]
    assert np.abs(got - out.ravel()).max() < 1e-14


def test_propagate_uniform_fixed_point_under_listen(task3):
    m = build_model(task3)
    never = InteractionIndicator.no_pairs(m.geom)
    uni = np.full(m.n_joint, 1.0 / m.n_joint)
    mass = propagate(Belief(probs=uni), m, never, a_i=LISTEN, a_j=LISTEN)
    assert np.allclose(mass, uni, atol=1e-15)


def test_propagate_mode_arguments(task3):
    m = build_model(task3)
    b = initial_belief(task3, m)
    with pytest.raises(ValueError, match="exactly one"):
        propagate(b, m, m.indicator, EAST)
    with pytest.raises(ValueError, match="exactly one"):
        propagate(b, m, m.indicator, EAST, a_j=NORTH,
                  opponent_strategy=uniform_strategy(m.n_joint, "j"))


def test_correct_bayes_by_hand():
    """Two equally likely own cells whose codes differ in one bit: noise 0.1
    gives likelihood ratio 9:1, so the posterior is [0.9, 0.1]."""
    task = make_task(gold=(2, 2), support_i=((0, 0), (0, 1)), support_j=((2, 0),))
    m = build_model(task)
    geom = m.geom
    a_cell, b_cell = geom.cell_index[(0, 0)], geom.cell_index[(0, 1)]
    j_cell = geom.cell_index[(2, 0)]
    assert bin(int(geom.obs_code[a_cell]) ^ int(geom.obs_code[b_cell])).count("1") == 1
    predicted = np.zeros(m.n_joint)
    predicted[a_cell * m.n_free + j_cell] = 0.5
    predicted[b_cell * m.n_free + j_cell] = 0.5
    post = correct(predicted, m, a_i=EAST, o_i=int(geom.obs_code[a_cell]))
    assert abs(post.probs[a_cell * m.n_free + j_cell] - 0.9) < 1e-12
    assert abs(post.probs[b_cell * m.n_free + j_cell] - 0.1) < 1e-12


def test_correct_noiseless_identifies_cell(task3_det):
    m = build_model(task3_det)
    predicted = np.full(m.n_joint, 1.0 / m.n_joint)
    code = int(m.geom.obs_code[m.geom.cell_index[(0, 0)]])
    post = correct(predicted, m, a_i=LISTEN, o_i=code)
    grid = post.probs.reshape(m.n_free, m.n_free)
    matching = [k for k in range(m.n_free) if int(m.geom.obs_code[k]) == code]
    assert set(np.nonzero(grid.sum(axis=1))[0]) == set(matching)


def test_correct_uninformative_keeps_prediction(task3):
    # noise 0.5 makes every observation equally likely in every cell
    task = make_task(obs_noise_move=0.5, obs_noise_listen=0.5)
    m = build_model(task)
    rng = np.random.default_rng(1)
    predicted = rng.dirichlet(np.ones(m.n_joint)) * 0.7  # unnormalized on purpose
    post = correct(predicted, m, a_i=EAST, o_i=13)
    assert np.allclose(post.probs, predicted / predicted.sum(), atol=1e-12)


def test_zero_likelihood_raises_and_fallback(task3_det):
    m = build_model(task3_det)
    geom = m.geom
    c00 = geom.cell_index[(0, 0)]
    predicted = np.zeros(m.n_joint)
    predicted[c00 * m.n_free + geom.cell_index[(2, 2)]] = 1.0
    wrong = int(geom.obs_code[c00]) ^ 0b10000
    with pytest.raises(ZeroLikelihoodError):
        correct(predicted, m, a_i=EAST, o_i=wrong)
    post = correct(predicted, m, a_i=EAST, o_i=wrong, on_zero="predicted")
    assert np.array_equal(post.probs, predicted)


def test_update_matches_flat_oracle_exhaustively(task4):
    m = build_model(task4)
    X = m.indicator
    T, _, _ = oracles.flat_tables(task4, oracles.regime(task4, "radius"))
    O = oracles.obs_table(task4)
    rng = np.random.default_rng(5)
    beliefs = [initial_belief(task4, m).probs, rng.dirichlet(np.ones(m.n_joint))]
    for bel in beliefs:
        for a_i in range(6):
            for a_j in range(6):
                for o in range(32):
                    expected, _ = oracles.flat_belief_update(bel, T, O, a_i, a_j, o)
                    if expected is None:
                        continue
                    got = update(Belief(probs=bel), m, X, a_i, o, a_j=a_j)
                    assert np.abs(got.probs - expected).max() < 1e-12


def test_update_strategy_mode_matches_flat_oracle(task4):
    m = build_model(task4)
    X = m.indicator
    T, _, _ = oracles.flat_tables(task4, oracles.regime(task4, "radius"))
    O = oracles.obs_table(task4)
    rng = np.random.default_rng(9)
    bel = rng.dirichlet(np.ones(m.n_joint))
    strat = rng.dirichlet(np.ones(6), size=m.n_joint)
    from sipl.solver import MixedStrategy
    pol = MixedStrategy(probs=strat, agent="j")
    for a_i in range(6):
        for o in (0, 5, 18, 31):
            expected, _ = oracles.flat_belief_update_strategy(bel, T, O, a_i, strat, o)
            if expected is None:
                continue
            got = update(Belief(probs=bel), m, X, a_i, o, opponent_strategy=pol)
            assert np.abs(got.probs - expected).max() < 1e-12


def test_identity_transition_uninformative_obs_fixed_point():
    task = make_task(obs_noise_move=0.5, obs_noise_listen=0.5,
                     support_i=((0, 0), (1, 0)), support_j=((2, 2), (2, 1)))
    m = build_model(task)
    b = initial_belief(task, m)
    # Listen never moves anyone; noise 0.5 carries no information
    out = update(b, m, m.indicator, LISTEN, 21, a_j=LISTEN)
    assert np.allclose(out.probs, b.probs, atol=1e-15)


def test_support_shrinks_under_deterministic_motion():
    task = make_task(n=4, move_success_prob=1.0, obs_noise_move=0.0,
                     obs_noise_listen=0.0, gold=(3, 3),
                     support_i=((0, 0), (0, 1), (1, 0), (1, 1)),
                     support_j=((3, 0), (3, 1)))
    m = build_model(task)
    X = m.indicator
    rng = derive_rng(42)
    b = initial_belief(task, m)
    sizes = [(b.probs > 0).sum()]
    for _ in range(10):
        a_i = int(rng.integers(6))
        a_j = int(rng.integers(6))
        mass = propagate(b, m, X, a_i, a_j=a_j)
        # draw an observation consistent with the prediction
        feasible = [o for o in range(32)
                    if (mass.reshape(m.n_free, m.n_free) * m.obs_i[:, a_i, o][:, None]).sum() > 0]
        o = feasible[int(rng.integers(len(feasible)))]
        b = correct(mass, m, a_i, o)
        sizes.append((b.probs > 0).sum())
    assert all(b <= a for a, b in zip(sizes, sizes[1:]))
    assert sizes[-1] < sizes[0]


def test_update_purity(task3):
    m = build_model(task3)
    b = initial_belief(task3, m)
    u1 = update(b, m, m.indicator, EAST, 18, a_j=LISTEN)
    u2 = update(b, m, m.indicator, EAST, 18, a_j=LISTEN)
    assert np.array_equal(u1.probs, u2.probs)


@settings(max_examples=20, deadline=None)
@given(alpha=st.floats(min_value=0.0, max_value=1.0),
       seed=st.integers(min_value=0, max_value=10_000))
def test_propagate_linear_in_belief(alpha, seed):
    task = make_task()
    m = build_model(task)
    X = m.indicator
    rng = np.random.default_rng(seed)
    b1 = rng.dirichlet(np.ones(m.n_joint))
    b2 = rng.dirichlet(np.ones(m.n_joint))
    mix = alpha * b1 + (1 - alpha) * b2
    got = propagate(Belief(probs=mix), m, X, EAST, a_j=NORTH)
    parts = (alpha * propagate(Belief(probs=b1), m, X, EAST, a_j=NORTH)
             + (1 - alpha) * propagate(Belief(probs=b2), m, X, EAST, a_j=NORTH))
    assert np.abs(got - parts).max() < 1e-12
