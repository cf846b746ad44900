from fractions import Fraction

import pytest

from probreach.dice import dice_state_count, generate_dice_model
from probreach.model import ModelConsistencyError, VariableLimitError, parse_model, validate_stochastic
from probreach.oracle import (
    _gauss_jordan,
    enumerate_danger_paths,
    explicate,
    post_star,
    pre_star,
    random_model,
    reach_probabilities,
    reach_probability,
)

from conftest import s

F = Fraction


def test_chain4_explicit(chain4):
    e = explicate(chain4)
    assert e.edge_count == 7
    assert e.bad == {s("11")}
    assert e.probability(s("10"), s("11")) == F(1, 5)
    assert not e.mass_errors


def test_chain4_probability(chain4):
    assert reach_probability(explicate(chain4)) == F(1, 5)
    probs = reach_probabilities(explicate(chain4))
    assert probs == {s("00"): F(1, 5), s("01"): 0, s("10"): F(2, 5), s("11"): 1}


def test_pre_and_post(chain4):
    e = explicate(chain4)
    assert pre_star(e, e.bad) == {s("00"), s("10"), s("11")}
    assert post_star(e, [e.init]) == {0, 1, 2, 3}
    assert post_star(e, [s("01")]) == {s("01")}


def test_danger_paths(chain4):
    e = explicate(chain4)
    two = enumerate_danger_paths(e, 2)
    assert [(p.states, p.probability) for p in two] == [((s("00"), s("10"), s("11")), F(1, 10))]
    three = enumerate_danger_paths(e, 3)
    assert [p.probability for p in three] == [F(1, 10), F(1, 20)]
    assert enumerate_danger_paths(e, 1) == []
    mass = sum(p.probability for p in enumerate_danger_paths(e, 40))
    assert mass <= F(1, 5) and F(1, 5) - mass < F(1, 1000)
    with pytest.raises(ValueError):
        enumerate_danger_paths(e, 0)


def test_var_limit():
    init = " ".join(str(-v) for v in range(1, 22))
    m = parse_model(f"dtmc\nvars 21\ninit {init}\n")
    with pytest.raises(VariableLimitError):
        explicate(m)


def test_cross_check_catches_disagreement():
    m = parse_model("dtmc\nvars 1\ninit -1\nprob -1 | -1 : 1\nprob 1 | 1 : 1\ntrans -1 -2\n")
    with pytest.raises(ModelConsistencyError):
        explicate(m)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dice_all_six(n):
    m, p = generate_dice_model(n)
    e = explicate(m, p.bad_cubes)
    assert reach_probability(e) == F(1, 6 ** n)
    assert len(post_star(e, [e.init])) == dice_state_count(n)


@pytest.mark.slow
def test_dice_four():
    m, p = generate_dice_model(4)
    assert reach_probability(explicate(m, p.bad_cubes)) == F(1, 6 ** 4)


@pytest.mark.parametrize("n,k,pr", [
    (1, 1, F(1, 6)),
    (2, 1, F(11, 36)),
    (2, 2, F(1, 36)),
    (3, 1, F(91, 216)),
    (3, 2, F(16, 216)),
])
def test_dice_count_targets(n, k, pr):
    m, p = generate_dice_model(n, at_least=k)
    assert reach_probability(explicate(m, p.bad_cubes)) == pr


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dice_models_are_stochastic(n):
    assert validate_stochastic(generate_dice_model(n)[0]).ok


def test_dice_generator_rejects_bad_arguments():
    with pytest.raises(ValueError):
        generate_dice_model(0)
    with pytest.raises(ValueError):
        generate_dice_model(2, at_least=3)


def test_gauss_jordan_permutation_invariance():
    a = [[F(1), F(-1, 2), F(0)], [F(-1, 3), F(1), F(-1, 3)], [F(0), F(-1, 4), F(1)]]
    b = [F(1, 2), F(1, 3), F(1, 4)]
    x = _gauss_jordan(a, b)
    order = [2, 0, 1]
    y = _gauss_jordan([[a[i][j] for j in order] for i in order], [b[i] for i in order])
    assert [y[order.index(i)] for i in range(3)] == x
    assert all(sum(a[i][j] * x[j] for j in range(3)) == b[i] for i in range(3))


def test_random_model_is_deterministic():
    m1, p1 = random_model(42, num_vars=4)
    m2, p2 = random_model(42, num_vars=4)
    assert m1.trans == m2.trans and m1.prob_entries == m2.prob_entries
    assert p1 == p2
    assert validate_stochastic(m1).ok


@pytest.mark.parametrize("seed", range(30))
def test_random_model_threshold(seed):
    m, p = random_model(seed, num_vars=1 + seed % 6, edge_density=(seed % 5) / 4)
    pr = reach_probability(explicate(m, p.bad_cubes))
    assert 0 <= p.threshold <= 1
    if pr == 0:
        assert 0 < p.threshold <= F(1, 10)
    else:
        assert abs(p.threshold - pr) <= F(1, 10) or p.threshold in (F(1, 100), 1)


def test_random_model_limits():
    with pytest.raises(ValueError):
        random_model(0, num_vars=7)
