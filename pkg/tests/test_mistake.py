import itertools

import numpy as np
import pytest

from mistake_pressure import kernels
from mistake_pressure.mistake import (
    MistakeFunction,
    are_g_separated,
    brute_force_ball_and_separation,
    eval_mistake,
    in_mistake_ball,
    mismatch_array,
    mismatch_profile,
    mistake_ball_members,
)
from mistake_pressure.symbolic import EpsilonWindow, admissible_words, bowen_distance, full_shift, pack_words

W1 = EpsilonWindow.from_window(1)


def test_eval_examples():
    assert eval_mistake(MistakeFunction.constant(3), 10, 0.3) == 3
    assert eval_mistake(MistakeFunction.power(1, 0.5), 16) == 4
    g = MistakeFunction.constant(2, epsilon0=0.5)
    assert eval_mistake(g, 7, 0.9) == eval_mistake(g, 7, 0.5)
    assert eval_mistake(MistakeFunction.logarithmic(1), 1) == 0
    assert eval_mistake(MistakeFunction.logarithmic(2), 100) == 9
    assert MistakeFunction.constant(1).scaled(2)(5) == 2


def test_mistake_validation():
    with pytest.raises(ValueError):
        MistakeFunction("quadratic")
    with pytest.raises(ValueError):
        MistakeFunction.power(1, 1.0)
    with pytest.raises(ValueError):
        MistakeFunction.constant(-1)
    with pytest.raises(ValueError):
        eval_mistake(MistakeFunction.zero(), 0)


def test_sublinearity_surrogate():
    for g in (MistakeFunction.zero(), MistakeFunction.constant(4), MistakeFunction.logarithmic(2),
              MistakeFunction.power(1, 0.5), MistakeFunction.power(3, 0.9)):
        assert g.is_sublinear()


def test_profile_examples():
    assert mismatch_profile("00000000", "00000000", 8, W1).mismatch_count == 0
    p = mismatch_profile("0000", "0101", 4, W1)
    assert (p.mismatch_count, p.match_count_strict) == (2, 2)
    assert mismatch_profile("0000", "1111", 4, W1).mismatch_count == 4
    with pytest.raises(ValueError):
        mismatch_profile("000", "000", 3, EpsilonWindow.from_window(2))


def test_ball_and_separation_examples():
    g1, g2 = MistakeFunction.constant(1), MistakeFunction.constant(2)
    assert in_mistake_ball("0000", "0101", 4, W1, g2)
    assert not in_mistake_ball("0000", "0101", 4, W1, g1)
    assert are_g_separated("0000", "0101", 4, W1, g1)
    assert not are_g_separated("0000", "0001", 4, W1, g1)


def test_zero_g_is_bowen_ball():
    z = MistakeFunction.zero()
    for w in (1, 2):
        eps = EpsilonWindow.from_window(w)
        words = admissible_words(full_shift(2), 4 + w)
        for x, y in itertools.product(words[::3], words):
            d = bowen_distance(x, y, 4)
            assert in_mistake_ball(x, y, 4, eps, z) == (d < eps.epsilon)
            assert are_g_separated(x, y, 4, eps, z) == (d > eps.epsilon)


@pytest.mark.parametrize("n,w", [(1, 1), (2, 1), (3, 2), (4, 1), (5, 2), (6, 1)])
def test_brute_force_equivalence(n, w):
    eps = EpsilonWindow.from_window(w)
    words = admissible_words(full_shift(2), n + w - 1)
    for c in (0, 1, 2, 3):
        g = MistakeFunction.constant(c)
        for x, y in itertools.product(words, words):
            ball, sep = brute_force_ball_and_separation(x, y, n, eps, g)
            assert ball == in_mistake_ball(x, y, n, eps, g)
            assert sep == are_g_separated(x, y, n, eps, g)


def test_ball_members_examples():
    words = admissible_words(full_shift(2), 4)
    assert mistake_ball_members("0000", words, 4, W1, MistakeFunction.constant(4)) == words
    got = mistake_ball_members("0000", words, 4, W1, MistakeFunction.zero())
    assert [str(w) for w in got] == ["0000"]
    assert mistake_ball_members("0000", [], 4, W1, MistakeFunction.zero()) == []
    eps2 = EpsilonWindow.from_window(2)
    long = admissible_words(full_shift(2), 5)
    got = mistake_ball_members("00000", long, 4, eps2, MistakeFunction.zero())
    assert [str(w) for w in got] == ["00000"]


def test_kernel_counts_match_unpacked_oracle():
    rng = np.random.default_rng(7)
    for k in (2, 3, 5):
        words = rng.integers(0, k, size=(300, 20)).astype(np.uint8)
        table = pack_words(words, k)
        for n, w in ((1, 1), (5, 3), (12, 9), (20, 1)):
            if n + w - 1 > 20:
                continue
            for c in range(0, 300, 37):
                got = kernels.mismatch_counts(table[c], table, n, w)
                np.testing.assert_array_equal(got, mismatch_array(words[c], words, n, w))
