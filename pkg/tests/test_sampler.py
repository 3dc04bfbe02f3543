import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xmmr.graph import labeled_similarity, unlabeled_similarity
from xmmr.sampler import (MiniBatch, Quadruplet, as_quadruplets, is_valid_quadruplet,
                          make_minibatch, sample_quadruplets, select_pairs)


def pools(n_rows=40, n_lab=20):
    r = np.random.default_rng(0)
    S = r.normal(size=(n_rows, 3))
    labels = r.integers(0, 3, n_rows)
    return S, S + 0.1, labels, np.arange(n_lab), np.arange(n_lab, n_rows)


def test_minibatch_m_equals_n():
    Si, St, lab, lp, up = pools()
    b = make_minibatch(Si, St, lab, lp, up, 8, 8, np.random.default_rng(1))
    assert b.n == 8 and b.m == 8 and b.labels.size == 8
    np.testing.assert_array_equal(b.labels, lab[b.rows])


def test_minibatch_m_zero():
    Si, St, lab, lp, up = pools()
    b = make_minibatch(Si, St, lab, lp, up, 0, 6, np.random.default_rng(1))
    assert b.m == 0 and b.labels.size == 0 and np.all(b.rows >= 20)
    assert sample_quadruplets(b.labels, 5, np.random.default_rng(0)).shape == (0, 4)


def test_minibatch_deterministic_and_disjoint():
    Si, St, lab, lp, up = pools()
    a = make_minibatch(Si, St, lab, lp, up, 5, 12, np.random.default_rng(3))
    b = make_minibatch(Si, St, lab, lp, up, 5, 12, np.random.default_rng(3))
    np.testing.assert_array_equal(a.rows, b.rows)
    assert len(set(a.rows)) == 12
    assert np.all(a.rows[:5] < 20) and np.all(a.rows[5:] >= 20)
    np.testing.assert_array_equal(a.S_img, Si[a.rows])


def test_minibatch_errors():
    Si, St, lab, lp, up = pools()
    with pytest.raises(ValueError):
        make_minibatch(Si, St, lab, lp, up, 9, 8, np.random.default_rng(0))
    with pytest.raises(ValueError):
        make_minibatch(Si, St, lab, lp, up, 30, 31, np.random.default_rng(0))
    with pytest.raises(ValueError):
        MiniBatch(np.zeros((3, 2)), np.zeros((2, 2)), [1], 1)


def _batch(labels, n_unlab=0, seed=0):
    r = np.random.default_rng(seed)
    m = len(labels)
    n = m + n_unlab
    return MiniBatch(r.normal(size=(n, 2)), r.normal(size=(n, 2)), labels, m)


def _A(batch, k=1):
    return unlabeled_similarity(batch.S_img[batch.m:], batch.S_txt[batch.m:], k)


def test_pairs_all_similar():
    b = _batch([4, 4, 4])
    sel = select_pairs(b, labeled_similarity(b.labels, b.labels), _A(b), np.random.default_rng(0))
    assert len(sel) == 6 and sel.similar.all() and sel.labeled.all()


def test_pairs_two_by_two():
    b = _batch([0, 0, 1, 1])
    C = labeled_similarity(b.labels, b.labels)
    sel = select_pairs(b, C, _A(b), np.random.default_rng(0))
    # 8 anchors (4 images, 4 texts) x (1 similar + 1 dissimilar)
    assert len(sel) == 16
    assert sel.similar.sum() == 8
    for i, t, s, _ in sel.as_tuples():
        assert C.entries[i, t] == s


def test_pairs_unlabeled_follow_A():
    b = _batch([0, 1], n_unlab=6, seed=2)
    C = labeled_similarity(b.labels, b.labels)
    A = _A(b, k=2)
    sel = select_pairs(b, C, A, np.random.default_rng(5))
    for i, t, s, lab in sel.as_tuples():
        if lab:
            assert i < 2 and t < 2 and C.entries[i, t] == s
        else:
            assert i >= 2 and t >= 2 and A.entries[i - 2, t - 2] == s


def test_quads_two_labels():
    q = sample_quadruplets(["A", "B"], 1, np.random.default_rng(0))
    assert q.shape == (1, 4)
    i_p, t_p, i_m, t_m = q[0]
    assert i_p == t_p and i_m == t_m and i_p != i_m


def test_quads_single_class(caplog):
    assert sample_quadruplets([2, 2, 2], 10, np.random.default_rng(0)).shape == (0, 4)
    assert "2 classes" in caplog.text


def test_validity_helper():
    assert is_valid_quadruplet(Quadruplet(0, 1, 2, 3), [0, 0, 1, 1])
    assert not is_valid_quadruplet(Quadruplet(0, 2, 1, 3), [0, 0, 1, 1])
    assert not is_valid_quadruplet(Quadruplet(0, 1, 2, 9), [0, 0, 1, 1])
    assert as_quadruplets([[0, 1, 2, 3]]) == [Quadruplet(0, 1, 2, 3)]


@settings(max_examples=50, deadline=None)
@given(labels=st.lists(st.integers(0, 4), min_size=2, max_size=30), seed=st.integers(0, 2**31))
def test_quads_always_valid(labels, seed):
    q = sample_quadruplets(labels, 50, np.random.default_rng(seed))
    if len(set(labels)) < 2:
        assert q.shape == (0, 4)
    else:
        assert q.shape == (50, 4)
        assert all(is_valid_quadruplet(x, labels) for x in as_quadruplets(q))


def test_quads_uniform_over_valid_tuples():
    labels = [0, 0, 0, 1]
    # valid tuples: class 0 anchor 9*1 = 9, class 1 anchor 1*9 = 9, so 18 in total
    q = sample_quadruplets(labels, 18000, np.random.default_rng(0))
    _, counts = np.unique(q, axis=0, return_counts=True)
    assert counts.size == 18
    assert abs(counts - 1000).max() < 5 * np.sqrt(1000)
