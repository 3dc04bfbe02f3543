"""Mini-batch assembly, balanced pair selection and quadruplet sampling."""
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)


@dataclass
class MiniBatch:
    S_img: np.ndarray
    S_txt: np.ndarray
    labels: np.ndarray  # length m, for rows 0..m-1
    m: int
    rows: np.ndarray = None  # dataset row ids, for bookkeeping

    @property
    def n(self):
        return self.S_img.shape[0]

    def __post_init__(self):
        self.labels = np.asarray(self.labels).reshape(-1)
        if self.S_img.shape[0] != self.S_txt.shape[0]:
            raise ValueError("image and text slices must be row aligned")
        if not 0 <= self.m <= self.n or self.labels.size != self.m:
            raise ValueError(f"need 0 <= m <= n and m labels (m={self.m}, n={self.n}, "
                             f"labels={self.labels.size})")


@dataclass
class PairSelection:
    img: np.ndarray
    txt: np.ndarray
    similar: np.ndarray
    labeled: np.ndarray

    def __len__(self):
        return int(self.img.size)

    def as_tuples(self):
        return list(zip(self.img.tolist(), self.txt.tolist(),
                        self.similar.astype(int).tolist(), self.labeled.astype(int).tolist()))


@dataclass(frozen=True)
class Quadruplet:
    i_plus: int
    t_plus: int
    i_minus: int
    t_minus: int


def is_valid_quadruplet(q, labels):
    """Both relative-similarity constraints hold and every index is labeled."""
    lab = np.asarray(labels)
    idx = (q.i_plus, q.t_plus, q.i_minus, q.t_minus)
    if min(idx) < 0 or max(idx) >= lab.size:
        return False
    return (lab[q.i_plus] == lab[q.t_plus]
            and lab[q.i_minus] != lab[q.t_plus]
            and lab[q.t_minus] != lab[q.i_plus])


def make_minibatch(S_img, S_txt, labels, labeled_pool, unlabeled_pool, m, n, rng):
    """Draw ``m`` labeled rows then ``n - m`` unlabeled rows without replacement.

    ``labeled_pool`` / ``unlabeled_pool`` are dataset row ids; ``labels`` is
    indexed by dataset row id.
    """
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n, got m={m}, n={n}")
    labeled_pool = np.asarray(labeled_pool, dtype=np.intp)
    unlabeled_pool = np.asarray(unlabeled_pool, dtype=np.intp)
    if labeled_pool.size < m or unlabeled_pool.size < n - m:
        raise ValueError(
            f"insufficient pool: need {m} labeled / {n - m} unlabeled, have "
            f"{labeled_pool.size} / {unlabeled_pool.size}")
    rows = np.concatenate([
        rng.choice(labeled_pool, size=m, replace=False),
        rng.choice(unlabeled_pool, size=n - m, replace=False),
    ]).astype(np.intp)
    return MiniBatch(S_img[rows], S_txt[rows], np.asarray(labels)[rows[:m]], m, rows)


def select_pairs(batch, C, A, rng):
    """One random similar and one random dissimilar partner per anchor.

    Anchors are every image row and every text row. Labeled anchors pick
    partners among labeled rows through ``C``; unlabeled anchors pick among
    unlabeled rows through ``A``. A kind with no candidate is skipped.
    """
    m, n = batch.m, batch.n
    img, txt, sim, lab = [], [], [], []
    for block, offset, size, labeled in ((C, 0, m, 1), (A, m, n - m, 0)):
        if size == 0:
            continue
        E = np.ascontiguousarray(block.entries, dtype=np.uint8)
        for is_image, M in ((True, E), (False, np.ascontiguousarray(E.T))):
            picks = kernels.pick_partners(M, rng.random((size, 2)))
            anchors = np.arange(size)
            for col, flag in ((0, 1), (1, 0)):
                ok = picks[:, col] >= 0
                a_idx = anchors[ok] + offset
                p_idx = picks[ok, col] + offset
                img.append(a_idx if is_image else p_idx)
                txt.append(p_idx if is_image else a_idx)
                sim.append(np.full(a_idx.size, flag, dtype=np.uint8))
                lab.append(np.full(a_idx.size, labeled, dtype=np.uint8))
    if not img:
        empty = np.empty(0, dtype=np.intp)
        return PairSelection(empty, empty.copy(), np.empty(0, np.uint8), np.empty(0, np.uint8))
    return PairSelection(np.concatenate(img).astype(np.intp), np.concatenate(txt).astype(np.intp),
                         np.concatenate(sim), np.concatenate(lab))


def sample_quadruplets(labels, count, rng):
    """Draw ``count`` quadruplets uniformly from all valid index tuples.

    For anchor class c with n_c members among the m labeled rows there are
    n_c^2 (m - n_c)^2 valid tuples, so c is drawn with that weight and the four
    members uniformly inside / outside c. Returns an int array of shape
    (count, 4); empty when fewer than two classes are present.
    """
    labels = np.asarray(labels).reshape(-1)
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if classes.size < 2:
        log.warning("quadruplet sampling needs >= 2 classes among labeled rows; got %d",
                    classes.size)
        return np.empty((0, 4), dtype=np.intp)
    m = labels.size
    weights = counts.astype(np.float64) ** 2 * (m - counts).astype(np.float64) ** 2
    weights /= weights.sum()
    members = [np.flatnonzero(inverse == c) for c in range(classes.size)]
    others = [np.flatnonzero(inverse != c) for c in range(classes.size)]
    cls = rng.choice(classes.size, size=count, p=weights)
    u = rng.random((count, 4))
    out = np.empty((count, 4), dtype=np.intp)
    for c in np.unique(cls):
        rows = np.flatnonzero(cls == c)
        inside, outside = members[c], others[c]
        for col, pool in ((0, inside), (1, inside), (2, outside), (3, outside)):
            out[rows, col] = pool[(u[rows, col] * pool.size).astype(np.intp)]
    return out


def as_quadruplets(arr):
    return [Quadruplet(*map(int, row)) for row in np.asarray(arr).reshape(-1, 4)]
