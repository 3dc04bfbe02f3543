"""Semi-supervised contrastive loss and quadruplet ranking loss with exact gradients.

Embeddings arrive as two row-aligned matrices: ``F`` holds image-pathway
outputs and ``G`` text-pathway outputs. Gradients come back with the same
shapes so the network can backpropagate them row by row.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .nd_core import ShapeError

CONTRASTIVE_VARIANTS = {"squared": kernels.SQUARED, "hadsell": kernels.HADSELL}


@dataclass
class ContrastiveConfig:
    margin_alpha: float = 1.0
    # "squared": hinge on squared distance (the objective as written).
    # "hadsell": 0.5*d^2 / 0.5*max(0, alpha - d)^2, experimental.
    variant: str = "squared"

    def __post_init__(self):
        if not np.isfinite(self.margin_alpha) or self.margin_alpha < 0:
            raise ValueError("margin_alpha must be finite and >= 0")
        if self.variant not in CONTRASTIVE_VARIANTS:
            raise ValueError(f"unknown contrastive variant {self.variant!r}")


@dataclass
class QuadrupletConfig:
    margin_beta: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.margin_beta) or self.margin_beta < 0:
            raise ValueError("margin_beta must be finite and >= 0")


@dataclass
class LossGradients:
    grad_f: np.ndarray
    grad_g: np.ndarray
    loss_value: float
    count: int = 0  # number of pair / quadruplet terms that entered the loss

    def scaled(self, w):
        return LossGradients(self.grad_f * w, self.grad_g * w, self.loss_value * w, self.count)


def _vec(x):
    return np.asarray(x, dtype=np.float64).reshape(-1)


def contrastive_pair_loss(f_p, g_q, similar, cfg=None):
    cfg = cfg or ContrastiveConfig()
    f, g = _vec(f_p), _vec(g_q)
    if f.shape != g.shape:
        raise ShapeError(f"dimension mismatch {f.shape} vs {g.shape}")
    loss, _, _ = kernels.pair_loss_grad(
        f.reshape(1, -1), g.reshape(1, -1), [0], [0], [bool(similar)],
        float(cfg.margin_alpha), CONTRASTIVE_VARIANTS[cfg.variant])
    return loss


def _check_embeddings(F, G):
    F = np.ascontiguousarray(F, dtype=np.float64)
    G = np.ascontiguousarray(G, dtype=np.float64)
    if F.ndim != 2 or F.shape != G.shape:
        raise ShapeError(f"embedding batches must share a 2-D shape, got {F.shape} and {G.shape}")
    return F, G


def semi_supervised_loss(F, G, C, A, pairs, m, cfg=None, reduction="sum"):
    """Contrastive loss over the selected labeled and unlabeled pairs.

    Parameters
    ----------
    F, G : (n, d) arrays
        Image and text embeddings of the mini-batch; rows ``< m`` are labeled.
    C : SimilarityMatrix
        Label similarity over the labeled slice, shape (m, m).
    A : SimilarityMatrix
        kNN similarity over the unlabeled slice, shape (n - m, n - m).
    pairs : PairSelection
        Selected (image, text) batch indices with their labeled flag. The
        similar/dissimilar decision is read from ``C`` or ``A``.
    reduction : {"sum", "mean"}
        ``"mean"`` divides loss and gradients by the number of pairs.
    """
    cfg = cfg or ContrastiveConfig()
    F, G = _check_embeddings(F, G)
    n = F.shape[0]
    img = np.asarray(pairs.img, dtype=np.intp)
    txt = np.asarray(pairs.txt, dtype=np.intp)
    labeled = np.asarray(pairs.labeled, dtype=bool)
    if img.size == 0:
        return LossGradients(np.zeros_like(F), np.zeros_like(G), 0.0, 0)
    if img.min() < 0 or txt.min() < 0 or img.max() >= n or txt.max() >= n:
        raise IndexError("pair index outside the mini-batch")
    both_labeled = (img < m) & (txt < m)
    both_unlabeled = (img >= m) & (txt >= m)
    if np.any(labeled & ~both_labeled) or np.any(~labeled & ~both_unlabeled):
        raise IndexError("labeled pairs must lie in rows < m and unlabeled pairs in rows >= m")
    similar = np.empty(img.size, dtype=bool)
    if labeled.any():
        similar[labeled] = C.entries[img[labeled], txt[labeled]].astype(bool)
    if (~labeled).any():
        similar[~labeled] = A.entries[img[~labeled] - m, txt[~labeled] - m].astype(bool)
    loss, gF, gG = kernels.pair_loss_grad(
        F, G, img, txt, similar, float(cfg.margin_alpha), CONTRASTIVE_VARIANTS[cfg.variant])
    out = LossGradients(gF, gG, loss, int(img.size))
    if reduction == "mean":
        out = out.scaled(1.0 / img.size)
    elif reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return out


def _quad_argument(ip, tp, im, tm, beta):
    return (2.0 * np.dot(ip - tp, ip - tp) - np.dot(ip - tm, ip - tm)
            - np.dot(im - tp, im - tp) + beta)


def quadruplet_loss(i_plus, t_plus, i_minus, t_minus, cfg=None):
    cfg = cfg or QuadrupletConfig()
    vs = [_vec(v) for v in (i_plus, t_plus, i_minus, t_minus)]
    if len({v.shape for v in vs}) != 1:
        raise ShapeError("quadruplet members must share one dimension")
    return max(0.0, float(_quad_argument(*vs, cfg.margin_beta)))


def quadruplet_grad(i_plus, t_plus, i_minus, t_minus, cfg=None):
    """Gradients for one quadruplet.

    ``grad_f`` rows are (d/d i+, d/d i-) and ``grad_g`` rows are
    (d/d t+, d/d t-). All four are zero unless the hinge argument is > 0.
    """
    cfg = cfg or QuadrupletConfig()
    ip, tp, im, tm = (_vec(v) for v in (i_plus, t_plus, i_minus, t_minus))
    if not ip.shape == tp.shape == im.shape == tm.shape:
        raise ShapeError("quadruplet members must share one dimension")
    F = np.vstack([ip, im])
    G = np.vstack([tp, tm])
    loss, gF, gG, active = kernels.quad_loss_grad(F, G, [[0, 0, 1, 1]], float(cfg.margin_beta))
    return LossGradients(gF, gG, loss, active)


def quadruplet_batch_loss(F, G, quads, cfg=None, reduction="sum"):
    """Quadruplet loss summed (or averaged) over index tuples into a mini-batch."""
    cfg = cfg or QuadrupletConfig()
    F, G = _check_embeddings(F, G)
    q = np.asarray(quads, dtype=np.intp).reshape(-1, 4)
    if q.shape[0] == 0:
        return LossGradients(np.zeros_like(F), np.zeros_like(G), 0.0, 0)
    if q.min() < 0 or q.max() >= F.shape[0]:
        raise IndexError("quadruplet index outside the mini-batch")
    loss, gF, gG, _ = kernels.quad_loss_grad(F, G, q, float(cfg.margin_beta))
    out = LossGradients(gF, gG, loss, int(q.shape[0]))
    if reduction == "mean":
        out = out.scaled(1.0 / q.shape[0])
    elif reduction != "sum":
        raise ValueError(f"unknown reduction {reduction!r}")
    return out


def multitask_combine(semi, quad, w_semi=1.0, w_quad=1.0):
    if semi.grad_f.shape != quad.grad_f.shape or semi.grad_g.shape != quad.grad_g.shape:
        raise ShapeError("branch gradients must share shapes")
    return LossGradients(
        w_semi * semi.grad_f + w_quad * quad.grad_f,
        w_semi * semi.grad_g + w_quad * quad.grad_g,
        w_semi * semi.loss_value + w_quad * quad.loss_value,
        semi.count + quad.count,
    )
