"""Pure numpy implementations of the hot kernels.

Mirror of ``_kernels.pyx``; used when the compiled extension is unavailable
or when ``XMMR_PURE_PYTHON=1``.
"""
import numpy as np

SQUARED = 0
HADSELL = 1


def pair_loss_grad(F, G, img_idx, txt_idx, similar, alpha, variant=SQUARED):
    """Summed contrastive loss over pairs, with gradients scattered per row.

    Returns ``(loss, grad_F, grad_G)``.
    """
    img_idx = np.asarray(img_idx, dtype=np.intp)
    txt_idx = np.asarray(txt_idx, dtype=np.intp)
    sim = np.asarray(similar, dtype=bool)
    D = F[img_idx] - G[txt_idx]
    sq = np.einsum("ij,ij->i", D, D)
    if variant == SQUARED:
        active = ~sim & (sq < alpha)
        losses = np.where(sim, sq, np.where(active, alpha - sq, 0.0))
        coef = np.where(sim, 2.0, np.where(active, -2.0, 0.0))
    elif variant == HADSELL:
        dist = np.sqrt(sq)
        active = ~sim & (dist < alpha) & (dist > 0)
        gap = alpha - dist
        losses = np.where(sim, 0.5 * sq, np.where(~sim & (dist < alpha), 0.5 * gap * gap, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(sim, 1.0, np.where(active, -gap / dist, 0.0))
    else:
        raise ValueError(f"unknown contrastive variant {variant}")
    gD = coef[:, None] * D
    gF = np.zeros_like(F)
    gG = np.zeros_like(G)
    np.add.at(gF, img_idx, gD)
    np.add.at(gG, txt_idx, -gD)
    return float(losses.sum()), gF, gG


def quad_loss_grad(F, G, quads, beta):
    """Summed quadruplet hinge loss; ``quads`` rows are (i+, t+, i-, t-).

    Returns ``(loss, grad_F, grad_G, n_active)``.
    """
    q = np.asarray(quads, dtype=np.intp).reshape(-1, 4)
    ip, tp, im, tm = F[q[:, 0]], G[q[:, 1]], F[q[:, 2]], G[q[:, 3]]
    a = ip - tp
    b = ip - tm
    c = im - tp
    arg = (2.0 * np.einsum("ij,ij->i", a, a) - np.einsum("ij,ij->i", b, b)
           - np.einsum("ij,ij->i", c, c) + beta)
    on = (arg > 0).astype(np.float64)[:, None]
    gF = np.zeros_like(F)
    gG = np.zeros_like(G)
    np.add.at(gF, q[:, 0], on * (2.0 * ip - 4.0 * tp + 2.0 * tm))
    np.add.at(gG, q[:, 1], on * (2.0 * tp - 4.0 * ip + 2.0 * im))
    np.add.at(gF, q[:, 2], on * (2.0 * tp - 2.0 * im))
    np.add.at(gG, q[:, 3], on * (2.0 * ip - 2.0 * tm))
    return float(np.maximum(arg, 0.0).sum()), gF, gG, int(on.sum())


def knn_indices(dist, k):
    """Indices of the ``k`` smallest entries per row; ties go to the lower index."""
    k = min(int(k), dist.shape[1])
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def rank_rows(dist):
    return np.argsort(dist, axis=1, kind="stable")


def average_precision(rel, cutoff=-1, total_norm=False):
    """AP of a binary relevance vector given in ranked order.

    Precisions are accumulated left to right so the result is reproducible
    bit for bit by a plain loop.
    """
    rel = np.asarray(rel).astype(bool)
    n_total = int(rel.sum())
    if cutoff is not None and cutoff >= 0:
        rel = rel[:cutoff]
    hits = np.cumsum(rel)
    pos = np.flatnonzero(rel)
    denom = n_total if total_norm else pos.size
    if denom == 0:
        return 0.0
    acc = 0.0
    for p in pos:
        acc += hits[p] / (p + 1.0)
    return acc / denom


def ap_rows(dist, rel_matrix, cutoff=-1, total_norm=False):
    order = rank_rows(dist)
    ranked = np.take_along_axis(np.asarray(rel_matrix, dtype=bool), order, axis=1)
    return np.array([average_precision(r, cutoff, total_norm) for r in ranked])


def pick_partners(E, u):
    """For each row of binary ``E`` pick one column with E == 1 and one with E == 0.

    ``u`` holds two uniforms in [0, 1) per row; the j-th candidate (in column
    order) with j = floor(u * count) is chosen. Returns (rows, 2) ints with
    -1 where a row has no candidate of that kind.
    """
    E = np.asarray(E).astype(bool)
    out = np.full((E.shape[0], 2), -1, dtype=np.intp)
    if E.shape[1] == 0:
        return out
    for col, mask in ((0, E), (1, ~E)):
        counts = mask.sum(axis=1)
        j = np.floor(u[:, col] * counts).astype(np.intp)
        csum = np.cumsum(mask, axis=1)
        pick = np.argmax(csum > j[:, None], axis=1)
        out[:, col] = np.where(counts > 0, pick, -1)
    return out
