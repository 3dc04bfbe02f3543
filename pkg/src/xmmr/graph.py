"""Cross-modal similarity matrices: label agreement and online mini-batch kNN."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .nd_core import ShapeError


@dataclass
class SimilarityMatrix:
    entries: np.ndarray  # uint8, image index x text index
    kind: str  # "labeled_C" or "unlabeled_A"

    @property
    def shape(self):
        return self.entries.shape


@dataclass
class NeighborSet:
    owner: int
    modality: str
    neighbors: np.ndarray

    @property
    def k(self):
        return len(self.neighbors)


def labeled_similarity(labels_img, labels_txt):
    """``C[p, q] = 1`` iff image p and text q carry the same label."""
    li = np.asarray(labels_img).reshape(-1)
    lt = np.asarray(labels_txt).reshape(-1)
    if li.size == 0 or lt.size == 0:
        raise ValueError("label vectors must be nonempty")
    return SimilarityMatrix((li[:, None] == lt[None, :]).astype(np.uint8), "labeled_C")


def pairwise_sq_dist(X, Y):
    """Squared Euclidean distances, computed from explicit differences.

    Exact differences (rather than the ``|x|^2 - 2xy + |y|^2`` expansion) keep
    ties and uniform rescaling behaviour faithful for the tie-break contract.
    """
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def knn_index_arrays(S_img, S_txt, k):
    """Return ``(nn_of_img, nn_of_txt)`` index arrays of shape (n_img, k') and (n_txt, k'')."""
    S_img = np.asarray(S_img, dtype=np.float64)
    S_txt = np.asarray(S_txt, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if S_img.ndim != 2 or S_txt.ndim != 2 or S_img.shape[1] != S_txt.shape[1]:
        raise ShapeError(f"incompatible shapes {S_img.shape} and {S_txt.shape}")
    if S_img.shape[0] == 0 or S_txt.shape[0] == 0:
        return (np.empty((S_img.shape[0], 0), dtype=np.intp),
                np.empty((S_txt.shape[0], 0), dtype=np.intp))
    d = np.ascontiguousarray(pairwise_sq_dist(S_img, S_txt))
    return kernels.knn_indices(d, k), kernels.knn_indices(np.ascontiguousarray(d.T), k)


def knn_cross_modal(S_img, S_txt, k):
    """k nearest opposite-modality neighbours for every image and every text."""
    nn_img, nn_txt = knn_index_arrays(S_img, S_txt, k)
    return ([NeighborSet(p, "image", nn_img[p]) for p in range(nn_img.shape[0])],
            [NeighborSet(q, "text", nn_txt[q]) for q in range(nn_txt.shape[0])])


def unlabeled_similarity(S_img_u, S_txt_u, k):
    """``A[p, q] = 1`` iff image p is among text q's kNN or text q is among image p's kNN.

    Both inputs are the unlabeled slice of one mini-batch; rows share indices.
    """
    S_img_u = np.asarray(S_img_u, dtype=np.float64)
    S_txt_u = np.asarray(S_txt_u, dtype=np.float64)
    A = np.zeros((S_img_u.shape[0], S_txt_u.shape[0]), dtype=np.uint8)
    if A.size == 0:
        return SimilarityMatrix(A, "unlabeled_A")
    nn_img, nn_txt = knn_index_arrays(S_img_u, S_txt_u, k)
    rows = np.arange(A.shape[0])[:, None]
    A[np.broadcast_to(rows, nn_img.shape), nn_img] = 1
    cols = np.arange(A.shape[1])[:, None]
    A[nn_txt, np.broadcast_to(cols, nn_txt.shape)] = 1
    return SimilarityMatrix(A, "unlabeled_A")
