"""Cosine-distance cross-modal ranking and MAP evaluation (all results and top-k)."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .nd_core import ShapeError

TASKS = ("img2txt", "txt2img")
SCOPES = ("all", "top50")


class ZeroNormError(ValueError):
    def __init__(self, which, row):
        super().__init__(f"{which} row {row} has zero norm; cosine distance undefined")
        self.which = which
        self.row = row


@dataclass
class RankedList:
    query_id: int
    order: np.ndarray
    distances: np.ndarray  # in ranked order


@dataclass
class MapReport:
    task: str
    scope: str
    map_score: float
    ap: np.ndarray

    def line(self):
        return f"{self.task},{self.scope},{self.map_score:.4f}"


def _normalize_rows(X, which):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ZeroNormError(which, int(bad[0]))
    return X / norms[:, None]


def cosine_distance(a, b):
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ZeroNormError("query" if na == 0 else "candidate", 0)
    return float(np.clip(1.0 - np.dot(a, b) / (na * nb), 0.0, 2.0))


def cosine_distance_matrix(Q, Cand):
    Qn = _normalize_rows(Q, "query")
    Cn = _normalize_rows(Cand, "candidate")
    if Qn.shape[1] != Cn.shape[1]:
        raise ShapeError(f"dimension mismatch {Qn.shape[1]} vs {Cn.shape[1]}")
    return np.clip(1.0 - Qn @ Cn.T, 0.0, 2.0)


def rank(query, candidates, query_id=0):
    """Candidates sorted by ascending cosine distance; ties keep index order."""
    cand = np.asarray(candidates, dtype=np.float64)
    if cand.ndim != 2 or cand.shape[0] == 0:
        raise ShapeError("candidates must be a nonempty matrix")
    d = cosine_distance_matrix(query, cand)[0]
    order = np.argsort(d, kind="stable")
    return RankedList(query_id, order, d[order])


def average_precision(ranked, relevance, cutoff=None, total_norm=False):
    """AP of one ranked list.

    ``relevance`` is indexed by candidate id. With a cutoff, the sum runs over
    the first ``cutoff`` positions and is normalized by the relevant items
    found there, or by all relevant items when ``total_norm`` is set.
    """
    rel = np.asarray(relevance).astype(bool)
    order = ranked.order if isinstance(ranked, RankedList) else np.asarray(ranked)
    if rel.size != order.size:
        raise ShapeError("relevance length must equal candidate count")
    return kernels.average_precision(rel[order], -1 if cutoff is None else int(cutoff), total_norm)


def _task_reports(Qq, Qc, lq, lc, task, cutoff, total_norm):
    if Qq.shape[0] == 0 or Qc.shape[0] == 0:
        raise ValueError("empty test set")
    d = np.ascontiguousarray(cosine_distance_matrix(Qq, Qc))
    rel = np.asarray(lq)[:, None] == np.asarray(lc)[None, :]
    out = []
    for scope, cut in (("all", -1), ("top50", cutoff)):
        ap = kernels.ap_rows(d, rel, cut, total_norm)
        out.append(MapReport(task, scope, float(np.mean(ap)), ap))
    return out


def evaluate(Q_img, Q_txt, labels_img, labels_txt, cutoff=50, ap_norm="relevant_in_cutoff"):
    """Four MAP reports: (img2txt, txt2img) x (all, top50)."""
    if ap_norm not in ("relevant_in_cutoff", "total_relevant"):
        raise ValueError(f"unknown ap_norm {ap_norm!r}")
    total_norm = ap_norm == "total_relevant"
    Q_img = np.asarray(Q_img, dtype=np.float64)
    Q_txt = np.asarray(Q_txt, dtype=np.float64)
    if Q_img.shape[0] != len(labels_img) or Q_txt.shape[0] != len(labels_txt):
        raise ShapeError("label vectors must align with embedding rows")
    return (_task_reports(Q_img, Q_txt, labels_img, labels_txt, "img2txt", cutoff, total_norm)
            + _task_reports(Q_txt, Q_img, labels_txt, labels_img, "txt2img", cutoff, total_norm))


def average_map(reports, scope="all"):
    """Mean of the img2txt and txt2img MAPs for one scope."""
    return float(np.mean([r.map_score for r in reports if r.scope == scope]))


def format_reports(reports):
    return "task,scope,map\n" + "".join(r.line() + "\n" for r in reports)
