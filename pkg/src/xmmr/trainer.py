"""Multi-task training loop for the metric network, plus the ablation driver."""
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import metric_net as mn
from .graph import labeled_similarity, unlabeled_similarity
from .losses import (ContrastiveConfig, LossGradients, QuadrupletConfig,
                     quadruplet_batch_loss, semi_supervised_loss)
from .nd_core import OptimizerConfig
from .sampler import make_minibatch, sample_quadruplets, select_pairs

log = logging.getLogger(__name__)

MODES = ("base", "semi_only", "quad_only", "full")


class DegenerateDataError(ValueError):
    pass


@dataclass
class TrainConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    net: mn.NetConfig = field(default_factory=mn.NetConfig)
    m: int = 64
    n: int = 128
    margin_alpha: float = 1.0
    margin_beta: float = 1.0
    contrastive_variant: str = "squared"
    graph_k: int = 5
    quad_count: int = None  # default: m
    w_semi: float = 1.0
    w_quad: float = 1.0
    reduction: str = "sum"  # or "mean"
    seed: int = 0
    early_stop: bool = False
    eval_every: int = 250
    patience: int = 5

    def __post_init__(self):
        if not (0 <= self.m <= self.n and self.n > 0):
            raise ValueError(f"need 0 <= m <= n, n > 0 (m={self.m}, n={self.n})")
        if self.margin_alpha < 0 or self.margin_beta < 0:
            raise ValueError("margins must be >= 0")
        if self.graph_k < 1:
            raise ValueError("graph_k must be >= 1")
        if self.reduction not in ("mean", "sum"):
            raise ValueError(f"unknown reduction {self.reduction!r}")

    @property
    def contrastive(self):
        return ContrastiveConfig(self.margin_alpha, self.contrastive_variant)

    @property
    def quadruplet(self):
        return QuadrupletConfig(self.margin_beta)


@dataclass
class TrainData:
    """Shallow representations of the whole training pool.

    ``labels`` is indexed by row; entries of rows in ``unlabeled_idx`` are
    never read.
    """
    S_img: np.ndarray
    S_txt: np.ndarray
    labels: np.ndarray
    labeled_idx: np.ndarray
    unlabeled_idx: np.ndarray


@dataclass
class TrainReport:
    semi: list = field(default_factory=list)
    quad: list = field(default_factory=list)
    total: list = field(default_factory=list)
    wall_clock: float = 0.0
    final_step: int = 0
    checkpoint_path: str = None
    val_map: list = field(default_factory=list)

    def rows(self):
        for i, (s, q, t) in enumerate(zip(self.semi, self.quad, self.total)):
            yield i + 1, s, q, t


@dataclass
class StepGrads:
    img: dict
    txt: dict
    semi: LossGradients
    quad: LossGradients

    @property
    def total(self):
        return self.semi.loss_value + self.quad.loss_value


def _streams(seed):
    init_ss, sample_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(sample_ss)


def init_state(img_dim, txt_dim, cfg, data=None):
    """Fresh model; with ``data`` and ``net.normalize_inputs`` the input
    normalizers are fitted on the whole training pool."""
    init_rng, _ = _streams(cfg.seed)
    state = mn.ModelState(mn.PathwayParams.init(img_dim, cfg.net, init_rng),
                          mn.PathwayParams.init(txt_dim, cfg.net, init_rng),
                          cfg.net, cfg.optimizer)
    if data is not None and cfg.net.normalize_inputs:
        pool = np.concatenate([data.labeled_idx, data.unlabeled_idx])
        state.image_pathway.fit_input_normalizer(data.S_img[pool])
        state.text_pathway.fit_input_normalizer(data.S_txt[pool])
    return state


def draw_step_inputs(data, cfg, rng, use_quad=True):
    batch = make_minibatch(data.S_img, data.S_txt, data.labels, data.labeled_idx,
                           data.unlabeled_idx, cfg.m, cfg.n, rng)
    m = batch.m
    C = labeled_similarity(batch.labels, batch.labels) if m > 0 else None
    A = unlabeled_similarity(batch.S_img[m:], batch.S_txt[m:], cfg.graph_k)
    pairs = select_pairs(batch, C, A, rng)
    count = cfg.quad_count if cfg.quad_count is not None else m
    if use_quad and m > 0:
        quads = sample_quadruplets(batch.labels, count, rng)
    else:
        quads = np.empty((0, 4), dtype=np.intp)
    return batch, C, A, pairs, quads


def step_grads(state, batch, C, A, pairs, quads, cfg, branches=("semi", "quad")):
    """Loss values and parameter gradients of one step for the requested branches.

    Each branch's loss is summed (or averaged, per ``cfg.reduction``) over its
    pairs / quadruplets and weighted.
    Gradients of different branches meet at the top of each trunk.
    """
    tc_i = mn.trunk_forward(state.image_pathway, batch.S_img)
    tc_t = mn.trunk_forward(state.text_pathway, batch.S_txt)
    outs_i, outs_t, g_i, g_t = {}, {}, {}, {}
    zero = LossGradients(np.zeros((batch.n, cfg.net.out_dim)),
                         np.zeros((batch.n, cfg.net.out_dim)), 0.0, 0)
    semi = quad = zero
    for branch in branches:
        outs_i[branch] = mn.head_forward(state.image_pathway, tc_i, branch)
        outs_t[branch] = mn.head_forward(state.text_pathway, tc_t, branch)
        if branch == "semi":
            semi = semi_supervised_loss(outs_i[branch], outs_t[branch], C, A, pairs, batch.m,
                                        cfg.contrastive, reduction=cfg.reduction).scaled(cfg.w_semi)
            lg = semi
        else:
            quad = quadruplet_batch_loss(outs_i[branch], outs_t[branch], quads, cfg.quadruplet,
                                         reduction=cfg.reduction).scaled(cfg.w_quad)
            lg = quad
        g_i[branch] = lg.grad_f
        g_t[branch] = lg.grad_g
    img = mn.multibranch_backward(state.image_pathway, tc_i, outs_i, g_i)
    txt = mn.multibranch_backward(state.text_pathway, tc_t, outs_t, g_t)
    return StepGrads(img, txt, semi, quad)


def _branches_for(mode, quad_ok):
    if mode == "semi_only":
        return ("semi",)
    if mode == "quad_only":
        return ("quad",)
    return ("semi", "quad") if quad_ok else ("semi",)


def train(state, data, cfg, mode="full", val=None, evaluate_fn=None, progress=None):
    """Run the training loop in place on ``state``; returns ``(state, report)``.

    ``val`` is an optional ``(S_img, S_txt, labels)`` triple used with
    ``evaluate_fn(Q_img, Q_txt, labels) -> float`` for early stopping.
    """
    if mode not in MODES or mode == "base":
        raise ValueError(f"train() supports modes semi_only, quad_only, full; got {mode!r}")
    labeled_classes = np.unique(np.asarray(data.labels)[data.labeled_idx]).size
    quad_ok = labeled_classes >= 2 and cfg.m > 0
    if not quad_ok:
        if mode == "quad_only":
            raise DegenerateDataError("quadruplet branch needs >= 2 classes among labeled rows")
        if mode == "full":
            log.warning("fewer than 2 labeled classes: quadruplet branch disabled")
    branches = _branches_for(mode, quad_ok)
    _, rng = _streams(cfg.seed)
    report = TrainReport()
    t0 = time.perf_counter()
    best, since_best, best_state = -np.inf, 0, None
    while state.step_counter < cfg.optimizer.max_steps:
        batch, C, A, pairs, quads = draw_step_inputs(data, cfg, rng, use_quad="quad" in branches)
        sg = step_grads(state, batch, C, A, pairs, quads, cfg, branches)
        if not np.isfinite(sg.total):
            raise FloatingPointError(f"non-finite loss at step {state.step_counter + 1}")
        mn.apply_grads(state.image_pathway, sg.img, cfg.optimizer)
        mn.apply_grads(state.text_pathway, sg.txt, cfg.optimizer)
        state.step_counter += 1
        report.semi.append(sg.semi.loss_value)
        report.quad.append(sg.quad.loss_value)
        report.total.append(sg.total)
        if progress is not None:
            progress(state.step_counter, sg)
        if cfg.early_stop and val is not None and state.step_counter % cfg.eval_every == 0:
            score = evaluate_fn(*mn.embed(state, val[0], val[1]), val[2])
            report.val_map.append(score)
            if score > best:
                best, since_best, best_state = score, 0, state.copy()
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    log.info("early stop at step %d (best val MAP %.4f)", state.step_counter, best)
                    break
    report.final_step = state.step_counter
    report.wall_clock = time.perf_counter() - t0
    if best_state is not None and cfg.early_stop:
        best_state.step_counter = state.step_counter
        state = best_state
    return state, report


def plateau_step(trace, window=500, tol=0.01):
    """First step s where the mean loss over (s-window, s] is within ``tol``
    (relative) of the mean over the preceding window; None if never."""
    t = np.asarray(trace, dtype=np.float64)
    if t.size < 2 * window:
        return None
    c = np.concatenate([[0.0], np.cumsum(t)])
    for s in range(2 * window, t.size + 1):
        cur = (c[s] - c[s - window]) / window
        prev = (c[s - window] - c[s - 2 * window]) / window
        if abs(cur - prev) <= tol * abs(prev):
            return s
    return None


@dataclass
class AblationResult:
    mode: str
    state: mn.ModelState = None
    report: TrainReport = None


def ablation_train(mode, data, cfg, img_dim=None, txt_dim=None):
    """Train one ablation arm. ``base`` skips training: embeddings are the shallow inputs."""
    if mode not in MODES:
        raise ValueError(f"unknown ablation mode {mode!r}")
    if mode == "base":
        return AblationResult("base")
    img_dim = img_dim or data.S_img.shape[1]
    txt_dim = txt_dim or data.S_txt.shape[1]
    state = init_state(img_dim, txt_dim, cfg, data)
    state, report = train(state, data, cfg, mode=mode)
    return AblationResult(mode, state, report)


def export_branch(net, mode):
    """Head used for embeddings: ``net.inference_branch`` unless ``mode`` never trained it."""
    branch = net.inference_branch
    if mode == "quad_only" and branch == "semi":
        return "quad"
    if mode == "semi_only" and branch == "quad":
        return "semi"
    return branch


def ablation_embed(result, S_img, S_txt):
    if result.mode == "base":
        return np.asarray(S_img, dtype=np.float64), np.asarray(S_txt, dtype=np.float64)
    return mn.embed(result.state, S_img, S_txt, export_branch(result.state.net, result.mode))
