"""Pretraining of the shallow shared representation.

Each modality gets a two-layer DBN (Gaussian RBM or Replicated Softmax at the
bottom, a binary RBM on top) trained greedily with CD-1. A Bimodal
Autoencoder then fuses the two DBN outputs; its middle layer, evaluated with
one modality present at a time, gives the per-modality shallow codes.
"""
from dataclasses import dataclass, field

import numpy as np

from .nd_core import (AffineLayer, OptimizerConfig, ShapeError, affine_backward,
                      affine_forward, make_rng, seeded_init, sgd_momentum_step,
                      sigmoid, softmax)

KINDS = ("gaussian", "replicated_softmax", "binary")


@dataclass
class RbmConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = None  # None: per-kind default
    momentum: float = 0.5
    weight_decay: float = 0.0
    seed: int = 0

    def lr_for(self, kind):
        if self.learning_rate is not None:
            return self.learning_rate
        return 0.001 if kind == "replicated_softmax" else 0.01


@dataclass
class RbmParams:
    weight: np.ndarray  # visible x hidden
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    kind: str
    recon_history: list = field(default_factory=list, repr=False)

    @property
    def visible_dim(self):
        return self.weight.shape[0]

    @property
    def hidden_dim(self):
        return self.weight.shape[1]


@dataclass
class DbnStack:
    layer1: RbmParams
    layer2: RbmParams

    def __post_init__(self):
        if self.layer1.hidden_dim != self.layer2.visible_dim:
            raise ShapeError("layer1 hidden dim must equal layer2 visible dim")


def _doc_lengths(v):
    return v.sum(axis=1, keepdims=True)


def hidden_preactivation_terms(rbm, v):
    """Split the hidden pre-activation into ``(v W, bias term)``.

    The bias term is the hidden bias, scaled by document length for
    Replicated Softmax.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] != rbm.visible_dim:
        raise ShapeError(f"input shape {v.shape} does not match visible dim {rbm.visible_dim}")
    bias = rbm.hidden_bias[None, :]
    if rbm.kind == "replicated_softmax":
        bias = _doc_lengths(v) * bias
    else:
        bias = np.broadcast_to(bias, (v.shape[0], rbm.hidden_dim))
    return v @ rbm.weight, bias


def hidden_probs(rbm, v):
    vw, b = hidden_preactivation_terms(rbm, v)
    return sigmoid(vw + b)


def visible_distribution(rbm, h):
    """Word distribution of a Replicated Softmax given hidden states; rows sum to 1."""
    return softmax(h @ rbm.weight.T + rbm.visible_bias)


def visible_mean(rbm, h, doc_len=None):
    if rbm.kind == "gaussian":
        return h @ rbm.weight.T + rbm.visible_bias
    if rbm.kind == "binary":
        return sigmoid(h @ rbm.weight.T + rbm.visible_bias)
    return doc_len * visible_distribution(rbm, h)


def reconstruct(rbm, v):
    """Deterministic mean-field reconstruction v -> p(h|v) -> E[v|h]."""
    v = np.asarray(v, dtype=np.float64)
    doc_len = _doc_lengths(v) if rbm.kind == "replicated_softmax" else None
    return visible_mean(rbm, hidden_probs(rbm, v), doc_len)


def reconstruction_error(rbm, v):
    """Mean over rows of the summed squared reconstruction error."""
    r = reconstruct(rbm, v)
    return float(np.mean(np.sum((np.asarray(v) - r) ** 2, axis=1)))


def _validate(data, kind, hidden_dim):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ShapeError("training data must be a nonempty matrix")
    if not np.all(np.isfinite(data)):
        raise ValueError("training data contains non-finite values")
    if hidden_dim <= 0:
        raise ValueError("hidden_dim must be positive")
    if kind == "replicated_softmax":
        if np.any(data < 0):
            raise ValueError("count data must be nonnegative")
        if np.any(data.sum(axis=1) <= 0):
            raise ValueError("every document needs a positive word count")
    return data


def train_rbm(data, hidden_dim, kind, cfg=None):
    """CD-1 training of one RBM.

    The hidden layer is sampled once from p(h|v); the reconstruction uses the
    visible mean and the negative phase the hidden probabilities.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown RBM kind {kind!r}")
    cfg = cfg or RbmConfig()
    data = _validate(data, kind, hidden_dim)
    rng = make_rng(cfg.seed)
    n, d = data.shape
    rbm = RbmParams(rng.normal(0.0, 0.01, size=(d, hidden_dim)), np.zeros(d),
                    np.zeros(hidden_dim), kind)
    if kind == "binary":
        rbm.visible_bias = np.log(np.clip(data.mean(axis=0), 1e-3, 1 - 1e-3)
                                  / np.clip(1 - data.mean(axis=0), 1e-3, 1 - 1e-3))
    elif kind == "gaussian":
        rbm.visible_bias = data.mean(axis=0).copy()
    lr = cfg.lr_for(kind)
    vw = np.zeros_like(rbm.weight)
    vv = np.zeros_like(rbm.visible_bias)
    vh = np.zeros_like(rbm.hidden_bias)
    rbm.recon_history.append(reconstruction_error(rbm, data))
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            v0 = data[perm[start:start + cfg.batch_size]]
            b = v0.shape[0]
            doc_len = _doc_lengths(v0) if kind == "replicated_softmax" else None
            h0 = hidden_probs(rbm, v0)
            h_sample = (rng.random(h0.shape) < h0).astype(np.float64)
            v1 = visible_mean(rbm, h_sample, doc_len)
            h1 = hidden_probs(rbm, v1)
            gw = (v0.T @ h0 - v1.T @ h1) / b - cfg.weight_decay * rbm.weight
            gv = (v0 - v1).mean(axis=0)
            if kind == "replicated_softmax":
                gh = (doc_len * (h0 - h1)).mean(axis=0)
            else:
                gh = (h0 - h1).mean(axis=0)
            vw = cfg.momentum * vw + lr * gw
            vv = cfg.momentum * vv + lr * gv
            vh = cfg.momentum * vh + lr * gh
            rbm.weight += vw
            rbm.visible_bias += vv
            rbm.hidden_bias += vh
        rbm.recon_history.append(reconstruction_error(rbm, data))
    return rbm


def train_gaussian_rbm(data, hidden_dim, cfg=None):
    """Gaussian-visible RBM on standardized (zero mean, unit variance) features."""
    return train_rbm(data, hidden_dim, "gaussian", cfg)


def train_replicated_softmax(data, hidden_dim, cfg=None):
    return train_rbm(data, hidden_dim, "replicated_softmax", cfg)


def train_dbn(data, hidden_dims, bottom_kind, cfg=None):
    """Greedy two-layer stack: ``bottom_kind`` RBM, then a binary RBM on its hidden means."""
    cfg = cfg or RbmConfig()
    l1 = train_rbm(data, hidden_dims[0], bottom_kind, cfg)
    cfg2 = RbmConfig(cfg.epochs, cfg.batch_size, cfg.learning_rate, cfg.momentum,
                     cfg.weight_decay, cfg.seed + 1)
    l2 = train_rbm(hidden_probs(l1, data), hidden_dims[1], "binary", cfg2)
    return DbnStack(l1, l2)


def dbn_forward(stack, x):
    """Mean-field pass through both layers; deterministic."""
    return hidden_probs(stack.layer2, hidden_probs(stack.layer1, x))


# ---------------------------------------------------------------------------
# Optional softmax classifier heads


@dataclass
class SoftmaxHead:
    layer: AffineLayer

    def probs(self, h):
        return softmax(affine_forward(self.layer, h))


def _xent_grad(head, h, y_idx):
    """Mean cross-entropy, gradients of head params and of the head input."""
    p = head.probs(h)
    n = h.shape[0]
    loss = -np.mean(np.log(np.clip(p[np.arange(n), y_idx], 1e-300, None)))
    g = p.copy()
    g[np.arange(n), y_idx] -= 1.0
    g /= n
    gw, gb, gh = affine_backward(head.layer, h, g)
    return loss, gw, gb, gh


@dataclass
class FinetuneConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0


def finetune_dbn(stack, x, labels, cfg=None):
    """Supervised refinement of a DBN via a softmax head on its output.

    Only rows with ``labels >= 0`` are used. The RBM weights and hidden biases
    are updated in place as a two-layer sigmoid network. Returns the head and
    the per-epoch losses.
    """
    cfg = cfg or FinetuneConfig()
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    keep = labels >= 0
    x, labels = x[keep], labels[keep]
    classes, y = np.unique(labels, return_inverse=True)
    rng = make_rng(cfg.seed)
    head = SoftmaxHead(AffineLayer(seeded_init((classes.size, stack.layer2.hidden_dim),
                                               "uniform_fan_in", rng), np.zeros(classes.size)))
    l1, l2 = stack.layer1, stack.layer2
    # view the RBMs as affine layers (out x in) so the momentum optimizer applies
    a1 = AffineLayer(l1.weight.T.copy(), l1.hidden_bias.copy())
    a2 = AffineLayer(l2.weight.T.copy(), l2.hidden_bias.copy())
    opt = OptimizerConfig(cfg.learning_rate, cfg.momentum, 0.0, cfg.epochs)
    history = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(x.shape[0])
        total = 0.0
        for start in range(0, x.shape[0], cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = x[idx], y[idx]
            scale = _doc_lengths(xb) if l1.kind == "replicated_softmax" else 1.0
            z1 = xb @ a1.weight.T + scale * a1.bias
            h1 = sigmoid(z1)
            h2 = sigmoid(affine_forward(a2, h1))
            loss, gw, gb, gh2 = _xent_grad(head, h2, yb)
            total += loss * idx.size
            gz2 = gh2 * h2 * (1 - h2)
            gw2, gb2, gh1 = affine_backward(a2, h1, gz2)
            gz1 = gh1 * h1 * (1 - h1)
            gw1 = gz1.T @ xb
            gb1 = (gz1 * scale).sum(axis=0) if l1.kind == "replicated_softmax" else gz1.sum(axis=0)
            sgd_momentum_step(head.layer, gw, gb, opt)
            sgd_momentum_step(a2, gw2, gb2, opt)
            sgd_momentum_step(a1, gw1, gb1, opt)
        history.append(total / x.shape[0])
    l1.weight[...] = a1.weight.T
    l1.hidden_bias[...] = a1.bias
    l2.weight[...] = a2.weight.T
    l2.hidden_bias[...] = a2.bias
    return head, history


# ---------------------------------------------------------------------------
# Bimodal autoencoder


@dataclass
class AeConfig:
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    modality_dropout: bool = True
    classifier: bool = False
    classifier_weight: float = 1.0
    seed: int = 0


@dataclass
class BimodalAeParams:
    image_encoder: AffineLayer
    text_encoder: AffineLayer
    shared_layer: AffineLayer
    image_decoder: tuple  # (middle -> hidden, hidden -> reconstruction)
    text_decoder: tuple
    classifier: SoftmaxHead = None
    loss_history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        d_in = self.image_encoder.in_dim + self.text_encoder.in_dim
        if self.shared_layer.out_dim * 2 != d_in:
            raise ShapeError(
                f"middle layer width {self.shared_layer.out_dim} must be half the input width {d_in}")
        if self.shared_layer.in_dim != self.image_encoder.out_dim + self.text_encoder.out_dim:
            raise ShapeError("shared layer input must concatenate both encoder outputs")
        if (self.image_decoder[1].out_dim != self.image_encoder.in_dim
                or self.text_decoder[1].out_dim != self.text_encoder.in_dim):
            raise ShapeError("reconstruction layers must match the input widths")

    @property
    def middle_dim(self):
        return self.shared_layer.out_dim

    def layers(self):
        out = [self.image_encoder, self.text_encoder, self.shared_layer,
               *self.image_decoder, *self.text_decoder]
        if self.classifier is not None:
            out.append(self.classifier.layer)
        return out

    @classmethod
    def init(cls, d_img, d_txt, rng):
        middle = (d_img + d_txt) // 2
        if 2 * middle != d_img + d_txt:
            raise ShapeError("combined input width must be even so the middle layer is half of it")
        return cls(AffineLayer.init(d_img, d_img, rng), AffineLayer.init(d_txt, d_txt, rng),
                   AffineLayer.init(d_img + d_txt, middle, rng),
                   (AffineLayer.init(middle, d_img, rng), AffineLayer.init(d_img, d_img, rng)),
                   (AffineLayer.init(middle, d_txt, rng), AffineLayer.init(d_txt, d_txt, rng)))


def _ae_forward(ae, yi, yt):
    hi = sigmoid(affine_forward(ae.image_encoder, yi))
    ht = sigmoid(affine_forward(ae.text_encoder, yt))
    cat = np.hstack([hi, ht])
    s = sigmoid(affine_forward(ae.shared_layer, cat))
    di = sigmoid(affine_forward(ae.image_decoder[0], s))
    ri = sigmoid(affine_forward(ae.image_decoder[1], di))
    dt = sigmoid(affine_forward(ae.text_decoder[0], s))
    rt = sigmoid(affine_forward(ae.text_decoder[1], dt))
    return dict(yi=yi, yt=yt, hi=hi, ht=ht, cat=cat, s=s, di=di, ri=ri, dt=dt, rt=rt)


def ae_reconstruction_loss(ae, Y_img, Y_txt):
    """Mean over rows of the summed squared error of both reconstructions (both inputs present)."""
    c = _ae_forward(ae, np.asarray(Y_img, float), np.asarray(Y_txt, float))
    return float(np.mean(np.sum((c["ri"] - c["yi"]) ** 2, axis=1)
                         + np.sum((c["rt"] - c["yt"]) ** 2, axis=1)))


def _sig_back(g, a):
    return g * a * (1.0 - a)


def _ae_step_grads(ae, c, ti, tt, y=None, w_cls=1.0):
    """Gradients of 0.5 * summed squared error (mean over rows) for one batch."""
    n = c["s"].shape[0]
    grads = {}
    gri = _sig_back((c["ri"] - ti) / n, c["ri"])
    grads["di1"] = affine_backward(ae.image_decoder[1], c["di"], gri)
    gdi = _sig_back(grads["di1"][2], c["di"])
    grads["di0"] = affine_backward(ae.image_decoder[0], c["s"], gdi)
    grt = _sig_back((c["rt"] - tt) / n, c["rt"])
    grads["dt1"] = affine_backward(ae.text_decoder[1], c["dt"], grt)
    gdt = _sig_back(grads["dt1"][2], c["dt"])
    grads["dt0"] = affine_backward(ae.text_decoder[0], c["s"], gdt)
    gs = grads["di0"][2] + grads["dt0"][2]
    if y is not None and ae.classifier is not None:
        lab = y >= 0
        if lab.any():
            _, gw, gb, gh = _xent_grad(ae.classifier, c["s"][lab], y[lab])
            scale = w_cls * lab.sum() / n
            grads["cls"] = (gw * scale, gb * scale, None)
            gs[lab] += gh * scale
        else:
            grads["cls"] = (np.zeros_like(ae.classifier.layer.weight),
                            np.zeros_like(ae.classifier.layer.bias), None)
    grads["shared"] = affine_backward(ae.shared_layer, c["cat"], _sig_back(gs, c["s"]))
    gcat = grads["shared"][2]
    di = ae.image_encoder.out_dim
    grads["ei"] = affine_backward(ae.image_encoder, c["yi"], _sig_back(gcat[:, :di], c["hi"]))
    grads["et"] = affine_backward(ae.text_encoder, c["yt"], _sig_back(gcat[:, di:], c["ht"]))
    return grads


def train_bimodal_ae(Y_img, Y_txt, cfg=None, labels=None):
    """Train the Bimodal AE to reconstruct both modalities from the middle layer.

    With ``modality_dropout`` each training row is shown with both inputs,
    image only, or text only (the absent input zeroed) while both targets are
    kept, so that a single modality reaches the shared code on its own.
    ``labels`` (``-1`` for unlabeled rows) feed the optional softmax head.
    """
    cfg = cfg or AeConfig()
    Y_img = np.asarray(Y_img, dtype=np.float64)
    Y_txt = np.asarray(Y_txt, dtype=np.float64)
    if Y_img.shape[0] != Y_txt.shape[0]:
        raise ShapeError(f"row counts differ: {Y_img.shape[0]} vs {Y_txt.shape[0]}")
    rng = make_rng(cfg.seed)
    ae = BimodalAeParams.init(Y_img.shape[1], Y_txt.shape[1], rng)
    y_idx = None
    if cfg.classifier:
        if labels is None:
            raise ValueError("classifier head requested without labels")
        labels = np.asarray(labels)
        classes = np.unique(labels[labels >= 0])
        y_idx = np.where(labels >= 0, np.searchsorted(classes, labels), -1)
        ae.classifier = SoftmaxHead(AffineLayer.init(ae.middle_dim, classes.size, rng))
    opt = OptimizerConfig(cfg.learning_rate, cfg.momentum, cfg.weight_decay, cfg.epochs)
    named = {"ei": ae.image_encoder, "et": ae.text_encoder, "shared": ae.shared_layer,
             "di0": ae.image_decoder[0], "di1": ae.image_decoder[1],
             "dt0": ae.text_decoder[0], "dt1": ae.text_decoder[1]}
    if ae.classifier is not None:
        named["cls"] = ae.classifier.layer
    n = Y_img.shape[0]
    ae.loss_history.append(ae_reconstruction_loss(ae, Y_img, Y_txt))
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            ti, tt = Y_img[idx], Y_txt[idx]
            xi, xt = ti.copy(), tt.copy()
            if cfg.modality_dropout:
                which = rng.integers(3, size=idx.size)
                xi[which == 2] = 0.0
                xt[which == 1] = 0.0
            c = _ae_forward(ae, xi, xt)
            grads = _ae_step_grads(ae, c, ti, tt, None if y_idx is None else y_idx[idx],
                                   cfg.classifier_weight)
            for key, layer in named.items():
                sgd_momentum_step(layer, grads[key][0], grads[key][1], opt)
        ae.loss_history.append(ae_reconstruction_loss(ae, Y_img, Y_txt))
    return ae


def shared_rep(ae, y_img, y_txt):
    """Middle-layer codes with one modality present at a time.

    Returns ``(S_img, S_txt)``; each is computed with the other input zeroed.
    """
    y_img = np.asarray(y_img, dtype=np.float64)
    y_txt = np.asarray(y_txt, dtype=np.float64)
    if y_img.ndim != 2 or y_img.shape[1] != ae.image_encoder.in_dim:
        raise ShapeError(f"image input shape {y_img.shape} does not match encoder")
    if y_txt.ndim != 2 or y_txt.shape[1] != ae.text_encoder.in_dim:
        raise ShapeError(f"text input shape {y_txt.shape} does not match encoder")
    S_img = _ae_forward(ae, y_img, np.zeros((y_img.shape[0], ae.text_encoder.in_dim)))["s"]
    S_txt = _ae_forward(ae, np.zeros((y_txt.shape[0], ae.image_encoder.in_dim)), y_txt)["s"]
    return S_img, S_txt


# ---------------------------------------------------------------------------
# whole stage


@dataclass
class BaseNetConfig:
    img_hidden: tuple = (64, 32)
    txt_hidden: tuple = (48, 32)
    rbm: RbmConfig = field(default_factory=RbmConfig)
    ae: AeConfig = field(default_factory=AeConfig)
    finetune_dbn: bool = False
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    seed: int = 0


@dataclass
class BaseNet:
    img_dbn: DbnStack
    txt_dbn: DbnStack
    ae: BimodalAeParams
    img_mean: np.ndarray
    img_std: np.ndarray

    def standardize(self, x_img):
        return (np.asarray(x_img, dtype=np.float64) - self.img_mean) / self.img_std

    def transform(self, x_img, x_txt):
        """Raw features -> shallow shared representations ``(S_img, S_txt)``."""
        y_img = dbn_forward(self.img_dbn, self.standardize(x_img))
        y_txt = dbn_forward(self.txt_dbn, x_txt)
        return shared_rep(self.ae, y_img, y_txt)


def standardization_stats(x):
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    return mean, np.where(std > 0, std, 1.0)


def pretrain(x_img, x_txt, cfg=None, labels=None):
    """Train the whole base network on the given (training) rows."""
    cfg = cfg or BaseNetConfig()
    mean, std = standardization_stats(x_img)
    xi = (np.asarray(x_img, dtype=np.float64) - mean) / std
    rbm_i = RbmConfig(**{**cfg.rbm.__dict__, "seed": cfg.seed * 10 + 1})
    rbm_t = RbmConfig(**{**cfg.rbm.__dict__, "seed": cfg.seed * 10 + 3})
    img_dbn = train_dbn(xi, cfg.img_hidden, "gaussian", rbm_i)
    txt_dbn = train_dbn(x_txt, cfg.txt_hidden, "replicated_softmax", rbm_t)
    if cfg.finetune_dbn and labels is not None:
        finetune_dbn(img_dbn, xi, labels, FinetuneConfig(**{**cfg.finetune.__dict__,
                                                            "seed": cfg.seed * 10 + 5}))
        finetune_dbn(txt_dbn, x_txt, labels, FinetuneConfig(**{**cfg.finetune.__dict__,
                                                               "seed": cfg.seed * 10 + 6}))
    ae_cfg = AeConfig(**{**cfg.ae.__dict__, "seed": cfg.seed * 10 + 7})
    ae = train_bimodal_ae(dbn_forward(img_dbn, xi), dbn_forward(txt_dbn, x_txt), ae_cfg,
                          labels=labels if ae_cfg.classifier else None)
    return BaseNet(img_dbn, txt_dbn, ae, mean, std)


def basenet_arrays(base):
    """Flatten a trained base network into named matrices for checkpointing."""
    out = {"img.mean": base.img_mean.reshape(1, -1), "img.std": base.img_std.reshape(1, -1)}
    for tag, stack in (("img_dbn", base.img_dbn), ("txt_dbn", base.txt_dbn)):
        for i, rbm in enumerate((stack.layer1, stack.layer2), 1):
            out[f"{tag}.l{i}.weight"] = rbm.weight
            out[f"{tag}.l{i}.visible_bias"] = rbm.visible_bias.reshape(1, -1)
            out[f"{tag}.l{i}.hidden_bias"] = rbm.hidden_bias.reshape(1, -1)
    for name, layer in _ae_named(base.ae):
        out[f"ae.{name}.weight"] = layer.weight
        out[f"ae.{name}.bias"] = layer.bias.reshape(1, -1)
    return out


def basenet_from_arrays(arrays):
    def rbm(tag, i, kind):
        return RbmParams(arrays[f"{tag}.l{i}.weight"].copy(),
                         arrays[f"{tag}.l{i}.visible_bias"].reshape(-1).copy(),
                         arrays[f"{tag}.l{i}.hidden_bias"].reshape(-1).copy(), kind)

    def layer(name):
        return AffineLayer(arrays[f"ae.{name}.weight"].copy(),
                           arrays[f"ae.{name}.bias"].reshape(-1).copy())

    img = DbnStack(rbm("img_dbn", 1, "gaussian"), rbm("img_dbn", 2, "binary"))
    txt = DbnStack(rbm("txt_dbn", 1, "replicated_softmax"), rbm("txt_dbn", 2, "binary"))
    classifier = SoftmaxHead(layer("classifier")) if "ae.classifier.weight" in arrays else None
    ae = BimodalAeParams(layer("image_encoder"), layer("text_encoder"), layer("shared"),
                         (layer("image_decoder0"), layer("image_decoder1")),
                         (layer("text_decoder0"), layer("text_decoder1")), classifier)
    return BaseNet(img, txt, ae, arrays["img.mean"].reshape(-1).copy(),
                   arrays["img.std"].reshape(-1).copy())


def _ae_named(ae):
    out = [("image_encoder", ae.image_encoder), ("text_encoder", ae.text_encoder),
           ("shared", ae.shared_layer),
           ("image_decoder0", ae.image_decoder[0]), ("image_decoder1", ae.image_decoder[1]),
           ("text_decoder0", ae.text_decoder[0]), ("text_decoder1", ae.text_decoder[1])]
    if ae.classifier is not None:
        out.append(("classifier", ae.classifier.layer))
    return out
