"""Two-pathway metric network: a 3-layer FC trunk per modality plus sigmoid branch heads."""
from dataclasses import dataclass, field

import numpy as np

from .nd_core import (AffineLayer, OptimizerConfig, ShapeError, affine_backward,
                      affine_forward, make_rng, sgd_momentum_step, sigmoid)

BRANCHES = ("semi", "quad")


@dataclass
class NetConfig:
    hidden_dim: int = 256
    out_dim: int = 256
    trunk_depth: int = 3
    trunk_activation: str = "sigmoid"  # or "relu", "identity"
    shared_head: bool = False
    inference_branch: str = "quad"  # "semi", "quad" or "trunk"
    init_scheme: str = "glorot_sigmoid"
    head_init_scheme: str = "glorot"  # None: same as init_scheme
    # z-score pathway inputs with statistics of the training pool
    normalize_inputs: bool = True

    def __post_init__(self):
        if self.trunk_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown trunk activation {self.trunk_activation!r}")
        if self.inference_branch not in BRANCHES + ("trunk",):
            raise ValueError(f"unknown inference branch {self.inference_branch!r}")


def _relu(z):
    return np.maximum(z, 0.0)


_ACTIVATIONS = {
    "sigmoid": (sigmoid, lambda z, a: a * (1.0 - a)),
    "relu": (_relu, lambda z, a: (z > 0).astype(np.float64)),
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
}


@dataclass
class PathwayParams:
    trunk: list
    heads: dict
    activation: str = "sigmoid"
    in_shift: np.ndarray = None
    in_scale: np.ndarray = None

    def __post_init__(self):
        if self.in_shift is None:
            self.in_shift = np.zeros(self.in_dim)
        if self.in_scale is None:
            self.in_scale = np.ones(self.in_dim)

    @property
    def in_dim(self):
        return self.trunk[0].in_dim

    def fit_input_normalizer(self, S):
        """Fix the input shift/scale to the per-feature mean/std of ``S``."""
        S = np.asarray(S, dtype=np.float64)
        std = S.std(axis=0)
        self.in_shift = S.mean(axis=0)
        self.in_scale = np.where(std > 0, std, 1.0)

    @property
    def shared_head(self):
        return self.heads["semi"] is self.heads["quad"]

    @classmethod
    def init(cls, in_dim, cfg, rng):
        dims = [in_dim] + [cfg.hidden_dim] * cfg.trunk_depth
        scheme = cfg.init_scheme
        head_scheme = cfg.head_init_scheme or scheme
        trunk = [AffineLayer.init(a, b, rng, scheme) for a, b in zip(dims[:-1], dims[1:])]
        if cfg.shared_head:
            head = AffineLayer.init(dims[-1], cfg.out_dim, rng, head_scheme)
            heads = {"semi": head, "quad": head}
        else:
            heads = {b: AffineLayer.init(dims[-1], cfg.out_dim, rng, head_scheme)
                     for b in BRANCHES}
        return cls(trunk, heads, cfg.trunk_activation)

    def layers(self):
        """Named distinct layers, in a fixed order."""
        out = [(f"trunk{i}", layer) for i, layer in enumerate(self.trunk)]
        if self.shared_head:
            out.append(("head", self.heads["semi"]))
        else:
            out.extend((f"head_{b}", self.heads[b]) for b in BRANCHES)
        return out

    def copy(self):
        trunk = [layer.copy() for layer in self.trunk]
        if self.shared_head:
            head = self.heads["semi"].copy()
            heads = {"semi": head, "quad": head}
        else:
            heads = {b: h.copy() for b, h in self.heads.items()}
        return PathwayParams(trunk, heads, self.activation,
                             self.in_shift.copy(), self.in_scale.copy())


@dataclass
class TrunkCache:
    inputs: list  # input to each trunk layer
    pre: list
    post: list

    @property
    def top(self):
        return self.post[-1]


def trunk_forward(pathway, S):
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] != pathway.in_dim:
        raise ShapeError(f"input shape {S.shape} does not match pathway input dim {pathway.in_dim}")
    act = _ACTIVATIONS[pathway.activation][0]
    inputs, pre, post = [], [], []
    h = (S - pathway.in_shift) / pathway.in_scale
    for layer in pathway.trunk:
        inputs.append(h)
        z = affine_forward(layer, h)
        h = act(z)
        pre.append(z)
        post.append(h)
    return TrunkCache(inputs, pre, post)


def head_forward(pathway, trunk_cache, branch):
    return sigmoid(affine_forward(pathway.heads[branch], trunk_cache.top))


def forward(pathway, S, branch):
    """Map shallow representations to one branch's embedding.

    Returns ``(embedding, cache)``; the cache holds the trunk activations and
    the head output needed by :func:`backward`.
    """
    tc = trunk_forward(pathway, S)
    if branch == "trunk":
        return tc.top, {"trunk": tc, "branch": branch, "out": tc.top}
    out = head_forward(pathway, tc, branch)
    return out, {"trunk": tc, "branch": branch, "out": out}


def head_backward(pathway, trunk_cache, branch, out, grad_out):
    """Backprop through one sigmoid head; returns ``(grad_w, grad_b, grad_trunk_top)``."""
    gz = grad_out * out * (1.0 - out)
    return affine_backward(pathway.heads[branch], trunk_cache.top, gz)


def trunk_backward(pathway, trunk_cache, grad_top):
    """Backprop through the trunk; returns a list of ``(grad_w, grad_b)`` per layer."""
    dact = _ACTIVATIONS[pathway.activation][1]
    grads = [None] * len(pathway.trunk)
    g = grad_top
    for i in range(len(pathway.trunk) - 1, -1, -1):
        gz = g * dact(trunk_cache.pre[i], trunk_cache.post[i])
        gw, gb, g = affine_backward(pathway.trunk[i], trunk_cache.inputs[i], gz)
        grads[i] = (gw, gb)
    return grads


def backward(pathway, cache, grad_embedding):
    """Parameter gradients of one forward pass, keyed like :meth:`PathwayParams.layers`."""
    tc, branch = cache["trunk"], cache["branch"]
    if cache["out"].shape != np.shape(grad_embedding):
        raise ShapeError("upstream gradient does not match cached forward output")
    grads = zero_grads(pathway)
    if branch == "trunk":
        g_top = grad_embedding
    else:
        gw, gb, g_top = head_backward(pathway, tc, branch, cache["out"], grad_embedding)
        grads[_head_name(pathway, branch)] = (gw, gb)
    for i, gwb in enumerate(trunk_backward(pathway, tc, g_top)):
        grads[f"trunk{i}"] = gwb
    return grads


def multibranch_backward(pathway, trunk_cache, outs, grad_outs):
    """Backprop several heads at once; their trunk-top gradients are summed."""
    grads = zero_grads(pathway)
    g_top = np.zeros_like(trunk_cache.top)
    for branch, g in grad_outs.items():
        gw, gb, gt = head_backward(pathway, trunk_cache, branch, outs[branch], g)
        name = _head_name(pathway, branch)
        pw, pb = grads[name]
        grads[name] = (pw + gw, pb + gb)
        g_top += gt
    for i, gwb in enumerate(trunk_backward(pathway, trunk_cache, g_top)):
        grads[f"trunk{i}"] = gwb
    return grads


def _head_name(pathway, branch):
    return "head" if pathway.shared_head else f"head_{branch}"


def zero_grads(pathway):
    return {name: (np.zeros_like(l.weight), np.zeros_like(l.bias)) for name, l in pathway.layers()}


def apply_grads(pathway, grads, opt):
    for name, layer in pathway.layers():
        gw, gb = grads[name]
        sgd_momentum_step(layer, gw, gb, opt)


@dataclass
class ModelState:
    image_pathway: PathwayParams
    text_pathway: PathwayParams
    net: NetConfig = field(default_factory=NetConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    step_counter: int = 0

    @classmethod
    def init(cls, img_dim, txt_dim, net=None, optimizer=None, seed=0):
        net = net or NetConfig()
        rng = make_rng(seed)
        return cls(PathwayParams.init(img_dim, net, rng), PathwayParams.init(txt_dim, net, rng),
                   net, optimizer or OptimizerConfig())

    def named_arrays(self):
        """Every parameter and momentum buffer, keyed by a stable name."""
        out = {}
        for tag, pw in (("img", self.image_pathway), ("txt", self.text_pathway)):
            out[f"{tag}.in_shift"] = pw.in_shift.reshape(1, -1)
            out[f"{tag}.in_scale"] = pw.in_scale.reshape(1, -1)
            for name, layer in pw.layers():
                out[f"{tag}.{name}.weight"] = layer.weight
                out[f"{tag}.{name}.bias"] = layer.bias.reshape(1, -1)
                out[f"{tag}.{name}.vel_w"] = layer.vel_w
                out[f"{tag}.{name}.vel_b"] = layer.vel_b.reshape(1, -1)
        return out

    @classmethod
    def from_arrays(cls, arrays, net, optimizer=None, step_counter=0):
        """Inverse of :meth:`named_arrays`; ``net`` must describe the same layout."""
        pathways = []
        for tag in ("img", "txt"):
            def layer(name):
                return AffineLayer(arrays[f"{tag}.{name}.weight"].copy(),
                                   arrays[f"{tag}.{name}.bias"].reshape(-1).copy(),
                                   arrays[f"{tag}.{name}.vel_w"].copy(),
                                   arrays[f"{tag}.{name}.vel_b"].reshape(-1).copy())

            trunk = [layer(f"trunk{i}") for i in range(net.trunk_depth)]
            if net.shared_head:
                head = layer("head")
                heads = {"semi": head, "quad": head}
            else:
                heads = {b: layer(f"head_{b}") for b in BRANCHES}
            pathways.append(PathwayParams(trunk, heads, net.trunk_activation,
                                          arrays[f"{tag}.in_shift"].reshape(-1).copy(),
                                          arrays[f"{tag}.in_scale"].reshape(-1).copy()))
        return cls(pathways[0], pathways[1], net, optimizer or OptimizerConfig(), step_counter)

    def copy(self):
        return ModelState(self.image_pathway.copy(), self.text_pathway.copy(),
                          self.net, self.optimizer, self.step_counter)


def embed(state, S_img, S_txt, branch=None):
    """Final representations ``(Q_img, Q_txt)`` from the inference branch."""
    branch = branch or state.net.inference_branch
    out = []
    for pw, S in ((state.image_pathway, S_img), (state.text_pathway, S_txt)):
        S = np.asarray(S, dtype=np.float64).reshape(-1, pw.in_dim)
        if S.shape[0] == 0:
            width = state.net.hidden_dim if branch == "trunk" else state.net.out_dim
            out.append(np.empty((0, width)))
            continue
        out.append(forward(pw, S, branch)[0])
    return tuple(out)
