"""Flat run configuration and the pipeline stages behind the command line."""
import dataclasses
import os
import time

import numpy as np

from . import base_net as bn
from . import metric_net as mn
from . import retrieval as rt
from . import synth
from . import trainer as tr
from .io_formats import (DataError, ingest, load_checkpoint, read_kv, read_matrix,
                         save_checkpoint, write_matrix, write_trace_csv)
from .nd_core import OptimizerConfig

SEED_ENV = "XMMR_SEED"

# artifact names inside a work directory
BASE_CKPT = "base.ckpt"
S_IMG, S_TXT = "shared_img.txt", "shared_txt.txt"
METRIC_CKPT = "metric.ckpt"
TRACE = "loss_trace.csv"
Q_IMG, Q_TXT = "q_img.txt", "q_txt.txt"
REPORT = "map_report.txt"
ABLATION = "ablation.csv"


class ConfigError(ValueError):
    pass


def _fields(section, cls, skip=("seed",)):
    inst = cls()
    return {f"{section}.{f.name}": getattr(inst, f.name)
            for f in dataclasses.fields(cls) if f.name not in skip}


_TC = tr.TrainConfig()

DEFAULTS = {
    "run.seed": 42,
    **_fields("synth", synth.SynthConfig),
    "base.img_hidden": bn.BaseNetConfig().img_hidden,
    "base.txt_hidden": bn.BaseNetConfig().txt_hidden,
    "base.finetune_dbn": False,
    **_fields("rbm", bn.RbmConfig),
    **_fields("ae", bn.AeConfig),
    **_fields("finetune", bn.FinetuneConfig),
    **_fields("net", mn.NetConfig),
    **_fields("optim", OptimizerConfig),
    "batch.m": _TC.m,
    "batch.n": _TC.n,
    "loss.margin_alpha": _TC.margin_alpha,
    "loss.margin_beta": _TC.margin_beta,
    "loss.contrastive_variant": _TC.contrastive_variant,
    "loss.w_semi": _TC.w_semi,
    "loss.w_quad": _TC.w_quad,
    "loss.reduction": _TC.reduction,
    "loss.quad_count": _TC.quad_count,
    "graph.k": _TC.graph_k,
    "train.mode": "full",
    "train.early_stop": _TC.early_stop,
    "train.eval_every": _TC.eval_every,
    "train.patience": _TC.patience,
    "eval.cutoff": 50,
    "eval.ap_norm": "relevant_in_cutoff",
}

# keys whose default is None, with the type of a non-None value
_OPTIONAL = {"rbm.learning_rate": float, "loss.quad_count": int, "net.head_init_scheme": str}


def _parse(key, raw):
    if not isinstance(raw, str):
        return raw
    default = DEFAULTS[key]
    text = raw.strip()
    try:
        if default is None:
            return None if text.lower() in ("", "none") else _OPTIONAL[key](text)
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {type(default).__name__}") from None
    return text


def load_config(path=None, overrides=None, env=None):
    """Defaults, then the config file, then ``overrides``, then ``XMMR_SEED``."""
    cfg = dict(DEFAULTS)
    layers = []
    if path:
        if not os.path.exists(path):
            raise DataError(f"config file {path} not found")
        layers.append(read_kv(path))
    layers.append(overrides or {})
    for layer in layers:
        for k, v in layer.items():
            if k not in DEFAULTS:
                raise ConfigError(f"unknown config key {k!r}")
            cfg[k] = _parse(k, v)
    env = os.environ if env is None else env
    if env.get(SEED_ENV):
        cfg["run.seed"] = _parse("run.seed", env[SEED_ENV])
    return cfg


def format_config(cfg):
    def fmt(v):
        if isinstance(v, tuple):
            return ",".join(map(str, v))
        return "none" if v is None else str(v)

    return {k: fmt(v) for k, v in cfg.items()}


def _section(cfg, name):
    pre = name + "."
    return {k[len(pre):]: v for k, v in cfg.items() if k.startswith(pre)}


def synth_config(cfg):
    return synth.SynthConfig(**_section(cfg, "synth"), seed=cfg["run.seed"])


def base_config(cfg):
    seed = cfg["run.seed"]
    return bn.BaseNetConfig(cfg["base.img_hidden"], cfg["base.txt_hidden"],
                            bn.RbmConfig(**_section(cfg, "rbm"), seed=seed),
                            bn.AeConfig(**_section(cfg, "ae"), seed=seed),
                            cfg["base.finetune_dbn"],
                            bn.FinetuneConfig(**_section(cfg, "finetune"), seed=seed),
                            seed)


def net_config(cfg):
    return mn.NetConfig(**_section(cfg, "net"))


def train_config(cfg):
    return tr.TrainConfig(
        optimizer=OptimizerConfig(**_section(cfg, "optim")), net=net_config(cfg),
        m=cfg["batch.m"], n=cfg["batch.n"],
        margin_alpha=cfg["loss.margin_alpha"], margin_beta=cfg["loss.margin_beta"],
        contrastive_variant=cfg["loss.contrastive_variant"], graph_k=cfg["graph.k"],
        quad_count=cfg["loss.quad_count"], w_semi=cfg["loss.w_semi"], w_quad=cfg["loss.w_quad"],
        reduction=cfg["loss.reduction"], seed=cfg["run.seed"],
        early_stop=cfg["train.early_stop"], eval_every=cfg["train.eval_every"],
        patience=cfg["train.patience"])


def _ap_norm(cfg):
    norm = cfg["eval.ap_norm"]
    if norm not in ("relevant_in_cutoff", "total_relevant"):
        raise ConfigError("eval.ap_norm must be 'relevant_in_cutoff' or 'total_relevant', "
                          f"got {norm!r}")
    return norm


def _path(workdir, name):
    return os.path.join(workdir, name)


def _require(path, stage):
    if not os.path.exists(path):
        raise DataError(f"{path} not found; run `{stage}` first")
    return path


# -- stages ---------------------------------------------------------------------

def run_synthgen(cfg, out_dir):
    return synth.write_dataset(synth.generate(synth_config(cfg)), out_dir)


def _labels_for_heads(ds):
    """Labels of labeled training rows, -1 elsewhere."""
    lab = np.full(ds.labels.shape, -1, dtype=np.int64)
    keep = ds.train_labeled
    lab[keep] = ds.labels[keep]
    return lab


def run_pretrain(cfg, manifest, workdir):
    """Base network on the training split; writes its checkpoint and S for every row."""
    ds = ingest(manifest)
    train = ds.rows("train")
    bcfg = base_config(cfg)
    labels = _labels_for_heads(ds)[train]
    base = bn.pretrain(ds.x_img[train], ds.x_txt[train], bcfg, labels=labels)
    os.makedirs(workdir, exist_ok=True)
    save_checkpoint(_path(workdir, BASE_CKPT), "base_net", bn.basenet_arrays(base),
                    format_config(cfg), cfg["run.seed"])
    S_img, S_txt = base.transform(ds.x_img, ds.x_txt)
    write_matrix(_path(workdir, S_IMG), S_img)
    write_matrix(_path(workdir, S_TXT), S_txt)
    return base, S_img, S_txt


def load_shared(workdir):
    return (read_matrix(_require(_path(workdir, S_IMG), "pretrain")),
            read_matrix(_require(_path(workdir, S_TXT), "pretrain")))


def train_data(ds, S_img, S_txt):
    if S_img.shape[0] != ds.labels.size:
        raise DataError(f"shared representations have {S_img.shape[0]} rows, "
                        f"dataset has {ds.labels.size}")
    return tr.TrainData(S_img, S_txt, ds.labels, ds.train_labeled, ds.train_unlabeled)


def _val_hook(cfg, ds, S_img, S_txt):
    rows = ds.rows("val")
    if not cfg["train.early_stop"] or rows.size == 0:
        return None, None
    def score(Qi, Qt, labels):
        return rt.average_map(evaluate_rows(cfg, Qi, Qt, labels), "all")

    return (S_img[rows], S_txt[rows], ds.labels[rows]), score


def run_train(cfg, manifest, workdir, progress=None):
    ds = ingest(manifest)
    S_img, S_txt = load_shared(workdir)
    data = train_data(ds, S_img, S_txt)
    tcfg = train_config(cfg)
    mode = cfg["train.mode"]
    if mode not in tr.MODES or mode == "base":
        raise ConfigError(f"train.mode must be one of semi_only, quad_only, full; got {mode!r}")
    state = tr.init_state(S_img.shape[1], S_txt.shape[1], tcfg, data)
    val, score = _val_hook(cfg, ds, S_img, S_txt)
    state, report = tr.train(state, data, tcfg, mode=mode, val=val, evaluate_fn=score,
                             progress=progress)
    ckpt = _path(workdir, METRIC_CKPT)
    meta = dict(format_config(cfg), step_counter=str(state.step_counter))
    save_checkpoint(ckpt, "metric_net", state.named_arrays(), meta, cfg["run.seed"])
    write_trace_csv(_path(workdir, TRACE), report)
    report.checkpoint_path = ckpt
    return state, report


def load_state(workdir, cfg=None):
    """Metric model from a checkpoint; its stored config defines the layout."""
    ck = load_checkpoint(_require(_path(workdir, METRIC_CKPT), "train"))
    if ck.stage != "metric_net":
        raise DataError(f"{METRIC_CKPT} holds a {ck.stage!r} checkpoint")
    stored = load_config(overrides={k: v for k, v in ck.config.items() if k in DEFAULTS}, env={})
    state = mn.ModelState.from_arrays(ck.arrays, net_config(stored),
                                      OptimizerConfig(**_section(stored, "optim")),
                                      int(ck.config.get("step_counter", 0)))
    if cfg is not None and cfg["net.inference_branch"] != stored["net.inference_branch"]:
        state.net = dataclasses.replace(state.net, inference_branch=cfg["net.inference_branch"])
    return state, stored


def run_embed(cfg, workdir):
    state, stored = load_state(workdir, cfg)
    S_img, S_txt = load_shared(workdir)
    Q_img, Q_txt = mn.embed(state, S_img, S_txt, tr.export_branch(state.net, stored["train.mode"]))
    write_matrix(_path(workdir, Q_IMG), Q_img)
    write_matrix(_path(workdir, Q_TXT), Q_txt)
    return Q_img, Q_txt


def evaluate_rows(cfg, Q_img, Q_txt, labels):
    return rt.evaluate(Q_img, Q_txt, labels, labels, cfg["eval.cutoff"], _ap_norm(cfg))


def run_evaluate(cfg, manifest, workdir, q_img=None, q_txt=None):
    """MAP of the test split; ``q_img`` / ``q_txt`` default to the embed outputs."""
    ds = ingest(manifest)
    Q_img = read_matrix(q_img or _require(_path(workdir, Q_IMG), "embed"))
    Q_txt = read_matrix(q_txt or _require(_path(workdir, Q_TXT), "embed"))
    if Q_img.shape[0] != ds.labels.size or Q_txt.shape[0] != ds.labels.size:
        raise DataError(f"embeddings have {Q_img.shape[0]}/{Q_txt.shape[0]} rows, "
                        f"dataset has {ds.labels.size}")
    test = ds.rows("test")
    reports = evaluate_rows(cfg, Q_img[test], Q_txt[test], ds.labels[test])
    os.makedirs(workdir, exist_ok=True)
    with open(_path(workdir, REPORT), "w") as fh:
        fh.write(rt.format_reports(reports))
    return reports


@dataclasses.dataclass
class AblationRow:
    mode: str
    reports: list
    seconds: float
    result: tr.AblationResult

    def score(self, task, scope):
        return next(r.map_score for r in self.reports if r.task == task and r.scope == scope)

    def average(self, scope):
        return rt.average_map(self.reports, scope)


def run_ablate(cfg, manifest, workdir, modes=tr.MODES, progress=None):
    """Train each mode on the same shallow representations; evaluate on the test split."""
    ds = ingest(manifest)
    if not (os.path.exists(_path(workdir, S_IMG)) and os.path.exists(_path(workdir, S_TXT))):
        run_pretrain(cfg, manifest, workdir)
    S_img, S_txt = load_shared(workdir)
    data = train_data(ds, S_img, S_txt)
    tcfg = train_config(cfg)
    test = ds.rows("test")
    rows = []
    for mode in modes:
        t0 = time.perf_counter()
        res = tr.ablation_train(mode, data, tcfg)
        Q_img, Q_txt = tr.ablation_embed(res, S_img[test], S_txt[test])
        reports = evaluate_rows(cfg, Q_img, Q_txt, ds.labels[test])
        rows.append(AblationRow(mode, reports, time.perf_counter() - t0, res))
        if progress is not None:
            progress(rows[-1])
    os.makedirs(workdir, exist_ok=True)
    with open(_path(workdir, ABLATION), "w") as fh:
        fh.write(format_ablation(rows) + "\n")
    return rows


def format_ablation(rows):
    """One CSV line per (mode, scope): img2txt, txt2img and their average."""
    lines = ["mode,scope,img2txt,txt2img,average"]
    for scope in ("all", "top50"):
        for r in rows:
            lines.append(f"{r.mode},{scope},{r.score('img2txt', scope):.4f},"
                         f"{r.score('txt2img', scope):.4f},{r.average(scope):.4f}")
    return "\n".join(lines)
