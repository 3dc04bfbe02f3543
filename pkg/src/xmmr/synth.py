"""Synthetic paired image/text benchmark with class structure."""
import os
from dataclasses import dataclass

import numpy as np

from .io_formats import DatasetManifest, write_labels, write_matrix, write_split


@dataclass
class SynthConfig:
    classes: int = 10
    per_class: int = 200
    latent_dim: int = 16
    d_img: int = 32
    d_txt: int = 24
    sigma_img: float = 0.5
    sigma_txt: float = 0.3
    doc_len: int = 40
    train_frac: float = 0.7
    val_frac: float = 0.1
    unlabeled_frac: float = 0.5
    seed: int = 42


@dataclass
class SynthData:
    x_img: np.ndarray
    x_txt: np.ndarray  # word counts
    labels: np.ndarray
    split: np.ndarray
    unlabeled: np.ndarray


def generate(cfg=None):
    """Draw the benchmark.

    Each class has a latent center. Image features are the center projected by
    a fixed random matrix plus isotropic noise. Text rows are bag-of-words
    counts: ``doc_len`` draws from the softmax of the center's text projection
    plus noise.
    """
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    centers = rng.normal(size=(cfg.classes, cfg.latent_dim))
    P_img = rng.normal(size=(cfg.latent_dim, cfg.d_img)) / np.sqrt(cfg.latent_dim)
    P_txt = rng.normal(size=(cfg.latent_dim, cfg.d_txt)) / np.sqrt(cfg.latent_dim)
    n = cfg.classes * cfg.per_class
    labels = np.repeat(np.arange(cfg.classes), cfg.per_class)
    x_img = centers[labels] @ P_img + cfg.sigma_img * rng.normal(size=(n, cfg.d_img))
    logits = centers[labels] @ P_txt + cfg.sigma_txt * rng.normal(size=(n, cfg.d_txt))
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    x_txt = np.vstack([rng.multinomial(cfg.doc_len, row) for row in p]).astype(np.float64)

    perm = rng.permutation(n)
    n_train = int(round(cfg.train_frac * n))
    n_val = int(round(cfg.val_frac * n))
    split = np.empty(n, dtype=object)
    split[perm[:n_train]] = "train"
    split[perm[n_train:n_train + n_val]] = "val"
    split[perm[n_train + n_val:]] = "test"
    unlabeled = np.zeros(n, dtype=bool)
    train_rows = perm[:n_train]
    unlabeled[train_rows[:int(round(cfg.unlabeled_frac * n_train))]] = True
    return SynthData(x_img, x_txt, labels, split.astype(str), unlabeled)


def write_dataset(data, out_dir):
    """Write the four data files plus ``manifest.txt``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    names = {"image": "image.txt", "text": "text.txt", "labels": "labels.txt", "split": "split.txt"}
    paths = {k: os.path.join(out_dir, v) for k, v in names.items()}
    write_matrix(paths["image"], data.x_img)
    write_matrix(paths["text"], data.x_txt)
    write_labels(paths["labels"], data.labels)
    write_split(paths["split"], data.split, data.unlabeled)
    manifest = DatasetManifest(paths["image"], paths["text"], paths["labels"], paths["split"],
                               data.x_img.shape[1], data.x_txt.shape[1])
    mpath = os.path.join(out_dir, "manifest.txt")
    manifest.save(mpath, relative_to=out_dir)
    return mpath
