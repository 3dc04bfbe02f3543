"""File formats: text feature matrices, labels, splits, manifests, binary checkpoints."""
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"XMMR"
CHECKPOINT_VERSION = 1
SPLITS = ("train", "val", "test")


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit status 2)."""


# -- feature matrices ---------------------------------------------------------

def write_matrix(path, X):
    """Header ``<rows> <cols>`` then one whitespace-separated row per line.

    Values use 17 significant digits, which round-trips float64 exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    with open(path, "w") as fh:
        fh.write(f"{X.shape[0]} {X.shape[1]}\n")
        for row in X:
            fh.write(" ".join("%.17g" % v for v in row))
            fh.write("\n")


def read_matrix(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}:1: empty file, expected '<rows> <cols>' header")
    head = lines[0].split()
    try:
        rows, cols = int(head[0]), int(head[1])
        if len(head) != 2 or rows < 0 or cols <= 0:
            raise ValueError
    except (ValueError, IndexError):
        raise DataError(f"{path}:1: bad header {lines[0]!r}, expected '<rows> <cols>'") from None
    body = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(body) != rows:
        raise DataError(f"{path}: header declares {rows} rows, found {len(body)}")
    X = np.empty((rows, cols))
    for r, (lineno, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != cols:
            raise DataError(f"{path}:{lineno}: expected {cols} values, found {len(parts)}")
        for c, tok in enumerate(parts):
            try:
                X[r, c] = float(tok)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric cell {tok!r}") from None
        if not np.all(np.isfinite(X[r])):
            raise DataError(f"{path}:{lineno}: non-finite value")
    return X


# -- labels and splits --------------------------------------------------------

def write_labels(path, labels):
    with open(path, "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in labels)


def read_labels(path):
    out = []
    with open(path) as fh:
        for lineno, ln in enumerate(fh, 1):
            tok = ln.strip()
            if not tok:
                continue
            try:
                out.append(int(tok))
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {tok!r} is not an integer") from None
    return np.array(out, dtype=np.int64)


def write_split(path, split, unlabeled):
    with open(path, "w") as fh:
        for s, u in zip(split, unlabeled):
            fh.write(f"{s},unlabeled\n" if u else f"{s}\n")


def read_split(path):
    """Returns ``(split, unlabeled)``: a str array and a bool mask."""
    split, unlabeled = [], []
    with open(path) as fh:
        for lineno, ln in enumerate(fh, 1):
            tok = ln.strip()
            if not tok:
                continue
            parts = [p.strip() for p in tok.split(",")]
            names = [p for p in parts if p in SPLITS]
            extra = [p for p in parts if p not in SPLITS and p != "unlabeled"]
            if extra:
                raise DataError(f"{path}:{lineno}: unknown split token(s) {extra}")
            if len(names) != 1:
                raise DataError(f"{path}:{lineno}: row assigned to {len(names)} splits {names}; "
                                "exactly one of train/val/test required")
            split.append(names[0])
            unlabeled.append("unlabeled" in parts)
    return np.array(split), np.array(unlabeled, dtype=bool)


# -- config-style key/value files ---------------------------------------------

def read_kv(path):
    out = {}
    with open(path) as fh:
        for lineno, ln in enumerate(fh, 1):
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            k, v = ln.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def write_kv(path, mapping):
    with open(path, "w") as fh:
        for k, v in mapping.items():
            fh.write(f"{k} = {v}\n")


# -- dataset manifests ----------------------------------------------------------

@dataclass
class DatasetManifest:
    image: str
    text: str
    labels: str
    split: str
    image_dim: int = None
    text_dim: int = None

    @classmethod
    def load(cls, path):
        kv = read_kv(path)
        base = os.path.dirname(os.path.abspath(path))
        missing = [k for k in ("data.image", "data.text", "data.labels", "data.split") if k not in kv]
        if missing:
            raise DataError(f"{path}: manifest lacks {missing}")

        def resolve(p):
            return p if os.path.isabs(p) else os.path.join(base, p)

        dims = {k: int(kv[k]) for k in ("data.image_dim", "data.text_dim") if k in kv}
        return cls(resolve(kv["data.image"]), resolve(kv["data.text"]),
                   resolve(kv["data.labels"]), resolve(kv["data.split"]),
                   dims.get("data.image_dim"), dims.get("data.text_dim"))

    def save(self, path, relative_to=None):
        def rel(p):
            return os.path.relpath(p, relative_to) if relative_to else p

        kv = {"data.image": rel(self.image), "data.text": rel(self.text),
              "data.labels": rel(self.labels), "data.split": rel(self.split)}
        if self.image_dim is not None:
            kv["data.image_dim"] = self.image_dim
        if self.text_dim is not None:
            kv["data.text_dim"] = self.text_dim
        write_kv(path, kv)


@dataclass
class Dataset:
    x_img: np.ndarray
    x_txt: np.ndarray
    labels: np.ndarray
    split: np.ndarray
    unlabeled: np.ndarray
    img_mean: np.ndarray
    img_std: np.ndarray

    def rows(self, name):
        return np.flatnonzero(self.split == name)

    @property
    def train_labeled(self):
        return np.flatnonzero((self.split == "train") & ~self.unlabeled)

    @property
    def train_unlabeled(self):
        return np.flatnonzero((self.split == "train") & self.unlabeled)

    def standardize(self, x_img):
        return (x_img - self.img_mean) / self.img_std


def ingest(manifest):
    """Load and cross-check every file of a manifest."""
    if isinstance(manifest, (str, os.PathLike)):
        manifest = DatasetManifest.load(manifest)
    for p in (manifest.image, manifest.text, manifest.labels, manifest.split):
        if not os.path.exists(p):
            raise DataError(f"missing input file {p}")
    x_img = read_matrix(manifest.image)
    x_txt = read_matrix(manifest.text)
    labels = read_labels(manifest.labels)
    split, unlabeled = read_split(manifest.split)
    counts = {manifest.image: x_img.shape[0], manifest.text: x_txt.shape[0],
              manifest.labels: labels.size, manifest.split: split.size}
    if len(set(counts.values())) != 1:
        ref = manifest.image
        for p, c in counts.items():
            if c != counts[ref]:
                raise DataError(f"row count mismatch: {ref} has {counts[ref]} rows, {p} has {c}")
    for name, X, d in (("image", x_img, manifest.image_dim), ("text", x_txt, manifest.text_dim)):
        if d is not None and X.shape[1] != d:
            raise DataError(f"{name} features have {X.shape[1]} columns, manifest declares {d}")
    bad = np.flatnonzero((split == "test") & (labels < 0))
    if bad.size:
        raise DataError(f"{manifest.labels}:{bad[0] + 1}: test row without a label")
    bad = np.flatnonzero((split == "train") & ~unlabeled & (labels < 0))
    if bad.size:
        raise DataError(f"{manifest.labels}:{bad[0] + 1}: labeled training row without a label")
    train = split == "train"
    if not train.any():
        raise DataError(f"{manifest.split}: no training rows")
    mean = x_img[train].mean(axis=0)
    std = x_img[train].std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return Dataset(x_img, x_txt, labels, split, unlabeled, mean, std)


# -- checkpoints ------------------------------------------------------------------

def save_checkpoint(path, stage, arrays, config=None, seed=0):
    """Little-endian binary checkpoint.

    Layout: magic ``XMMR``, u32 version, u32 + utf-8 stage tag, u32 + utf-8
    JSON config snapshot, u64 seed, u32 matrix count, then per matrix: u32
    name length, utf-8 name, u64 rows, u64 cols, rows*cols f64 values.
    """
    cfg_blob = json.dumps(config or {}, sort_keys=True).encode()
    stage_blob = stage.encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(stage_blob)) + stage_blob)
        fh.write(struct.pack("<I", len(cfg_blob)) + cfg_blob)
        fh.write(struct.pack("<Q", int(seed) & 0xFFFFFFFFFFFFFFFF))
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            a = np.asarray(arr, dtype="<f8")
            if a.ndim == 1:
                a = a.reshape(1, -1)
            nb = name.encode()
            fh.write(struct.pack("<I", len(nb)) + nb)
            fh.write(struct.pack("<QQ", a.shape[0], a.shape[1]))
            fh.write(np.ascontiguousarray(a).tobytes())


@dataclass
class Checkpoint:
    stage: str
    arrays: dict
    config: dict
    seed: int
    version: int = CHECKPOINT_VERSION


def load_checkpoint(path):
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not an XMMR checkpoint")
    off = 4

    def take(fmt):
        nonlocal off
        vals = struct.unpack_from(fmt, buf, off)
        off += struct.calcsize(fmt)
        return vals

    def take_bytes(n):
        nonlocal off
        out = buf[off:off + n]
        if len(out) != n:
            raise DataError(f"{path}: truncated checkpoint")
        off += n
        return out

    try:
        (version,) = take("<I")
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        stage = take_bytes(take("<I")[0]).decode()
        config = json.loads(take_bytes(take("<I")[0]).decode())
        (seed,) = take("<Q")
        (count,) = take("<I")
        arrays = {}
        for _ in range(count):
            name = take_bytes(take("<I")[0]).decode()
            rows, cols = take("<QQ")
            data = np.frombuffer(take_bytes(rows * cols * 8), dtype="<f8")
            arrays[name] = data.reshape(rows, cols).astype(np.float64)
    except struct.error:
        raise DataError(f"{path}: truncated checkpoint") from None
    return Checkpoint(stage, arrays, config, seed, version)


def write_trace_csv(path_or_fh, report):
    own = isinstance(path_or_fh, (str, os.PathLike))
    fh = open(path_or_fh, "w") if own else path_or_fh
    try:
        fh.write("step,semi_loss,quad_loss,total\n")
        for step, s, q, t in report.rows():
            fh.write(f"{step},{s!r},{q!r},{t!r}\n")
    finally:
        if own:
            fh.close()
