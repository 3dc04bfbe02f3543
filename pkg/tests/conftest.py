import numpy as np
import pytest


def central_diff(fn, x, h=1e-5):
    """Central-difference gradient of scalar ``fn`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        up = fn()
        x[idx] = old - h
        down = fn()
        x[idx] = old
        g[idx] = (up - down) / (2 * h)
    return g


def rel_err(a, b):
    """Norm-wise relative error; 0 when both are zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    den = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def brute_A(Si, St, k):
    """Direct OR rule: p is a neighbour of q or q a neighbour of p."""
    n_i, n_t = len(Si), len(St)
    d = [[float(np.sum((Si[p] - St[q]) ** 2)) for q in range(n_t)] for p in range(n_i)]
    kk_i, kk_t = min(k, n_t), min(k, n_i)
    nn_i = [sorted(range(n_t), key=lambda q: (d[p][q], q))[:kk_i] for p in range(n_i)]
    nn_t = [sorted(range(n_i), key=lambda p: (d[p][q], p))[:kk_t] for q in range(n_t)]
    return np.array([[int(q in nn_i[p] or p in nn_t[q]) for q in range(n_t)]
                     for p in range(n_i)], dtype=np.uint8)


def brute_ap(rel_ranked, cutoff=None, total=False):
    """Textbook AP: precision at every relevant rank, averaged."""
    rel = [bool(x) for x in rel_ranked]
    n_all = sum(rel)
    if cutoff is not None:
        rel = rel[:cutoff]
    hits, precs = 0, []
    for i, r in enumerate(rel):
        if r:
            hits += 1
            precs.append(hits / (i + 1.0))
    denom = n_all if total else len(precs)
    if denom == 0:
        return 0.0
    acc = 0.0
    for p in precs:
        acc += p
    return acc / denom


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tiny_problem(seed=0, dim=4, shared_head=False):
    """Downsized two-pathway net plus one fixed mini-batch with both losses active."""
    from xmmr import metric_net as mn
    from xmmr import trainer as tr
    from xmmr.graph import labeled_similarity, unlabeled_similarity
    from xmmr.sampler import MiniBatch, select_pairs

    r = np.random.default_rng(seed)
    net = mn.NetConfig(hidden_dim=dim, out_dim=dim, shared_head=shared_head,
                       init_scheme="glorot_sigmoid", normalize_inputs=False)
    cfg = tr.TrainConfig(net=net, m=2, n=3, graph_k=1, margin_alpha=2.0, margin_beta=1.0,
                         quad_count=4, seed=seed)
    state = tr.init_state(dim, dim, cfg)
    batch = MiniBatch(r.normal(size=(3, dim)), r.normal(size=(3, dim)), [0, 1], 2)
    C = labeled_similarity(batch.labels, batch.labels)
    A = unlabeled_similarity(batch.S_img[2:], batch.S_txt[2:], 1)
    pairs = select_pairs(batch, C, A, r)
    quads = np.array([[0, 0, 1, 1], [1, 1, 0, 0], [0, 0, 1, 1], [1, 1, 0, 0]])
    return state, (batch, C, A, pairs, quads), cfg


ACCEPTANCE_LINES = []


def record(criterion, ok, detail=""):
    """Log one acceptance verdict; the lines are echoed in the terminal summary."""
    line = f"{'PASS' if ok else 'FAIL'}  {criterion}" + (f"  ({detail})" if detail else "")
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
