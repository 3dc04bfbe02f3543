import numpy as np
import pytest

from conftest import central_diff, rel_err, tiny_problem
from xmmr import metric_net as mn
from xmmr import trainer as tr
from xmmr.nd_core import AffineLayer, ShapeError


def _zero_state(in_dim=5, hidden=6):
    net = mn.NetConfig(hidden_dim=hidden, out_dim=hidden, init_scheme="zeros",
                       head_init_scheme="zeros")
    return mn.ModelState.init(in_dim, in_dim, net, seed=0)


def test_zero_parameters_give_half(rng):
    st = _zero_state()
    Q_img, Q_txt = mn.embed(st, rng.normal(size=(4, 5)), rng.normal(size=(2, 5)))
    assert np.all(Q_img == 0.5) and np.all(Q_txt == 0.5)


def test_default_shapes(rng):
    st = mn.ModelState.init(7, 3, seed=1)
    Q_img, Q_txt = mn.embed(st, rng.normal(size=(5, 7)), rng.normal(size=(2, 3)))
    assert Q_img.shape == (5, 256) and Q_txt.shape == (2, 256)
    assert len(st.image_pathway.trunk) == 3


def test_embed_empty_and_deterministic(rng):
    st = mn.ModelState.init(3, 3, mn.NetConfig(hidden_dim=4, out_dim=6), seed=2)
    Qi, Qt = mn.embed(st, np.empty((0, 3)), np.empty((0, 3)))
    assert Qi.shape == (0, 6) and Qt.shape == (0, 6)
    S = rng.normal(size=(3, 3))
    a = mn.embed(st, S, S)[0]
    assert a.tobytes() == mn.embed(st, S, S)[0].tobytes()


def test_wrong_input_width():
    st = mn.ModelState.init(3, 3, mn.NetConfig(hidden_dim=4, out_dim=4), seed=0)
    with pytest.raises(ShapeError):
        mn.forward(st.image_pathway, np.zeros((2, 5)), "semi")


def test_zero_upstream_gives_zero_grads(rng):
    st = mn.ModelState.init(3, 3, mn.NetConfig(hidden_dim=4, out_dim=4), seed=0)
    out, cache = mn.forward(st.image_pathway, rng.normal(size=(2, 3)), "semi")
    grads = mn.backward(st.image_pathway, cache, np.zeros_like(out))
    assert all(not gw.any() and not gb.any() for gw, gb in grads.values())


@pytest.mark.parametrize("branch", ["semi", "quad", "trunk"])
@pytest.mark.parametrize("act", ["sigmoid", "identity"])
def test_single_branch_backward_fd(rng, branch, act):
    net = mn.NetConfig(hidden_dim=4, out_dim=3, trunk_activation=act)
    pw = mn.ModelState.init(3, 3, net, seed=4).image_pathway
    pw.fit_input_normalizer(rng.normal(size=(10, 3)) * 3 + 1)
    S = rng.normal(size=(5, 3))
    out, cache = mn.forward(pw, S, branch)
    up = rng.normal(size=out.shape)
    grads = mn.backward(pw, cache, up)
    loss = lambda: float(np.sum(mn.forward(pw, S, branch)[0] * up))
    for name, layer in pw.layers():
        gw, gb = grads[name]
        assert rel_err(gw, central_diff(loss, layer.weight)) <= 1e-6 or not np.any(gw)
        assert rel_err(gb, central_diff(loss, layer.bias)) <= 1e-6 or not np.any(gb)


def test_branches_isolated(rng):
    pw = mn.ModelState.init(3, 3, mn.NetConfig(hidden_dim=4, out_dim=4), seed=0).image_pathway
    out, cache = mn.forward(pw, rng.normal(size=(2, 3)), "semi")
    grads = mn.backward(pw, cache, np.ones_like(out))
    assert not grads["head_quad"][0].any()
    assert grads["head_semi"][0].any()


def test_perturbing_quad_head_leaves_semi_output(rng):
    st = mn.ModelState.init(3, 3, mn.NetConfig(hidden_dim=4, out_dim=4), seed=0)
    S = rng.normal(size=(3, 3))
    before = mn.embed(st, S, S, "semi")[0]
    st.image_pathway.heads["quad"].weight += 1.0
    np.testing.assert_array_equal(mn.embed(st, S, S, "semi")[0], before)


@pytest.mark.parametrize("shared", [False, True])
def test_end_to_end_fd(shared):
    state, inputs, cfg = tiny_problem(seed=3, shared_head=shared)
    sg = tr.step_grads(state, *inputs, cfg)
    assert sg.semi.count > 0 and sg.quad.loss_value > 0
    loss = lambda: tr.step_grads(state, *inputs, cfg).total
    for tag, pw, grads in (("img", state.image_pathway, sg.img), ("txt", state.text_pathway, sg.txt)):
        for name, layer in pw.layers():
            gw, gb = grads[name]
            assert rel_err(gw, central_diff(loss, layer.weight)) <= 1e-5, (tag, name)
            assert rel_err(gb, central_diff(loss, layer.bias)) <= 1e-5, (tag, name)


def test_state_round_trip(rng):
    net = mn.NetConfig(hidden_dim=4, out_dim=3, shared_head=True)
    st = mn.ModelState.init(3, 2, net, seed=5)
    st.image_pathway.trunk[0].vel_w += 0.25
    st.text_pathway.fit_input_normalizer(rng.normal(size=(4, 2)))
    back = mn.ModelState.from_arrays(st.named_arrays(), net, step_counter=9)
    a, b = st.named_arrays(), back.named_arrays()
    assert a.keys() == b.keys()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert back.image_pathway.shared_head and back.step_counter == 9


def test_config_validation():
    with pytest.raises(ValueError):
        mn.NetConfig(trunk_activation="tanh")
    with pytest.raises(ValueError):
        mn.NetConfig(inference_branch="both")


def test_input_normalizer_zero_variance():
    pw = mn.PathwayParams([AffineLayer(np.eye(2), np.zeros(2))], {}, "identity")
    pw.fit_input_normalizer([[1.0, 2.0], [3.0, 2.0]])
    np.testing.assert_array_equal(pw.in_scale, [1.0, 1.0])
    np.testing.assert_array_equal(pw.in_shift, [2.0, 2.0])
