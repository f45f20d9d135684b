import math

import numpy as np
import pytest

from artikit.errors import EmptyMask, FormatError, MissingInput, ShapeMismatch, UnsupportedOp
from artikit.numerics import (
    Adam,
    AdamState,
    LossWeights,
    Tape,
    Tensor,
    adam_step,
    atns_bytes,
    conv3d,
    conv3d_reference,
    conv_transpose3d,
    dice_loss,
    grad_check,
    group_norm,
    kl_loss,
    load_checkpoint,
    masked_cross_entropy,
    param_regression_loss,
    parse_atns,
    save_checkpoint,
    total_vae_loss,
)


def test_square_sum_gradient():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_array_equal(x.grad, [2.0, 4.0])


def test_shared_node_gradient_accumulates():
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = x * 2.0
    (y * y + y).sum().backward()
    np.testing.assert_allclose(x.grad, [2 * (2 * 6.0) + 2])


def test_tape_visits_each_node_once():
    x = Tensor(np.ones(3), requires_grad=True)
    y = x.exp()
    z = (y * y).sum()
    ops = Tape.from_output(z).ops()
    assert ops.count("exp") == 1 and len(ops) == len(set(map(id, Tape.from_output(z).nodes)))


def test_tensor_exponent_unsupported():
    with pytest.raises(UnsupportedOp):
        Tensor(np.ones(2)) ** Tensor(np.ones(2))


@pytest.mark.parametrize("name,f", [
    ("tanh", lambda x: x.tanh().sum()),
    ("sigmoid", lambda x: (x.sigmoid() * x).sum()),
    ("log_softmax", lambda x: (x.log_softmax(-1) * np.arange(4.0)).sum()),
    ("leaky_relu", lambda x: (x.leaky_relu(0.1) ** 2).sum()),
    ("cumsum", lambda x: (x.cumsum(1) * x).sum()),
    ("matmul", lambda x: (x @ x.T).sum()),
    ("getitem", lambda x: (x[[0, 2, 2]] * 3.0).sum()),
])
def test_primitive_gradients(name, f, rng):
    assert grad_check(f, rng.normal(size=(3, 4)) + 0.05) < 1e-6


def test_group_norm_gradient(rng):
    x = rng.normal(size=(2, 3, 3, 3, 4))
    g, b = rng.normal(size=4), rng.normal(size=4)
    w = rng.normal(size=x.shape)
    assert grad_check(lambda x, g, b: (group_norm(x, g, b, 2) * w).sum(), [x, g, b]) < 1e-6


@pytest.mark.parametrize("k,s,p", [(3, 1, 1), (2, 2, 0), (3, 2, 1), (1, 1, 0), (3, 2, 0)])
def test_conv3d_matches_reference(k, s, p, rng):
    x, w = rng.normal(size=(2, 6, 6, 6, 3)), rng.normal(size=(k, k, k, 3, 4))
    np.testing.assert_allclose(conv3d(Tensor(x), Tensor(w), None, s, p).data, conv3d_reference(x, w, s, p), atol=1e-10)


@pytest.mark.parametrize("k,s,p", [(2, 2, 0), (4, 2, 1), (3, 1, 1)])
def test_conv_transpose_is_adjoint(k, s, p, rng):
    x, w = rng.normal(size=(1, 3, 3, 3, 2)), rng.normal(size=(k, k, k, 2, 3))
    y = conv_transpose3d(Tensor(x), Tensor(w), None, s, p).data
    u = rng.normal(size=y.shape)
    # <convT(x), u> = <x, conv(u)> with the kernel's channel roles swapped
    lhs = float((y * u).sum())
    rhs = float((x * conv3d_reference(u, w.transpose(0, 1, 2, 4, 3), s, p)).sum())
    assert math.isclose(lhs, rhs, rel_tol=1e-10)


def test_dice_closed_forms():
    target = np.zeros(512)
    target[:100] = 1
    assert dice_loss(target.copy(), target).item() <= 1e-6 / (200 + 1e-6)
    assert dice_loss(np.zeros(512), target).item() == 1.0
    with pytest.raises(ShapeMismatch):
        dice_loss(np.zeros(3), np.zeros(4))


def test_dice_matches_hand_formula(rng):
    p, y = rng.uniform(size=64), (rng.uniform(size=64) > 0.5).astype(float)
    expect = 1 - 2 * (p * y).sum() / (y.sum() + p.sum() + 1e-6)
    assert math.isclose(dice_loss(p, y).item(), expect, rel_tol=1e-12)


def test_cross_entropy_limits(rng):
    mask = np.ones(5, bool)
    assert math.isclose(masked_cross_entropy(np.zeros((5, 8)), np.zeros(5, int), mask).item(), math.log(8),
                        abs_tol=1e-12)
    logits = np.full((5, 8), -50.0)
    logits[:, 3] = 50.0
    assert masked_cross_entropy(logits, np.full(5, 3), mask).item() < 1e-12
    with pytest.raises(EmptyMask):
        masked_cross_entropy(np.zeros((5, 8)), np.zeros(5, int), np.zeros(5, bool))


def test_regression_unit_offset():
    target = np.zeros((2, 14))
    pred = target.copy()
    pred[0, 0] = 1.0
    pred[1] = 7.0  # inactive voxel
    assert param_regression_loss(pred, target, np.array([True, False])).item() == 1.0


def test_kl_values(rng):
    assert kl_loss(np.zeros(4), np.zeros(4)).item() == 0.0
    assert kl_loss(np.ones(1), np.zeros(1)).item() == 0.5
    assert kl_loss(rng.normal(size=1000), rng.normal(size=1000)).item() >= 0


def test_total_loss_arithmetic():
    comps = {k: Tensor(np.array(1.0)) for k in ("kl", "occ", "sem", "joint", "bbox")}
    total, log = total_vae_loss(comps, LossWeights())
    assert math.isclose(total.item(), 4.001, rel_tol=1e-15)
    assert log["total"] == total.item()
    assert total_vae_loss(comps, LossWeights(0.0))[0].item() == 4.0


def test_losses_are_permutation_invariant(rng):
    logits, labels = rng.normal(size=(30, 8)), rng.integers(0, 8, 30)
    mask = rng.uniform(size=30) > 0.3
    perm = rng.permutation(30)
    a = masked_cross_entropy(logits, labels, mask).item()
    b = masked_cross_entropy(logits[perm], labels[perm], mask[perm]).item()
    assert math.isclose(a, b, rel_tol=1e-12)


def test_adam_closed_form():
    p = [np.zeros(3)]
    adam_step(p, [np.ones(3)], AdamState(), lr=1e-4)
    np.testing.assert_allclose(p[0], -1e-4 / (1 + 1e-8))
    q = [np.ones(2)]
    adam_step(q, [np.zeros(2)], AdamState())
    np.testing.assert_array_equal(q[0], 1.0)


def test_adam_descends_a_bowl():
    x = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = Adam([x], lr=0.05)
    norms = []
    for _ in range(200):
        opt.zero_grad()
        (x * x).sum().backward()
        opt.step()
        norms.append(np.linalg.norm(x.data))
    assert all(b <= a for a, b in zip(norms[5:60], norms[6:61]))
    assert norms[-1] < 0.1


def test_checkpoint_round_trip(tmp_path):
    tensors = {"a": np.arange(6, dtype=np.float32).reshape(2, 3), "b.w": np.ones((1, 1, 1, 2, 2), np.float32)}
    save_checkpoint(tmp_path / "x.atns", tensors, {"kind": "vae"})
    back, meta = load_checkpoint(tmp_path / "x.atns")
    assert meta == {"kind": "vae"}
    for k in tensors:
        np.testing.assert_array_equal(back[k], tensors[k])
    assert atns_bytes(back, meta) == (tmp_path / "x.atns").read_bytes()


def test_checkpoint_errors(tmp_path):
    with pytest.raises(MissingInput, match="checkpoint not found"):
        load_checkpoint(tmp_path / "missing.atns")
    with pytest.raises(FormatError):
        parse_atns(b"ATNS1" + bytes(2))
