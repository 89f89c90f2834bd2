import pytest
import torch

from contralocal.oracles import finite_difference_gradient
from contralocal.triplet_loss import (
    DTYPE,
    PIVOT_HALF,
    PIVOT_ZERO,
    EncoderWeights,
    QuadraticProgram,
    TripletLossInstance,
    decode_kkt_highd,
    encode_qp,
    gradient,
    hinge_arguments,
    kkt_residual_qp,
    kkt_residual_tripletloss,
    linear_model_gradient,
    linear_model_loss,
    linear_model_pgd,
    loss,
    projected_gradient_descent,
)
from contralocal.utils import InputError

QP2 = QuadraticProgram([[1.0, 0.5], [0.5, -2.0]], [0.3, -0.7])
QP4 = QuadraticProgram(
    [[2.0, -1.0, 0.0, 0.25], [-1.0, 0.5, 1.5, 0.0], [0.0, 1.5, -1.0, -0.5], [0.25, 0.0, -0.5, 3.0]],
    [-0.4, 0.2, 0.0, -1.1],
)
CONVEX = QuadraticProgram(
    [[2.0, -1.0, 0.0, 0.25], [-1.0, 2.0, 0.5, 0.0], [0.0, 0.5, 1.5, -0.5], [0.25, 0.0, -0.5, 3.0]],
    [-0.4, 0.2, 0.0, -1.1],
)


def box_points(n, dim, count, seed=0):
    generator = torch.Generator().manual_seed(seed)
    return [0.05 + 0.9 * torch.rand(n, dim, generator=generator, dtype=DTYPE) for _ in range(count)]


def anchor_instance():
    # x against the pivots: hinge = x^2 - (x - 1/2)^2 + 1 = x + 3/4
    return TripletLossInstance(1, [(0, 1, 2, 1.0)])


def test_loss_and_gradient_of_one_triplet():
    t = anchor_instance()
    assert t.names == ("x0", PIVOT_ZERO, PIVOT_HALF)
    assert loss(t, [0.0]) == pytest.approx(0.75)
    assert loss(t, [[1.0]]) == pytest.approx(1.75)
    g = gradient(t, [0.3])
    assert g.shape == (1, 1)
    assert g.item() == pytest.approx(1.0)


def test_hinge_kink_contributes_nothing():
    t = TripletLossInstance(2, [(0, 2, 1, 1.0)], margin=1.0)
    p = [[0.0], [1.0]]
    assert hinge_arguments(t, p).tolist() == [0.0]
    assert loss(t, p) == 0.0
    assert gradient(t, p).abs().sum().item() == 0.0


def test_points_are_checked():
    t = anchor_instance()
    with pytest.raises(InputError):
        loss(t, [1.5])
    with pytest.raises(InputError):
        loss(t, [[0.1, 0.2]])


def test_instance_validation():
    with pytest.raises(InputError):
        TripletLossInstance(1, [(0, 0, 2, 1.0)])
    with pytest.raises(InputError):
        TripletLossInstance(1, [(0, 1, 3, 1.0)])
    with pytest.raises(InputError):
        TripletLossInstance(1, [(0, 1, 2, -1.0)])
    with pytest.raises(InputError):
        TripletLossInstance(1, [], margin=0)


def test_gradient_matches_autograd():
    t, _ = encode_qp(QP4, dim=2)
    for p in box_points(4, 2, 3):
        q = p.clone().requires_grad_(True)
        full = torch.cat([q, t.pivots()], 0)
        hinge = ((full[t.a] - full[t.b]) ** 2).sum(1) - ((full[t.a] - full[t.c]) ** 2).sum(1) + t.margin
        (t.w * hinge.clamp(min=0)).sum().backward()
        assert torch.allclose(q.grad, gradient(t, p), atol=1e-12)


def test_gradient_matches_finite_differences():
    t, _ = encode_qp(QP2)
    for p in box_points(2, 1, 3, seed=1):
        fd = finite_difference_gradient(lambda q: loss(t, q), p)
        assert torch.allclose(fd, gradient(t, p), atol=1e-6)
    with pytest.raises(InputError):
        finite_difference_gradient(lambda q: loss(t, q), torch.zeros(2, 1, dtype=DTYPE))


def test_qp_validation_and_text():
    with pytest.raises(InputError):
        QuadraticProgram([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(InputError):
        QuadraticProgram([[1.0]], [0.0, 0.0])
    with pytest.raises(InputError, match="line 3"):
        QuadraticProgram.from_text("2\n1 0\n0 x\n0 0\n")
    with pytest.raises(InputError):
        QuadraticProgram.from_text("2\n1 0\n0 1\n")
    back = QuadraticProgram.from_text(QP2.to_text())
    assert torch.equal(back.Q, QP2.Q) and torch.equal(back.b, QP2.b)


def test_qp_kkt_residual():
    qp = QuadraticProgram([[1.0]], [-0.5])
    assert kkt_residual_qp(qp, [0.25]) == 0.0
    assert kkt_residual_qp(qp, [0.0]) == pytest.approx(0.5)
    assert kkt_residual_qp(qp, [1.0]) == pytest.approx(1.5)
    concave = QuadraticProgram([[-1.0]], [0.0])
    assert kkt_residual_qp(concave, [1.0]) == 0.0
    with pytest.raises(InputError):
        kkt_residual_qp(qp, [1.2])


def test_one_variable_encoding_descends_to_the_qp_minimizer():
    qp = QuadraticProgram([[1.0]], [-0.5])
    t, weights = encode_qp(qp)
    assert sorted(e.target for e in weights.entries) == [-0.5, 1.0]
    p, trace = projected_gradient_descent(t, [[0.9]])
    assert trace.converged
    assert p.item() == pytest.approx(0.25, abs=1e-5)
    assert kkt_residual_qp(qp, p.reshape(-1)) <= 1e-5
    assert all(b <= a + 1e-12 for a, b in zip(trace.losses, trace.losses[1:]))


@pytest.mark.parametrize("grouping", ["pairwise", "triples"])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_encoded_loss_tracks_the_qp(grouping, dim):
    t, _ = encode_qp(QP4, dim=dim, grouping=grouping)
    offsets = []
    for p in box_points(4, dim, 4, seed=dim):
        assert (hinge_arguments(t, p) >= -1e-12).all()
        offsets.append(loss(t, p) - sum(QP4.value(p[:, k]) for k in range(dim)))
        expected = torch.stack([QP4.grad(p[:, k]) for k in range(dim)], 1)
        assert torch.allclose(gradient(t, p), expected, atol=1e-10)
    assert max(offsets) - min(offsets) < 1e-9


def test_dual_split():
    _, weights = encode_qp(QP4)
    for e in weights.entries:
        assert e.w >= 0 and e.w_dual >= 0
        assert e.w * e.w_dual == 0
        assert e.w - e.w_dual == e.target


def test_triples_grouping_uses_the_template():
    qp = QuadraticProgram([[1.0, 0.5, -0.5], [0.5, 2.0, 0.25], [-0.5, 0.25, -1.0]], [0.1, 0.2, -0.3])
    _, weights = encode_qp(qp, grouping="triples")
    assert len(weights.entries) == 12
    assert {e.triplet for e in weights.entries} == {
        (0, 3, 1), (1, 3, 0), (0, 3, 2), (2, 3, 0), (1, 3, 2), (2, 3, 1),
        (0, 3, 4), (1, 3, 4), (2, 3, 4), (3, 0, 4), (3, 1, 4), (3, 2, 4),
    }
    with pytest.raises(InputError):
        encode_qp(qp, grouping="quads")


def test_weights_ledger_round_trip():
    t, weights = encode_qp(QP2)
    back = EncoderWeights.from_json(weights.to_json(t.names), t.names)
    assert back.grouping == "pairwise"
    assert back.targets == weights.targets
    assert [e.triplet for e in back.entries] == [e.triplet for e in weights.entries]
    assert torch.equal(back.qp.Q, QP2.Q)


def test_instance_text_round_trip():
    t, _ = encode_qp(QP4, dim=2)
    back = TripletLossInstance.from_text(t.to_text())
    assert (back.n, back.dim, back.margin, back.names) == (t.n, t.dim, t.margin, t.names)
    assert back.triplets == t.triplets
    with pytest.raises(InputError):
        TripletLossInstance.from_text(t.to_text().replace("triplet-loss", "contrastive"))


def test_pgd_reaches_a_kkt_point():
    t, _ = encode_qp(CONVEX)
    p, trace = projected_gradient_descent(t, [[0.5]] * 4, tol=1e-8)
    assert trace.converged
    assert kkt_residual_tripletloss(t, p) <= 1e-8
    assert kkt_residual_qp(CONVEX, decode_kkt_highd(p)) <= 1e-7


def test_pgd_reports_maxit():
    t, _ = encode_qp(QP4)
    _, trace = projected_gradient_descent(t, [[0.5]] * 4, maxit=2, tol=1e-12)
    assert not trace.converged
    assert trace.iterations == 2
    assert len(trace.losses) == 3


def test_backtracking_keeps_the_loss_down():
    t, _ = encode_qp(QuadraticProgram([[1.0]], [-0.5]))
    p, trace = projected_gradient_descent(t, [[0.9]], step=10.0, backtrack=True, tol=1e-8)
    assert trace.converged
    assert trace.step < 10.0
    assert all(b <= a + 1e-12 for a, b in zip(trace.losses, trace.losses[1:]))
    with pytest.raises(InputError):
        projected_gradient_descent(t, [[0.5]], step=0.0)


def test_decode_takes_the_first_coordinate():
    p = torch.tensor([[0.1, 0.9], [0.7, 0.2]], dtype=DTYPE)
    assert decode_kkt_highd(p).tolist() == [0.1, 0.7]


def test_linear_model_with_basis_inputs_is_the_point_problem():
    t, _ = encode_qp(CONVEX)
    inputs = torch.eye(4, dtype=DTYPE)
    for p in box_points(4, 1, 3, seed=5):
        theta = p.reshape(-1)
        assert linear_model_loss(theta, inputs, t) == pytest.approx(loss(t, p))
        assert torch.allclose(linear_model_gradient(theta, inputs, t), gradient(t, p).reshape(-1))
    theta, model = linear_model_pgd(torch.full((4,), 0.5, dtype=DTYPE), inputs, t, tol=1e-8)
    p, point = projected_gradient_descent(t, [[0.5]] * 4, tol=1e-8)
    assert model.iterations == point.iterations
    assert torch.allclose(theta, p.reshape(-1))
    with pytest.raises(InputError):
        linear_model_loss(theta, 2 * inputs, t)


def test_encoded_instances_step_by_the_qp_norm():
    t, weights = encode_qp(QP4, dim=2)
    expected = 1.0 / (2 * torch.linalg.norm(QP4.Q).item() + 1)
    assert weights.qp is t.qp
    assert t.default_step() == pytest.approx(expected)
    _, trace = projected_gradient_descent(t, [[0.5, 0.5]] * 4, maxit=1, tol=1e-12)
    assert trace.step == pytest.approx(expected)


def test_loaded_instances_fall_back_to_the_smoothness_bound():
    t, weights = encode_qp(QP2)
    back = TripletLossInstance.from_text(t.to_text())
    assert back.qp is None
    assert back.default_step() == pytest.approx(1.0 / (back.smoothness_bound() + 1))
    back.qp = EncoderWeights.from_json(weights.to_json(t.names), t.names).qp
    assert back.default_step() == pytest.approx(t.default_step())
