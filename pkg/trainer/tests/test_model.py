"""Model invariants: weight tying, shape stability, loop embeddings."""

import pytest
import torch

from looped_trainer.model import LoopedTransformer


def make(loop_count, use_loop_embedding=False):
    torch.manual_seed(0)
    return LoopedTransformer(
        vocab_size=4,
        seq_len=12,
        dim=32,
        heads=4,
        mlp_dim=64,
        loop_count=loop_count,
        use_loop_embedding=use_loop_embedding,
    )


def test_backbone_parameter_count_independent_of_loops():
    counts = {make(k).backbone_parameter_count() for k in (1, 2, 8, 16)}
    assert len(counts) == 1


def test_hidden_shape_invariant_across_loops():
    model = make(6)
    tokens = torch.randint(0, 4, (5, 12))
    pos = torch.arange(12)
    x = model.token_emb(tokens) + model.pos_emb(pos)
    for i in range(model.loop_count):
        before = x.shape
        x = model.block(model.add_loop_embedding(x, i))
        assert x.shape == before == (5, 12, 32)


def test_zero_init_loop_embedding_matches_plain_model():
    with_emb = make(4, use_loop_embedding=True)
    plain = make(4, use_loop_embedding=False)
    plain.load_state_dict(
        {k: v for k, v in with_emb.state_dict().items() if not k.startswith("loop_emb")}
    )
    tokens = torch.randint(0, 4, (7, 12))
    with torch.no_grad():
        assert torch.equal(with_emb(tokens), plain(tokens))


def test_each_loop_consumes_its_own_embedding_row():
    model = make(3, use_loop_embedding=True)
    with torch.no_grad():
        model.loop_emb.weight[1] = 5.0  # only iteration 1 perturbed
    tokens = torch.randint(0, 4, (2, 12))
    baseline = make(3, use_loop_embedding=True)
    baseline.load_state_dict(
        {k: v for k, v in model.state_dict().items() if not k.startswith("loop_emb")},
        strict=False,
    )
    with torch.no_grad():
        assert not torch.equal(model(tokens), baseline(tokens))


def test_loop_embedding_gradient_only_for_visited_indices():
    model = make(4, use_loop_embedding=True)
    tokens = torch.randint(0, 4, (3, 12))
    pos = torch.arange(12)
    x = model.token_emb(tokens) + model.pos_emb(pos)
    # visit only iterations 0 and 2
    for i in (0, 2):
        x = model.block(model.add_loop_embedding(x, i))
    model.head(x[:, -1, :]).sum().backward()
    grad = model.loop_emb.weight.grad
    assert grad is not None
    assert grad[0].abs().sum() > 0 and grad[2].abs().sum() > 0
    assert grad[1].abs().sum() == 0 and grad[3].abs().sum() == 0


def test_loop_embedding_finite_difference():
    # d(output_sum)/d(loop_emb[0][j]) by central differences matches autograd
    model = make(2, use_loop_embedding=True)
    tokens = torch.randint(0, 4, (2, 12))

    def total(model):
        return model(tokens).sum()

    loss = total(model)
    loss.backward()
    autograd = model.loop_emb.weight.grad[0, 3].item()
    eps = 1e-3
    with torch.no_grad():
        model.loop_emb.weight[0, 3] += eps
        up = total(model).item()
        model.loop_emb.weight[0, 3] -= 2 * eps
        down = total(model).item()
        model.loop_emb.weight[0, 3] += eps
    fd = (up - down) / (2 * eps)
    assert autograd == pytest.approx(fd, rel=1e-2, abs=1e-3)


def test_loop_index_bounds():
    model = make(2, use_loop_embedding=True)
    hidden = torch.zeros(1, 12, 32)
    with pytest.raises(ValueError):
        model.add_loop_embedding(hidden, 2)


def test_rejects_zero_loops():
    with pytest.raises(ValueError):
        make(0)
