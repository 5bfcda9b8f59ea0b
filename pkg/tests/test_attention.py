import math

import numpy as np
import pytest
import torch

from emoflow.vamodel import (
    AttentionConfigError,
    RelativeSelfAttention,
    gather_offset_logits,
    relative_attention,
)


def brute_force_attention(q, k, v, s_rel):
    """Row-by-row softmax with explicit python loops."""
    q, k, v, s_rel = (np.asarray(x, dtype=np.float64) for x in (q, k, v, s_rel))
    L, d = q.shape
    out = np.zeros((L, v.shape[1]))
    weights = np.zeros((L, L))
    for i in range(L):
        logits = [(sum(q[i, a] * k[j, a] for a in range(d)) + s_rel[i, j]) / math.sqrt(d)
                  for j in range(L)]
        m = max(logits)
        exps = [math.exp(x - m) for x in logits]
        z = sum(exps)
        for j in range(L):
            weights[i, j] = exps[j] / z
            for b in range(v.shape[1]):
                out[i, b] += weights[i, j] * v[j, b]
    return out, weights


class TestRelativeAttentionCore:
    def test_single_position_returns_value_row(self):
        q = torch.randn(1, 8, dtype=torch.float64)
        k = torch.randn(1, 8, dtype=torch.float64)
        v = torch.randn(1, 16, dtype=torch.float64)
        out, weights = relative_attention(q, k, v, torch.zeros(1, 1, dtype=torch.float64))
        assert torch.allclose(out, v)
        assert weights.item() == pytest.approx(1.0)

    def test_zero_offsets_match_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            L, d, dv = int(rng.integers(1, 7)), int(rng.integers(1, 6)), int(rng.integers(1, 6))
            q, k = rng.normal(size=(L, d)), rng.normal(size=(L, d))
            v = rng.normal(size=(L, dv))
            out, w = relative_attention(*(torch.tensor(x) for x in (q, k, v)),
                                        torch.zeros(L, L, dtype=torch.float64))
            ref_out, ref_w = brute_force_attention(q, k, v, np.zeros((L, L)))
            assert np.allclose(out.numpy(), ref_out, atol=1e-10)
            assert np.allclose(w.numpy(), ref_w, atol=1e-10)

    def test_nonzero_offsets_match_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            L, d = int(rng.integers(2, 7)), 4
            q, k = rng.normal(size=(L, d)), rng.normal(size=(L, d))
            v = rng.normal(size=(L, 3))
            s = rng.normal(size=(L, L)) * 2
            out, _ = relative_attention(*(torch.tensor(x) for x in (q, k, v, s)))
            ref_out, _ = brute_force_attention(q, k, v, s)
            assert np.allclose(out.numpy(), ref_out, atol=1e-10)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            L = int(rng.integers(1, 9))
            q = torch.tensor(rng.normal(size=(L, 5)) * 3)
            k = torch.tensor(rng.normal(size=(L, 5)) * 3)
            v = torch.tensor(rng.normal(size=(L, 2)))
            s = torch.tensor(rng.normal(size=(L, L)))
            _, w = relative_attention(q, k, v, s)
            assert torch.all(w >= 0)
            assert np.allclose(w.sum(-1).numpy(), 1.0, atol=1e-9)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(3)
        for trial in range(4):
            L, d = int(rng.integers(2, 7)), 3
            tensors = {
                "q": torch.tensor(rng.normal(size=(L, d)), requires_grad=True),
                "k": torch.tensor(rng.normal(size=(L, d)), requires_grad=True),
                "v": torch.tensor(rng.normal(size=(L, 2)), requires_grad=True),
                "s": torch.tensor(rng.normal(size=(L, L)), requires_grad=True),
            }
            weight = torch.tensor(rng.normal(size=(L, 2)))

            def scalar_loss(q, k, v, s):
                out, _ = relative_attention(q, k, v, s)
                return (out * weight).sum()

            loss = scalar_loss(*tensors.values())
            loss.backward()
            eps = 1e-6
            for name, t in tensors.items():
                flat = t.detach().clone().reshape(-1)
                idx = int(rng.integers(0, flat.numel()))
                for sign, store in ((1, "hi"), (-1, "lo")):
                    bumped = flat.clone()
                    bumped[idx] += sign * eps
                    args = {n: (bumped.reshape(t.shape) if n == name else x.detach())
                            for n, x in tensors.items()}
                    if store == "hi":
                        hi = scalar_loss(**args).item()
                    else:
                        lo = scalar_loss(**args).item()
                fd = (hi - lo) / (2 * eps)
                analytic = t.grad.reshape(-1)[idx].item()
                denom = max(abs(fd), abs(analytic), 1e-8)
                assert abs(fd - analytic) / denom < 1e-4, (name, trial)

    def test_permutation_equivariance_with_zero_offsets(self):
        rng = np.random.default_rng(4)
        L = 6
        q = torch.tensor(rng.normal(size=(L, 4)))
        k = torch.tensor(rng.normal(size=(L, 4)))
        v = torch.tensor(rng.normal(size=(L, 3)))
        zero = torch.zeros(L, L, dtype=torch.float64)
        out, _ = relative_attention(q, k, v, zero)
        perm = torch.tensor(rng.permutation(L))
        out_kv_perm, _ = relative_attention(q, k[perm], v[perm], zero)
        assert torch.allclose(out, out_kv_perm, atol=1e-10)  # key/value order irrelevant
        out_q_perm, _ = relative_attention(q[perm], k, v, zero)
        assert torch.allclose(out[perm], out_q_perm, atol=1e-10)

    def test_mismatched_qk_dims_rejected(self):
        with pytest.raises(ValueError):
            relative_attention(torch.zeros(2, 3), torch.zeros(2, 4),
                               torch.zeros(2, 2), torch.zeros(2, 2))


class TestOffsetTable:
    def test_gather_layout(self):
        table = torch.arange(7.0)  # offsets -3..3 -> values 0..6
        s = gather_offset_logits(table, 3)
        expected = torch.tensor([[3.0, 4.0, 5.0], [2.0, 3.0, 4.0], [1.0, 2.0, 3.0]])
        assert torch.equal(s, expected)

    def test_coverage_error(self):
        with pytest.raises(AttentionConfigError, match="up to 4"):
            gather_offset_logits(torch.zeros(7), 5)


class TestRelativeSelfAttentionModule:
    def test_output_shapes(self):
        module = RelativeSelfAttention(input_dim=32, query_dim=48, attention_dim=16,
                                       max_len=10)
        x = torch.randn(2, 7, 32)
        context, weights = module(x)
        assert context.shape == (2, 7, 32)
        assert weights.shape == (2, 7, 7)
        assert torch.allclose(weights.sum(-1), torch.ones(2, 7), atol=1e-6)

    def test_sequence_longer_than_table_rejected(self):
        module = RelativeSelfAttention(input_dim=8, query_dim=8, attention_dim=4,
                                       max_len=4)
        with pytest.raises(AttentionConfigError):
            module(torch.randn(1, 5, 8))

    def test_deterministic_forward(self):
        torch.manual_seed(7)
        module = RelativeSelfAttention(input_dim=16, query_dim=16, attention_dim=8,
                                       max_len=8)
        x = torch.randn(1, 6, 16)
        a, _ = module(x)
        b, _ = module(x)
        assert torch.equal(a, b)
