# -*- coding: utf-8 -*-
import math
import unittest

import numpy as np
import torch
from luckydonaldUtils.logger import logging

from tiograph.exceptions import ShapeMismatch
from tiograph.model.temporal import (
    TemporalEncoder, LayerNormParams, build_temporal_adjacency, fuse, layer_norm, ffn_residual, encode,
)

__author__ = 'luckydonald'
logger = logging.getLogger(__name__)


def oracle_layer_norm(x, gain, bias, eps=1e-5):
    out = np.empty_like(x)
    for i, row in enumerate(x):
        mean = sum(row) / len(row)
        variance = sum((value - mean) ** 2 for value in row) / len(row)
        out[i] = (row - mean) / math.sqrt(variance + eps) * gain + bias
    # end for
    return out
# end def


def random_encoder(dim, seed, d_hidden=None):
    encoder = TemporalEncoder(dim, d_hidden=d_hidden)
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for parameter in encoder.parameters():
            parameter.copy_(torch.randn(parameter.shape, generator=generator, dtype=torch.float64))
        # end for
    # end with
    return encoder
# end def


class TemporalTestCase(unittest.TestCase):
    def test_adjacency(self):
        for n in (1, 2, 5, 8, 32):
            m = build_temporal_adjacency(n, 3.0)
            a = m.a_t.numpy()
            np.testing.assert_array_equal(a, a.T)
            np.testing.assert_array_equal(np.diag(a), np.ones(n))
            degrees = a.sum(axis=1)
            inverse_sqrt = np.diag(1.0 / np.sqrt(degrees))
            np.testing.assert_allclose(m.a_tilde.numpy(), inverse_sqrt @ a @ inverse_sqrt, rtol=0, atol=1e-12)
            np.testing.assert_allclose(np.diag(m.degree.numpy()), degrees, rtol=0, atol=1e-12)
            self.assertEqual(m.num_frames, n)
        # end for
        m = build_temporal_adjacency(3, 2.0)
        self.assertAlmostEqual(float(m.a_t[0, 2]), math.exp(-1.0), delta=1e-15)
    # end def

    def test_adjacency_arguments(self):
        with self.assertRaises(ValueError):
            build_temporal_adjacency(0)
        # end with
        with self.assertRaises(ValueError):
            build_temporal_adjacency(3, 0.0)
        # end with
    # end def

    def test_fuse(self):
        rng = np.random.default_rng(1)
        h = rng.standard_normal((5, 3))
        m = build_temporal_adjacency(5, 3.0)
        a_tilde = m.a_tilde.numpy()
        expected = np.zeros((5, 3))
        for i in range(5):
            exps = [math.exp(a_tilde[i, j]) for j in range(5)]
            for j in range(5):
                expected[i] += exps[j] / sum(exps) * h[j]
            # end for
        # end for
        np.testing.assert_allclose(fuse(h, m).numpy(), expected, rtol=0, atol=1e-10)
        np.testing.assert_allclose(torch.softmax(m.a_tilde, dim=1).sum(dim=1).numpy(), np.ones(5), atol=1e-9)
        with self.assertRaises(ShapeMismatch):
            fuse(h[:4], m)
        # end with
    # end def

    def test_single_frame(self):
        h = np.array([[1.0, -2.0, 0.5]])
        np.testing.assert_allclose(fuse(h, build_temporal_adjacency(1)).numpy(), h)
    # end def

    def test_layer_norm(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 6)) * 3 + 1
        params = LayerNormParams(gain=torch.ones(6, dtype=torch.float64), bias=torch.zeros(6, dtype=torch.float64))
        y = layer_norm(x, params).numpy()
        np.testing.assert_allclose(y.mean(axis=1), np.zeros(4), atol=1e-9)
        np.testing.assert_allclose(y.var(axis=1), np.ones(4), atol=1e-5)
        gain, bias = rng.standard_normal(6), rng.standard_normal(6)
        y = layer_norm(x, LayerNormParams(torch.from_numpy(gain), torch.from_numpy(bias))).numpy()
        np.testing.assert_allclose(y, oracle_layer_norm(x, gain, bias), rtol=0, atol=1e-10)
    # end def

    def test_ffn_residual(self):
        rng = np.random.default_rng(3)
        encoder = random_encoder(3, seed=3, d_hidden=5)
        h2 = rng.standard_normal((4, 3))
        w1 = encoder.ffn1.weight.detach().numpy().T
        b1 = encoder.ffn1.bias.detach().numpy()
        w2 = encoder.ffn2.weight.detach().numpy().T
        b2 = encoder.ffn2.bias.detach().numpy()
        hidden = np.maximum(h2 @ w1 + b1, 0.0)
        expected = oracle_layer_norm(
            hidden @ w2 + b2 + h2, encoder.ln2.weight.detach().numpy(), encoder.ln2.bias.detach().numpy(),
        )
        np.testing.assert_allclose(ffn_residual(h2, encoder).detach().numpy(), expected, rtol=0, atol=1e-10)
        with self.assertRaises(ShapeMismatch):
            ffn_residual(rng.standard_normal((4, 2)), encoder)
        # end with
    # end def

    def test_encode(self):
        for n in (1, 2, 5, 8, 32):
            rng = np.random.default_rng(n)
            encoder = random_encoder(4, seed=n)
            h = rng.standard_normal((n, 4))
            out = encode(h, encoder)
            h1 = fuse(h, build_temporal_adjacency(n, encoder.sigma_time)).numpy()
            h2 = oracle_layer_norm(h1, encoder.ln1.weight.detach().numpy(), encoder.ln1.bias.detach().numpy())
            h3 = ffn_residual(h2, encoder).detach().numpy()
            np.testing.assert_allclose(out.frame_features.detach().numpy(), h3, rtol=0, atol=1e-10)
            np.testing.assert_allclose(out.video_embedding.detach().numpy(), h3.mean(axis=0), rtol=0, atol=1e-12)
            torch.testing.assert_close(encoder(h).video_embedding.detach(), out.video_embedding.detach())
        # end for
    # end def

    def test_reset_parameters(self):
        encoder = TemporalEncoder(6)
        self.assertEqual(encoder.d_hidden, 12)
        encoder.reset_parameters(torch.Generator().manual_seed(0))
        np.testing.assert_array_equal(encoder.ln1.weight.detach().numpy(), np.ones(6))
        np.testing.assert_array_equal(encoder.ln2.bias.detach().numpy(), np.zeros(6))
        np.testing.assert_array_equal(encoder.ffn1.bias.detach().numpy(), np.zeros(12))
        self.assertLessEqual(float(encoder.ffn1.weight.abs().max()), 0.1 / math.sqrt(6))
        self.assertLessEqual(float(encoder.ffn2.weight.abs().max()), 0.1 / math.sqrt(12))
        other = TemporalEncoder(6)
        other.reset_parameters(torch.Generator().manual_seed(0))
        torch.testing.assert_close(other.ffn2.weight.detach(), encoder.ffn2.weight.detach(), rtol=0, atol=0)
    # end def

    def test_encoder_arguments(self):
        with self.assertRaises(ValueError):
            TemporalEncoder(0)
        # end with
        with self.assertRaises(ValueError):
            TemporalEncoder(4, sigma_time=-1.0)
        # end with
        with self.assertRaises(ShapeMismatch):
            encode(np.zeros((0, 4)), TemporalEncoder(4))
        # end with
    # end def
# end class


if __name__ == "__main__":
    unittest.main()
# end if
