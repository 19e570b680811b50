# -*- coding: utf-8 -*-
import io
import math
import unittest

import numpy as np
import torch
from luckydonaldUtils.logger import logging

from tiograph.exceptions import LengthMismatch, ShapeMismatch, EmptyEdgeSet, EmptyGraph
from tiograph.graph import build_graph, NodeId
from tiograph.model.attention import (
    GatLayer, Activation, Scoring, MultiHeadBaseline, attention, node_update, refine_frames, pairwise_distance,
    normalize_distances, kernel_weights, multihead_baseline_attention, write_attention_jsonl, read_attention_jsonl,
)
from tests.fixtures import tiny_bundle

__author__ = 'luckydonald'
logger = logging.getLogger(__name__)


def brute_force(g, projection, sigma, relu):
    """ Loop-by-loop attention and update, written without any of the vectorized helpers. """
    h = np.array(g.features)
    x = h if projection is None else h @ projection.T
    neighborhoods = {row: [] for row in range(g.num_nodes)}
    for triple in g.triples:
        head, tail = g.node_index[triple.head], g.node_index[triple.tail]
        neighborhoods[head].append(tail)
        neighborhoods[tail].append(head)
    # end for
    distances = {}
    for u, neighbors in neighborhoods.items():
        for k, v in enumerate(neighbors):
            total = 0.0
            for a, b in zip(x[u], x[v]):
                total += (a - b) * (a - b)
            # end for
            distances[(u, k)] = total
        # end for
    # end for
    alphas = {}
    if distances:
        low, high = min(distances.values()), max(distances.values())
        weights = {}
        for key, value in distances.items():
            normalized = 0.0 if high == low else (value - low) / (high - low)
            weights[key] = math.exp(-normalized * normalized / (sigma * sigma))
        # end for
        for u, neighbors in neighborhoods.items():
            denominator = sum(math.exp(weights[(u, k)]) for k in range(len(neighbors)))
            for k in range(len(neighbors)):
                alphas[(u, k)] = math.exp(weights[(u, k)]) / denominator
            # end for
        # end for
    # end if
    updated = h.copy()
    for u, neighbors in neighborhoods.items():
        if not neighbors:
            continue
        # end if
        total = np.zeros(h.shape[1])
        for k, v in enumerate(neighbors):
            total += alphas[(u, k)] * h[v]
        # end for
        updated[u] = np.maximum(total, 0.0) if relu else total
    # end for
    return neighborhoods, alphas, updated
# end def


class AttentionTestCase(unittest.TestCase):
    def test_against_brute_force(self):
        for seed in range(100):
            rng = np.random.default_rng(seed)
            bundle = tiny_bundle(
                seed=seed, dim=3, num_frames=int(rng.integers(1, 5)),
                objects_per_frame=int(rng.integers(0, 4)), num_keywords=int(rng.integers(1, 3)),
            )
            g = build_graph(bundle, 0)
            self.assertLessEqual(g.num_nodes, 20)
            projection = rng.standard_normal((3, 3)) if seed % 2 else None
            relu = seed % 3 != 0
            layer = GatLayer(
                3, sigma_kernel=0.25, projection=False if projection is None else projection,
                activation=Activation.RELU if relu else Activation.IDENTITY,
            )
            report = attention(g, layer)
            updated = node_update(g, report, layer).detach().numpy()
            neighborhoods, alphas, expected = brute_force(g, projection, 0.25, relu)
            for u, neighbors in neighborhoods.items():
                entries = report.for_node(u)
                self.assertEqual([g.node_index[entry.neighbor] for entry in entries], neighbors)
                for k, entry in enumerate(entries):
                    self.assertAlmostEqual(entry.alpha, alphas[(u, k)], delta=1e-10)
                # end for
            # end for
            np.testing.assert_allclose(updated, expected, rtol=0, atol=1e-10)
        # end for
    # end def

    def test_rows_sum_to_one(self):
        for seed in range(20):
            g = build_graph(tiny_bundle(seed=seed, num_frames=4, objects_per_frame=2, num_keywords=3), 0)
            report = attention(g, GatLayer(4, projection=True))
            sums = report.row_sums()
            np.testing.assert_allclose(sums, np.ones(g.num_nodes), atol=1e-9)
            self.assertTrue(np.all(report.weights > 0) and np.all(report.weights <= 1))
            self.assertTrue(np.all(report.alphas > 0) and np.all(report.alphas <= 1))
        # end for
    # end def

    def test_isolated_nodes_keep_features(self):
        g = build_graph(tiny_bundle(num_frames=3, objects_per_frame=0), 0)
        layer = GatLayer(4)
        report = attention(g, layer)
        self.assertEqual(report.num_edges, 0)
        np.testing.assert_array_equal(report.row_sums(), np.zeros(3))
        np.testing.assert_array_equal(node_update(g, report, layer).numpy(), g.features)
        np.testing.assert_array_equal(refine_frames(g, layer).numpy(), g.features)
    # end def

    def test_refine_frames_rows(self):
        g = build_graph(tiny_bundle(num_frames=3, objects_per_frame=2, num_keywords=2), 0)
        layer = GatLayer(4, projection=True)
        refined = refine_frames(g, layer)
        self.assertEqual(tuple(refined.shape), (3, 4))
        full = node_update(g, attention(g, layer), layer)
        torch.testing.assert_close(refined.detach(), full[:3].detach())
    # end def

    def test_refine_frames_empty(self):
        class NoFrames(object):
            num_frames = 0
            video_index = 0
        # end class

        with self.assertRaises(EmptyGraph):
            refine_frames(NoFrames(), GatLayer(4))
        # end with
    # end def

    def test_projection_identity_changes_nothing(self):
        g = build_graph(tiny_bundle(num_frames=3, objects_per_frame=2, num_keywords=2), 0)
        plain = attention(g, GatLayer(4, projection=False))
        identity = attention(g, GatLayer(4, projection=True))
        np.testing.assert_allclose(plain.alphas, identity.alphas, atol=1e-15)
    # end def

    def test_pairwise_distance(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.standard_normal(7), rng.standard_normal(7)
            expected = sum((x - y) ** 2 for x, y in zip(a, b))
            self.assertAlmostEqual(pairwise_distance(a, b), expected, delta=1e-12)
        # end for
        self.assertEqual(pairwise_distance([1.0, 2.0], [1.0, 2.0]), 0.0)
        with self.assertRaises(LengthMismatch):
            pairwise_distance([1.0, 2.0], [1.0, 2.0, 3.0])
        # end with
    # end def

    def test_normalize_distances(self):
        np.testing.assert_allclose(normalize_distances([2.0, 4.0, 3.0]), [0.0, 1.0, 0.5])
        np.testing.assert_array_equal(normalize_distances([5.0, 5.0]), [0.0, 0.0])
        self.assertEqual(normalize_distances({"a": 1.0, "b": 3.0}), {"a": 0.0, "b": 1.0})
        self.assertIsInstance(normalize_distances(torch.tensor([1.0, 2.0])), torch.Tensor)
        with self.assertRaises(EmptyEdgeSet):
            normalize_distances([])
        # end with
    # end def

    def test_kernel_weights(self):
        weights = kernel_weights([0.0, 0.5, 1.0], 0.25)
        np.testing.assert_allclose(weights, [1.0, math.exp(-4.0), math.exp(-16.0)], rtol=1e-12)
        with self.assertRaises(ValueError):
            kernel_weights([0.0], 0.0)
        # end with
    # end def

    def test_layer_arguments(self):
        with self.assertRaises(ValueError):
            GatLayer(4, sigma_kernel=0)
        # end with
        with self.assertRaises(ShapeMismatch):
            GatLayer(4, projection=np.eye(3))
        # end with
        layer = GatLayer(2, projection=[[2.0, 0.0], [0.0, 1.0]])
        np.testing.assert_array_equal(layer.project(torch.tensor([[1.0, 1.0]], dtype=torch.float64)).detach().numpy(), [[2.0, 1.0]])
    # end def

    def test_pair_alpha(self):
        g = build_graph(tiny_bundle(num_frames=2, objects_per_frame=2, num_keywords=3), 0)
        report = attention(g, GatLayer(4))
        frame, obj = g.row(NodeId.frame(0, 1)), g.row(NodeId.object(0, 1, 1))
        expected = sum(entry.alpha for entry in report.for_node(frame) if entry.neighbor == NodeId.object(0, 1, 1))
        self.assertAlmostEqual(float(report.pair_alpha(frame, obj)), expected, delta=1e-12)
        self.assertEqual(len(report.pair_edges(frame, obj)), 3)
        self.assertIsNone(report.pair_alpha(frame, g.row(NodeId.object(0, 2, 0))))
    # end def

    def test_multihead_baseline(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 4))
        w_query = rng.standard_normal((2, 5, 4))
        w_key = rng.standard_normal((2, 5, 4))
        scores = multihead_baseline_attention(x, MultiHeadBaseline(w_query, w_key)).numpy()
        self.assertEqual(scores.shape, (3, 3, 2))
        for i in range(3):
            for j in range(3):
                for h in range(2):
                    q = [sum(w_query[h, k, c] * x[i, c] for c in range(4)) for k in range(5)]
                    key = [sum(w_key[h, k, c] * x[j, c] for c in range(4)) for k in range(5)]
                    expected = sum(a * b for a, b in zip(q, key))
                    self.assertAlmostEqual(scores[i, j, h], expected, delta=1e-10)
                # end for
            # end for
        # end for
        with self.assertRaises(ShapeMismatch):
            multihead_baseline_attention(rng.standard_normal((3, 5)), MultiHeadBaseline(w_query, w_key))
        # end with
        with self.assertRaises(ShapeMismatch):
            MultiHeadBaseline(w_query, w_key[:1])
        # end with
    # end def

    def test_jsonl(self):
        g = build_graph(tiny_bundle(num_frames=2, objects_per_frame=1, num_keywords=2), 0)
        report = attention(g, GatLayer(4))
        f = io.StringIO()
        write_attention_jsonl(report, f)
        f.seek(0)
        lines = read_attention_jsonl(f)
        self.assertEqual(len(lines), report.num_edges)
        self.assertEqual(lines[0]["head"], "frame(v=0, t=1)")
        self.assertEqual(lines[0]["alpha"], float(report.alphas[0]))
    # end def
# end class


class ScoringTestCase(unittest.TestCase):
    def test_uniform(self):
        for seed in range(20):
            bundle = tiny_bundle(seed=seed, dim=3, num_frames=3, objects_per_frame=seed % 3 + 1, num_keywords=2)
            g = build_graph(bundle, 0)
            layer = GatLayer(3, projection=True, scoring='uniform', activation=Activation.IDENTITY)
            report = attention(g, layer)
            updated = node_update(g, report, layer).detach().numpy()
            neighborhoods, _, _ = brute_force(g, None, 0.25, False)
            h = np.array(g.features)
            for u, neighbors in neighborhoods.items():
                for entry in report.for_node(u):
                    self.assertEqual(entry.alpha, 1.0 / len(neighbors))
                    self.assertEqual(entry.weight, 1.0)
                # end for
                if neighbors:
                    np.testing.assert_allclose(updated[u], h[neighbors].mean(axis=0), rtol=0, atol=1e-12)
                # end if
            # end for
            np.testing.assert_allclose(report.row_sums()[report.row_sums() > 0], 1.0, atol=1e-12)
        # end for
    # end def

    def test_multihead_against_loops(self):
        for seed in range(30):
            rng = np.random.default_rng(seed)
            bundle = tiny_bundle(seed=seed, dim=4, num_frames=int(rng.integers(1, 4)), objects_per_frame=2, num_keywords=2)
            g = build_graph(bundle, 0)
            layer = GatLayer(4, scoring='multihead', num_heads=2)
            layer.reset_heads(torch.Generator().manual_seed(seed))
            report = attention(g, layer)
            neighborhoods, _, _ = brute_force(g, None, 0.25, True)
            h = np.array(g.features)
            w_query, w_key = layer.w_query.detach().numpy(), layer.w_key.detach().numpy()
            for u, neighbors in neighborhoods.items():
                entries = report.for_node(u)
                self.assertEqual([g.node_index[entry.neighbor] for entry in entries], neighbors)
                expected = np.zeros(len(neighbors))
                for head in range(2):
                    logits = [float((w_query[head] @ h[u]) @ (w_key[head] @ h[v])) / math.sqrt(2) for v in neighbors]
                    exponentials = [math.exp(value) for value in logits]
                    expected += np.array(exponentials) / sum(exponentials) / 2
                # end for
                for k, entry in enumerate(entries):
                    self.assertAlmostEqual(entry.alpha, expected[k], delta=1e-10)
                # end for
            # end for
            sums = report.row_sums()
            np.testing.assert_allclose(sums[sums > 0], 1.0, atol=1e-9)
        # end for
    # end def

    def test_multihead_gradients(self):
        g = build_graph(tiny_bundle(num_frames=3, objects_per_frame=2, num_keywords=2), 0)
        layer = GatLayer(4, scoring='multihead', num_heads=2)
        node_update(g, attention(g, layer), layer).pow(2).sum().backward()
        self.assertTrue(torch.isfinite(layer.w_query.grad).all())
        self.assertGreater(float(layer.w_query.grad.abs().sum()), 0.0)
        self.assertGreater(float(layer.w_key.grad.abs().sum()), 0.0)
    # end def

    def test_layer_scoring_arguments(self):
        self.assertEqual(GatLayer(4).scoring, Scoring.KERNEL)
        self.assertIsNone(GatLayer(4, scoring='uniform').w_query)
        self.assertEqual(GatLayer(4, scoring='uniform').num_heads, 0)
        self.assertEqual(tuple(GatLayer(6, scoring='multihead', num_heads=4).w_key.shape), (4, 1, 6))
        with self.assertRaises(ValueError):
            GatLayer(4, scoring='dot')
        # end with
        with self.assertRaises(ValueError):
            GatLayer(4, scoring='multihead', num_heads=0)
        # end with
    # end def
# end class


if __name__ == "__main__":
    unittest.main()
# end if
