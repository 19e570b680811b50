# -*- coding: utf-8 -*-
"""
Distance kernel graph attention.

Per edge the squared Euclidean distance of the endpoints is interval normalized over all edges of the graph,
turned into a weight by a Gaussian kernel, and softmaxed over the neighborhood of each node.
There is no query/key similarity term, the attention score *is* the kernel weight.

For comparison the layer can also score every neighbor the same (plain mean aggregation),
or by scaled multi-head dot products of learned query and key projections.
"""
import json
from enum import Enum
from functools import wraps
from typing import NamedTuple, Optional, Dict, Tuple, List

import numpy as np
import torch
from torch import nn
from luckydonaldUtils.logger import logging
from luckydonaldUtils.exceptions import assert_type_or_raise

from ..exceptions import LengthMismatch, ShapeMismatch, EmptyEdgeSet, EmptyGraph
from ..graph.knowledge_graph import KnowledgeGraph
from ..utilities import DTYPE, as_tensor

__author__ = 'luckydonald'
__all__ = [
    'Activation', 'Scoring', 'GatLayer', 'AttentionEntry', 'AttentionReport', 'MultiHeadBaseline',
    'pairwise_distance', 'normalize_distances', 'kernel_weights', 'attention', 'node_update', 'refine_frames',
    'TensorOps', 'CountingOps', 'multihead_baseline_attention', 'dense_kernel_attention',
    'write_attention_jsonl', 'read_attention_jsonl',
]
logger = logging.getLogger(__name__)


DEFAULT_SIGMA_KERNEL = 0.25
DEFAULT_ATTENTION_HEADS = 2


class Activation(Enum):
    RELU = 'relu'
    IDENTITY = 'identity'

    def __call__(self, x):
        if self == Activation.RELU:
            return torch.relu(x)
        # end if
        return x
    # end def
# end class


class Scoring(Enum):
    KERNEL = 'kernel'  # softmax over the Gaussian kernel of the normalized distances
    UNIFORM = 'uniform'  # every incident triple gets 1/degree
    MULTIHEAD = 'multihead'  # softmax over scaled query·key products, averaged over the heads
# end class


class GatLayer(nn.Module):
    """
    The parameters of the single attention pass.

    The optional projection `P` (d×d) is applied before measuring distances only,
    aggregation still mixes the unprojected features.
    With multi-head scoring the layer also holds the query and key projections, H×d_h×d each.
    """
    def __init__(
        self, dim, sigma_kernel=DEFAULT_SIGMA_KERNEL, projection=False, activation=Activation.RELU,
        scoring=Scoring.KERNEL, num_heads=DEFAULT_ATTENTION_HEADS,
    ):
        """
        :param dim: Feature dimensionality d.
        :type  dim: int

        :param sigma_kernel: Kernel bandwidth σ, must be > 0.
        :type  sigma_kernel: float

        :param projection: `False` for no projection, `True` for a learnable one initialized to the identity,
                           or a d×d matrix to start from.
        :type  projection: bool | numpy.ndarray | torch.Tensor

        :param activation: Applied after aggregation.
        :type  activation: Activation | str

        :param scoring: How neighbors are scored, see :class:`Scoring`.
        :type  scoring: Scoring | str

        :param num_heads: Heads of the multi-head scoring, each of size `max(1, d // H)`. Ignored otherwise.
        :type  num_heads: int
        """
        super().__init__()
        assert_type_or_raise(dim, int, parameter_name="dim")
        assert_type_or_raise(num_heads, int, parameter_name="num_heads")
        if not sigma_kernel > 0:
            raise ValueError("sigma_kernel must be > 0, got {!r}".format(sigma_kernel))
        # end if
        self.dim = dim
        self.sigma_kernel = float(sigma_kernel)
        self.activation = Activation(activation)
        self.scoring = Scoring(scoring)
        if projection is False or projection is None:
            self.projection = None
        elif projection is True:
            self.projection = nn.Parameter(torch.eye(dim, dtype=DTYPE))
        else:
            matrix = as_tensor(projection).clone()
            if tuple(matrix.shape) != (dim, dim):
                raise ShapeMismatch("projection must be {d}×{d}, got {shape}".format(d=dim, shape=tuple(matrix.shape)))
            # end if
            if not bool(torch.isfinite(matrix).all()):
                raise ValueError("projection must be finite")
            # end if
            self.projection = nn.Parameter(matrix)
        # end if
        self.w_query = None
        self.w_key = None
        if self.scoring == Scoring.MULTIHEAD:
            if num_heads < 1:
                raise ValueError("num_heads must be >= 1, got {!r}".format(num_heads))
            # end if
            shape = (num_heads, max(1, dim // num_heads), dim)
            self.w_query = nn.Parameter(torch.zeros(shape, dtype=DTYPE))
            self.w_key = nn.Parameter(torch.zeros(shape, dtype=DTYPE))
            self.reset_heads(torch.Generator().manual_seed(0))
        # end if
    # end def

    @property
    def num_heads(self):
        return 0 if self.w_query is None else self.w_query.shape[0]
    # end def

    @torch.no_grad()
    def reset_heads(self, generator):
        """ Draws the query and key projections from `N(0, 1/d)`. Nothing to do without multi-head scoring. """
        if self.w_query is None:
            return
        # end if
        scale = 1.0 / np.sqrt(self.dim)
        fresh = MultiHeadBaseline.random(self.num_heads, self.w_query.shape[1], self.dim, generator=generator)
        self.w_query.copy_(fresh.w_query * scale)
        self.w_key.copy_(fresh.w_key * scale)
    # end def

    def heads(self):
        """ The query and key projections as :class:`MultiHeadBaseline`, gradients still flow into them. """
        return MultiHeadBaseline(self.w_query, self.w_key)
    # end def

    def project(self, features):
        """ P·h for every row, or the features themselves without projection. """
        if self.projection is None:
            return features
        # end if
        return features @ self.projection.t()
    # end def

    def extra_repr(self):
        return "dim={dim}, sigma_kernel={sigma}, projection={p}, activation={a}, scoring={s}, heads={h}".format(
            dim=self.dim, sigma=self.sigma_kernel, p=self.projection is not None, a=self.activation.value,
            s=self.scoring.value, h=self.num_heads,
        )
    # end def
# end class


def per_edge_map(func):
    """
    Lets a function working on a 1d tensor of per-edge values also accept
    a dict `{edge: value}` (answered with a dict) or anything array-like (answered with a numpy array).
    """
    @wraps(func)
    def per_edge_map_inner(values, *args, **kwargs):
        if isinstance(values, dict):
            keys = list(values.keys())
            result = func(torch.tensor([float(values[key]) for key in keys], dtype=DTYPE), *args, **kwargs)
            return dict(zip(keys, result.tolist()))
        # end if
        if isinstance(values, torch.Tensor):
            return func(as_tensor(values), *args, **kwargs)
        # end if
        return func(as_tensor(np.asarray(values, dtype=np.float64)), *args, **kwargs).numpy()
    # end def
    return per_edge_map_inner
# end def


def pairwise_distance(h_u, h_v):
    """
    Squared Euclidean distance `‖h_u − h_v‖²`.

    :raises LengthMismatch: the vectors differ in length.
    :rtype: float
    """
    u = np.asarray(h_u, dtype=np.float64).reshape(-1)
    v = np.asarray(h_v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise LengthMismatch("vectors of length {a} and {b}".format(a=u.shape[0], b=v.shape[0]))
    # end if
    difference = u - v
    return float(np.dot(difference, difference))
# end def


@per_edge_map
def normalize_distances(distances):
    """
    Interval normalization over the whole edge set: `d' = (d − d_min) / (d_max − d_min)`.
    A constant edge set maps to all zeros.

    :raises EmptyEdgeSet: no distances given.
    """
    if distances.numel() == 0:
        raise EmptyEdgeSet("can't normalize an empty edge set")
    # end if
    d_min = distances.min()
    d_max = distances.max()
    span = d_max - d_min
    if float(span) == 0.0:
        return torch.zeros_like(distances)
    # end if
    return (distances - d_min) / span
# end def


@per_edge_map
def kernel_weights(normalized, sigma):
    """
    Gaussian kernel `w = exp(−d'² / σ²)`, so `w ∈ (0, 1]` for `d' ∈ [0, 1]`.
    """
    if not sigma > 0:
        raise ValueError("sigma must be > 0, got {!r}".format(sigma))
    # end if
    return torch.exp(-(normalized ** 2) / (sigma ** 2))
# end def


class AttentionEntry(NamedTuple):
    neighbor: object  # NodeId
    relation_index: int
    distance: float
    normalized: float
    weight: float
    alpha: float
# end class


class AttentionReport(object):
    """
    Everything computed by one attention pass, one entry per (center node, incident triple).

    The numpy arrays are detached copies, `alpha_tensor` keeps the autograd graph for the regularizer.
    """
    def __init__(self, nodes, centers, neighbors, relations, distances, normalized, weights, alpha_tensor):
        self.nodes = nodes
        self.centers = centers
        self.neighbors = neighbors
        self.relations = relations
        self.distances = distances.detach().numpy().copy()
        self.normalized = normalized.detach().numpy().copy()
        self.weights = weights.detach().numpy().copy()
        self.alpha_tensor = alpha_tensor
        self.alphas = alpha_tensor.detach().numpy().copy()
        self._pair_index: Optional[Dict[Tuple[int, int], List[int]]] = None
    # end def

    @classmethod
    def empty(cls, nodes):
        nothing = torch.zeros(0, dtype=DTYPE)
        no_rows = np.zeros(0, dtype=np.int64)
        return cls(nodes, no_rows, no_rows, no_rows, nothing, nothing, nothing, nothing)
    # end def

    @property
    def num_edges(self):
        return int(self.centers.shape[0])
    # end def

    def for_node(self, node):
        """
        :param node: The center node (a `NodeId`) or its row.
        :rtype: list of AttentionEntry
        """
        row = node if isinstance(node, (int, np.integer)) else self.nodes.index(node)
        return [
            AttentionEntry(
                neighbor=self.nodes[self.neighbors[k]], relation_index=int(self.relations[k]),
                distance=float(self.distances[k]), normalized=float(self.normalized[k]),
                weight=float(self.weights[k]), alpha=float(self.alphas[k]),
            )
            for k in np.flatnonzero(self.centers == row)
        ]
    # end def

    def row_sums(self):
        """ Σ α per node row, zero for isolated nodes. """
        return np.bincount(self.centers, weights=self.alphas, minlength=len(self.nodes))
    # end def

    def pair_edges(self, center_row, neighbor_row):
        """
        :return: The edge positions from `center_row` to `neighbor_row`, one per relation. Empty if never scored.
        """
        if self._pair_index is None:
            self._pair_index = {}
            for k, (u, v) in enumerate(zip(self.centers.tolist(), self.neighbors.tolist())):
                self._pair_index.setdefault((u, v), []).append(k)
            # end for
        # end if
        return self._pair_index.get((center_row, neighbor_row), [])
    # end def

    def pair_alpha(self, center_row, neighbor_row):
        """
        Attention mass the center assigns to the neighbor, summed over all relations linking them.

        :return: The mass as 0-d tensor (differentiable), or `None` if the pair is not in any neighborhood.
        """
        edges = self.pair_edges(center_row, neighbor_row)
        if not edges:
            return None
        # end if
        return self.alpha_tensor[edges].sum()
    # end def
# end class


def _attention_tensors(g, layer, features=None):
    """
    :return: `(distances, normalized, weights, alphas)` as tensors over `g.attention_edges()`.
             The weights are the kernel weights, all ones for uniform scoring,
             or the head averaged dot product scores for multi-head scoring.
    """
    centers, neighbors, _ = g.attention_edges()
    h = as_tensor(g.features) if features is None else features
    x = layer.project(h)
    centers_t = torch.from_numpy(centers)
    neighbors_t = torch.from_numpy(neighbors)
    difference = x[centers_t] - x[neighbors_t]
    distances = (difference * difference).sum(dim=1)
    normalized = normalize_distances(distances)
    if layer.scoring == Scoring.UNIFORM:
        weights = torch.ones_like(normalized)
        degrees = torch.zeros(g.num_nodes, dtype=DTYPE).index_add(0, centers_t, weights)
        return distances, normalized, weights, weights / degrees[centers_t]
    # end if
    if layer.scoring == Scoring.MULTIHEAD:
        scores = layer.heads().edge_scores(h, centers_t, neighbors_t)
        index = centers_t[:, None].expand(-1, scores.shape[1])
        maxima = torch.full((g.num_nodes, scores.shape[1]), -np.inf, dtype=DTYPE).scatter_reduce(
            0, index, scores.detach(), reduce='amax',
        )
        exponentials = torch.exp(scores - maxima[centers_t])
        denominators = torch.zeros((g.num_nodes, scores.shape[1]), dtype=DTYPE).index_add(0, centers_t, exponentials)
        alphas = (exponentials / denominators[centers_t]).mean(dim=1)
        return distances, normalized, scores.mean(dim=1), alphas
    # end if
    weights = kernel_weights(normalized, layer.sigma_kernel)
    # scores are in (0, 1], exp can't overflow
    scores = torch.exp(weights)
    denominators = torch.zeros(g.num_nodes, dtype=DTYPE).index_add(0, centers_t, scores)
    alphas = scores / denominators[centers_t]
    return distances, normalized, weights, alphas
# end def


def attention(g, layer):
    """
    Computes the attention of every node over its neighborhood.
    How neighbors are scored depends on `layer.scoring`.

    Neighborhoods are traversed in both directions, every incident triple is one softmax entry.

    :type g: KnowledgeGraph
    :type layer: GatLayer
    :rtype: AttentionReport
    """
    assert_type_or_raise(g, KnowledgeGraph, parameter_name="g")
    assert_type_or_raise(layer, GatLayer, parameter_name="layer")
    centers, neighbors, relations = g.attention_edges()
    if centers.shape[0] == 0:
        return AttentionReport.empty(g.nodes)
    # end if
    distances, normalized, weights, alphas = _attention_tensors(g, layer)
    return AttentionReport(g.nodes, centers, neighbors, relations, distances, normalized, weights, alphas)
# end def


def node_update(g, report, layer, features=None):
    """
    `h'_u = activation(Σ_v α_uv · h_v)` for every node with neighbors, isolated nodes keep `h_u`.

    :param features: The features to aggregate, defaults to the graph's own node features.
    :return: |V|×d tensor of refined features, rows in node order.
    :rtype: torch.Tensor
    """
    h = as_tensor(g.features) if features is None else features
    if report.num_edges == 0:
        return h
    # end if
    centers_t = torch.from_numpy(report.centers)
    neighbors_t = torch.from_numpy(report.neighbors)
    aggregated = torch.zeros_like(h).index_add(0, centers_t, report.alpha_tensor[:, None] * h[neighbors_t])
    has_neighbors = torch.from_numpy(np.bincount(report.centers, minlength=g.num_nodes) > 0)
    return torch.where(has_neighbors[:, None], layer.activation(aggregated), h)
# end def


def refine_frames(g, layer):
    """
    One attention and update pass, returning the frame rows only.

    :return: N×d tensor, rows ordered by frame index t.
    :rtype: torch.Tensor

    :raises EmptyGraph: the graph holds no frames.
    """
    if g.num_frames == 0:
        raise EmptyGraph("graph of video {v} holds no frames".format(v=g.video_index))
    # end if
    report = attention(g, layer)
    return node_update(g, report, layer)[:g.num_frames]
# end def


class MultiHeadBaseline(object):
    """
    Plain multi-head dot product scoring.
    The comparison baseline of the cost benchmark, and the scorer behind :attr:`Scoring.MULTIHEAD`.

    `w_query` and `w_key` are stacked per head: H×d_h×D.
    """
    def __init__(self, w_query, w_key):
        self.w_query = as_tensor(w_query)
        self.w_key = as_tensor(w_key)
        if self.w_query.ndim != 3 or self.w_query.shape != self.w_key.shape:
            raise ShapeMismatch("query and key projections must both be H×d_h×D, got {q} and {k}".format(
                q=tuple(self.w_query.shape), k=tuple(self.w_key.shape),
            ))
        # end if
        if self.num_heads < 1 or self.head_dim < 1:
            raise ShapeMismatch("need at least one head of at least one dimension")
        # end if
    # end def

    @classmethod
    def random(cls, num_heads, head_dim, dim_in, generator=None):
        shape = (num_heads, head_dim, dim_in)
        return cls(
            torch.randn(shape, generator=generator, dtype=DTYPE),
            torch.randn(shape, generator=generator, dtype=DTYPE),
        )
    # end def

    @property
    def num_heads(self):
        return self.w_query.shape[0]
    # end def

    @property
    def head_dim(self):
        return self.w_query.shape[1]
    # end def

    @property
    def dim_in(self):
        return self.w_query.shape[2]
    # end def

    def edge_scores(self, features, centers, neighbors):
        """
        `q_u^(h) · k_v^(h) / √d_h` for the given edges u → v.

        :param features: N×D matrix.
        :param centers: E row indices u.
        :param neighbors: E row indices v.
        :return: E×H tensor.
        """
        x = as_tensor(features)
        queries = torch.einsum('hkd,nd->nhk', self.w_query, x)
        keys = torch.einsum('hkd,nd->nhk', self.w_key, x)
        return (queries[centers] * keys[neighbors]).sum(dim=2) / np.sqrt(self.head_dim)
    # end def
# end class


class TensorOps(object):
    """ The multiplying operations the dense scorers are built from. """
    def matmul(self, a, b):
        return a @ b
    # end def

    def square(self, x):
        return x * x
    # end def

    def kernel(self, x, sigma):
        return kernel_weights(x, sigma)
    # end def
# end class


class CountingOps(TensorOps):
    """ Same results, but counts every scalar multiplication. """
    def __init__(self):
        self.multiplies = 0
    # end def

    def matmul(self, a, b):
        self.multiplies += a.shape[0] * a.shape[1] * b.shape[1]
        return super().matmul(a, b)
    # end def

    def square(self, x):
        self.multiplies += x.numel()
        return super().square(x)
    # end def

    def kernel(self, x, sigma):
        self.multiplies += x.numel()
        return super().kernel(x, sigma)
    # end def
# end class


def multihead_baseline_attention(features, baseline, ops=None):
    """
    Unscaled scores `q_i^(h) · k_j^(h)` for all ordered pairs and heads.

    :param features: N×D matrix.
    :type  baseline: MultiHeadBaseline
    :param ops: the matrix products go through this, defaults to :class:`TensorOps`.
    :type  ops: TensorOps | None
    :return: N×N×H tensor.
    :raises ShapeMismatch: features are not N×D.
    """
    ops = TensorOps() if ops is None else ops
    x = as_tensor(features)
    if x.ndim != 2 or x.shape[1] != baseline.dim_in:
        raise ShapeMismatch("features must be N×{D}, got {shape}".format(D=baseline.dim_in, shape=tuple(x.shape)))
    # end if
    heads = []
    for h in range(baseline.num_heads):
        queries = ops.matmul(x, baseline.w_query[h].T)
        keys = ops.matmul(x, baseline.w_key[h].T)
        heads.append(ops.matmul(queries, keys.T))
    # end for
    return torch.stack(heads, dim=-1)
# end def


def dense_kernel_attention(features, sigma_kernel=DEFAULT_SIGMA_KERNEL, ops=None):
    """
    Kernel weights of all ordered pairs of rows, the dense counterpart of :func:`attention`:
    squared distances one row at a time, interval normalized over the whole matrix, then the Gaussian kernel.

    :param features: N×D matrix.
    :param ops: the squares and the kernel go through this, defaults to :class:`TensorOps`.
    :type  ops: TensorOps | None
    :return: N×N tensor.
    :raises ShapeMismatch: features are not a matrix.
    """
    ops = TensorOps() if ops is None else ops
    x = as_tensor(features)
    if x.ndim != 2:
        raise ShapeMismatch("features must be N×D, got {shape}".format(shape=tuple(x.shape)))
    # end if
    squared = torch.stack([ops.square(x - x[i][None, :]).sum(dim=1) for i in range(x.shape[0])])
    normalized = normalize_distances(squared.reshape(-1)).reshape(squared.shape)
    return ops.kernel(normalized, sigma_kernel)
# end def


def write_attention_jsonl(report, f):
    """ One line per scored edge: `{"head", "tail", "relation", "alpha", "distance"}`. """
    for k in range(report.num_edges):
        f.write(json.dumps({
            "head": str(report.nodes[report.centers[k]]),
            "tail": str(report.nodes[report.neighbors[k]]),
            "relation": int(report.relations[k]),
            "alpha": float(report.alphas[k]),
            "distance": float(report.distances[k]),
        }))
        f.write("\n")
    # end for
# end def


def read_attention_jsonl(f):
    """ :rtype: list of dict """
    return [json.loads(line) for line in f if line.strip()]
# end def
