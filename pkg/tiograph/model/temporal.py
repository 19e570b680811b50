# -*- coding: utf-8 -*-
"""
Temporal context for the refined frame features.

Frames are mixed by a fixed adjacency decaying with their index distance, then passed through
layer norm, a feed forward network with residual, and a second layer norm. There is no positional encoding,
the adjacency is the only thing that knows about frame order.
"""
from typing import NamedTuple

import torch
from torch import nn
from torch.nn import functional as F
from luckydonaldUtils.logger import logging

from ..exceptions import ShapeMismatch
from ..utilities import DTYPE, as_tensor

__author__ = 'luckydonald'
__all__ = [
    'TemporalMatrices', 'LayerNormParams', 'TemporalEncoder', 'TemporalOutput',
    'build_temporal_adjacency', 'fuse', 'layer_norm', 'ffn_residual', 'encode',
]
logger = logging.getLogger(__name__)


DEFAULT_SIGMA_TIME = 3.0
LAYER_NORM_EPS = 1e-5


class TemporalMatrices(NamedTuple):
    a_t: torch.Tensor
    degree: torch.Tensor
    a_tilde: torch.Tensor

    @property
    def num_frames(self):
        return self.a_t.shape[0]
    # end def
# end class


class LayerNormParams(NamedTuple):
    """ Stand alone layer norm parameters, for when there's no :class:`torch.nn.LayerNorm` at hand. """
    gain: torch.Tensor
    bias: torch.Tensor
    eps: float = LAYER_NORM_EPS
# end class


class TemporalOutput(NamedTuple):
    frame_features: torch.Tensor  # N×d, H'''
    video_embedding: torch.Tensor  # d, z
# end class


def build_temporal_adjacency(num_frames, sigma_time=DEFAULT_SIGMA_TIME):
    """
    `(A_t)_ij = exp(−|i − j| / σ)`, `D = diag(Σ_j (A_t)_ij)`, `Ã = D^(−1/2) · A_t · D^(−1/2)`.

    :param num_frames: N ≥ 1
    :param sigma_time: σ > 0
    :rtype: TemporalMatrices
    """
    if num_frames < 1:
        raise ValueError("need at least one frame, got {!r}".format(num_frames))
    # end if
    if not sigma_time > 0:
        raise ValueError("sigma_time must be > 0, got {!r}".format(sigma_time))
    # end if
    index = torch.arange(num_frames, dtype=DTYPE)
    a_t = torch.exp(-(index[:, None] - index[None, :]).abs() / sigma_time)
    degrees = a_t.sum(dim=1)
    inverse_sqrt = degrees.rsqrt()
    a_tilde = inverse_sqrt[:, None] * a_t * inverse_sqrt[None, :]
    return TemporalMatrices(a_t=a_t, degree=torch.diag(degrees), a_tilde=a_tilde)
# end def


def fuse(h, m):
    """
    `H' = rowsoftmax(Ã) · H`

    :param h: N×d frame features.
    :type  m: TemporalMatrices
    :raises ShapeMismatch: H doesn't have N rows.
    """
    h = as_tensor(h)
    if h.ndim != 2 or h.shape[0] != m.num_frames:
        raise ShapeMismatch("expected {n}×d frame features, got {shape}".format(n=m.num_frames, shape=tuple(h.shape)))
    # end if
    return torch.softmax(m.a_tilde, dim=1) @ h
# end def


def layer_norm(x, params):
    """
    Per row: `(x − mean) / sqrt(var + eps) ⊙ gain + bias`, with the biased variance.

    :param params: a :class:`torch.nn.LayerNorm` or :class:`LayerNormParams`.
    :type  params: torch.nn.LayerNorm | LayerNormParams
    """
    x = as_tensor(x)
    if isinstance(params, nn.LayerNorm):
        return F.layer_norm(x, params.normalized_shape, params.weight, params.bias, params.eps)
    # end if
    return F.layer_norm(x, (x.shape[-1],), as_tensor(params.gain), as_tensor(params.bias), params.eps)
# end def


class TemporalEncoder(nn.Module):
    """
    One encoder block: fusion, layer norm, feed forward network with residual, layer norm.

    `ffn1.weight` is the transposed `W1` (`d_hidden×d`), as :class:`torch.nn.Linear` stores it;
    same for `ffn2.weight`.
    """
    def __init__(self, dim, d_hidden=None, sigma_time=DEFAULT_SIGMA_TIME):
        super().__init__()
        if d_hidden is None:
            d_hidden = 2 * dim
        # end if
        if dim < 1 or d_hidden < 1:
            raise ValueError("dim and d_hidden must be >= 1, got {d} and {h}".format(d=dim, h=d_hidden))
        # end if
        if not sigma_time > 0:
            raise ValueError("sigma_time must be > 0, got {!r}".format(sigma_time))
        # end if
        self.dim = dim
        self.d_hidden = d_hidden
        self.sigma_time = float(sigma_time)
        self.ln1 = nn.LayerNorm(dim, eps=LAYER_NORM_EPS, dtype=DTYPE)
        self.ffn1 = nn.Linear(dim, d_hidden, dtype=DTYPE)
        self.ffn2 = nn.Linear(d_hidden, dim, dtype=DTYPE)
        self.ln2 = nn.LayerNorm(dim, eps=LAYER_NORM_EPS, dtype=DTYPE)
    # end def

    @torch.no_grad()
    def reset_parameters(self, generator):
        """
        Layer norms start at gain 1, bias 0. The feed forward weights are drawn uniformly from
        `±0.1/sqrt(fan_in)`, biases start at 0.

        :type generator: torch.Generator
        """
        self.ln1.weight.fill_(1.0)
        self.ln1.bias.zero_()
        self.ln2.weight.fill_(1.0)
        self.ln2.bias.zero_()
        for linear in (self.ffn1, self.ffn2):
            bound = 0.1 / linear.in_features ** 0.5
            linear.weight.copy_((torch.rand(linear.weight.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound)
            linear.bias.zero_()
        # end for
    # end def

    def matrices(self, num_frames):
        return build_temporal_adjacency(num_frames, self.sigma_time)
    # end def

    def forward(self, h):
        return encode(h, self)
    # end def

    def extra_repr(self):
        return "sigma_time={}".format(self.sigma_time)
    # end def
# end class


def ffn_residual(h2, enc):
    """
    `H''' = LN₂(ReLU(H''·W1 + b1)·W2 + b2 + H'')`

    :type enc: TemporalEncoder
    :raises ShapeMismatch: H'' is not N×d.
    """
    h2 = as_tensor(h2)
    if h2.ndim != 2 or h2.shape[1] != enc.dim:
        raise ShapeMismatch("expected N×{d} features, got {shape}".format(d=enc.dim, shape=tuple(h2.shape)))
    # end if
    return layer_norm(enc.ffn2(torch.relu(enc.ffn1(h2))) + h2, enc.ln2)
# end def


def encode(h, enc):
    """
    The full temporal pass: `H' = fuse(H)`, `H'' = LN₁(H')`, `H''' = ffn_residual(H'')`,
    and the video embedding `z` as mean over the rows of `H'''`.

    :param h: N×d refined frame features, N ≥ 1.
    :type  enc: TemporalEncoder
    :rtype: TemporalOutput
    """
    h = as_tensor(h)
    if h.ndim != 2 or h.shape[0] < 1:
        raise ShapeMismatch("expected N×d features with N >= 1, got {shape}".format(shape=tuple(h.shape)))
    # end if
    h1 = fuse(h, enc.matrices(h.shape[0]))
    h2 = layer_norm(h1, enc.ln1)
    h3 = ffn_residual(h2, enc)
    return TemporalOutput(frame_features=h3, video_embedding=h3.mean(dim=0))
# end def
