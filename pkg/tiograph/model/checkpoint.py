# -*- coding: utf-8 -*-
"""
Binary model checkpoints.

Layout, all little endian:

    header   8s magic "TIOCKPT1" | u32 version | u32 d | u32 d_hidden | u32 C | u32 flags
    hyper    f64 sigma_kernel | f64 sigma_time | u32 relation policy (0 = all, 1 = nearest)
    heads    u32 H, only with flag bit 4
    blocks   per parameter: u32 name length | name (utf-8) | u32 value count | f64 values (row major)

Flags: bit 0 projection present, bit 1 graph stage on, bit 2 temporal stage on,
bit 3 uniform scoring, bit 4 multi-head scoring (neither: distance kernel scoring).

Blocks appear in exactly this order, `gat.projection` only with flag bit 0 set,
`gat.w_query` and `gat.w_key` only with flag bit 4 set:

    gat.projection          d×d
    gat.w_query             H×max(1, d // H)×d
    gat.w_key               H×max(1, d // H)×d
    temporal.ln1.weight     d
    temporal.ln1.bias       d
    temporal.ffn1.weight    d_hidden×d   (W1 transposed)
    temporal.ffn1.bias      d_hidden
    temporal.ffn2.weight    d×d_hidden   (W2 transposed)
    temporal.ffn2.bias      d
    temporal.ln2.weight     d
    temporal.ln2.bias       d
    classifier.weight       C×d
    classifier.bias         C
"""
import io
import os
import struct

import numpy as np
import torch
from luckydonaldUtils.logger import logging
from luckydonaldUtils.exceptions import assert_type_or_raise

from ..exceptions import CheckpointError, IoFailure
from ..utilities import DTYPE
from .attention import Scoring
from .base import VideoModel

__author__ = 'luckydonald'
__all__ = ['write_checkpoint', 'read_checkpoint', 'checkpoint_bytes', 'check_compatible', 'BLOCK_ORDER']
logger = logging.getLogger(__name__)


MAGIC = b"TIOCKPT1"
VERSION = 1
HEADER = struct.Struct('<8sIIIII')
HYPER = struct.Struct('<ddI')
U32 = struct.Struct('<I')
F64 = np.dtype('<f8')

FLAG_PROJECTION = 1 << 0
FLAG_USE_GAT = 1 << 1
FLAG_USE_TEMPORAL = 1 << 2
FLAG_UNIFORM = 1 << 3
FLAG_MULTIHEAD = 1 << 4

POLICY_CODES = {'all': 0, 'nearest': 1}

BLOCK_ORDER = (
    'gat.projection', 'gat.w_query', 'gat.w_key',
    'temporal.ln1.weight', 'temporal.ln1.bias',
    'temporal.ffn1.weight', 'temporal.ffn1.bias',
    'temporal.ffn2.weight', 'temporal.ffn2.bias',
    'temporal.ln2.weight', 'temporal.ln2.bias',
    'classifier.weight', 'classifier.bias',
)


def _block_names(model):
    present = dict(model.named_parameters())
    return [name for name in BLOCK_ORDER if name in present]
# end def


def checkpoint_bytes(model):
    """
    :type model: VideoModel
    :rtype: bytes
    """
    assert_type_or_raise(model, VideoModel, parameter_name="model")
    flags = 0
    if model.has_projection:
        flags |= FLAG_PROJECTION
    # end if
    if model.use_gat:
        flags |= FLAG_USE_GAT
    # end if
    if model.use_temporal:
        flags |= FLAG_USE_TEMPORAL
    # end if
    if model.scoring == Scoring.UNIFORM:
        flags |= FLAG_UNIFORM
    elif model.scoring == Scoring.MULTIHEAD:
        flags |= FLAG_MULTIHEAD
    # end if
    out = io.BytesIO()
    out.write(HEADER.pack(MAGIC, VERSION, model.dim, model.d_hidden, model.num_classes, flags))
    out.write(HYPER.pack(model.gat.sigma_kernel, model.temporal.sigma_time, POLICY_CODES[model.relation_policy]))
    if flags & FLAG_MULTIHEAD:
        out.write(U32.pack(model.gat.num_heads))
    # end if
    parameters = dict(model.named_parameters())
    for name in _block_names(model):
        encoded = name.encode('utf-8')
        values = parameters[name].detach().numpy().astype(F64).reshape(-1)
        out.write(U32.pack(len(encoded)))
        out.write(encoded)
        out.write(U32.pack(values.shape[0]))
        out.write(values.tobytes())
    # end for
    return out.getvalue()
# end def


def write_checkpoint(model, path):
    """
    :raises IoFailure: the file can't be written.
    """
    data = checkpoint_bytes(model)
    try:
        with open(path, 'wb') as f:
            f.write(data)
        # end with
    except OSError as e:
        raise IoFailure("could not write checkpoint {path!r}: {e}".format(path=os.fspath(path), e=e)) from e
    # end try
    logger.info("wrote checkpoint {path!r} ({n} bytes)".format(path=os.fspath(path), n=len(data)))
# end def


class _Reader(object):
    def __init__(self, data):
        self.data = data
        self.position = 0
    # end def

    def take(self, length, what):
        if self.position + length > len(self.data):
            raise CheckpointError("checkpoint truncated while reading {what}".format(what=what))
        # end if
        chunk = self.data[self.position:self.position + length]
        self.position += length
        return chunk
    # end def

    def unpack(self, structure, what):
        return structure.unpack(self.take(structure.size, what))
    # end def
# end class


def read_checkpoint(path_or_bytes):
    """
    Reads a checkpoint back into a model.

    :param path_or_bytes: a file path, or the raw checkpoint bytes.
    :raises CheckpointError: not a checkpoint, unknown version, or inconsistent blocks.
    :raises IoFailure: the file can't be read.
    :rtype: VideoModel
    """
    if isinstance(path_or_bytes, (bytes, bytearray)):
        data = bytes(path_or_bytes)
    else:
        try:
            with open(path_or_bytes, 'rb') as f:
                data = f.read()
            # end with
        except OSError as e:
            raise IoFailure("could not read checkpoint {path!r}: {e}".format(path=os.fspath(path_or_bytes), e=e)) from e
        # end try
    # end if
    reader = _Reader(data)
    magic, version, dim, d_hidden, num_classes, flags = reader.unpack(HEADER, "the header")
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint, magic is {!r}".format(magic))
    # end if
    if version != VERSION:
        raise CheckpointError("checkpoint version {v} is not supported, only {supported}".format(v=version, supported=VERSION))
    # end if
    sigma_kernel, sigma_time, policy_code = reader.unpack(HYPER, "the hyper parameters")
    policies = {code: name for name, code in POLICY_CODES.items()}
    if policy_code not in policies:
        raise CheckpointError("unknown relation policy code {}".format(policy_code))
    # end if
    if flags & FLAG_UNIFORM and flags & FLAG_MULTIHEAD:
        raise CheckpointError("flags select both uniform and multi-head scoring")
    # end if
    scoring, num_heads = Scoring.KERNEL, 1
    if flags & FLAG_UNIFORM:
        scoring = Scoring.UNIFORM
    elif flags & FLAG_MULTIHEAD:
        scoring = Scoring.MULTIHEAD
        (num_heads,) = reader.unpack(U32, "the head count")
    # end if
    try:
        model = VideoModel(
            dim=dim, num_classes=num_classes, d_hidden=d_hidden,
            sigma_kernel=sigma_kernel, sigma_time=sigma_time, projection=bool(flags & FLAG_PROJECTION),
            use_gat=bool(flags & FLAG_USE_GAT), use_temporal=bool(flags & FLAG_USE_TEMPORAL),
            relation_policy=policies[policy_code], scoring=scoring, num_heads=num_heads,
        )
    except ValueError as e:
        raise CheckpointError("checkpoint header is inconsistent: {}".format(e)) from e
    # end try
    parameters = dict(model.named_parameters())
    with torch.no_grad():
        for expected in _block_names(model):
            (length,) = reader.unpack(U32, "a block name length")
            name = reader.take(length, "a block name").decode('utf-8', errors='replace')
            if name != expected:
                raise CheckpointError("expected block {expected!r}, found {name!r}".format(expected=expected, name=name))
            # end if
            (count,) = reader.unpack(U32, "the size of {!r}".format(name))
            parameter = parameters[name]
            if count != parameter.numel():
                raise CheckpointError("block {name!r} holds {count} values, expected {n}".format(
                    name=name, count=count, n=parameter.numel(),
                ))
            # end if
            values = np.frombuffer(reader.take(count * F64.itemsize, name), dtype=F64)
            if not np.all(np.isfinite(values)):
                raise CheckpointError("block {name!r} contains non-finite values".format(name=name))
            # end if
            parameter.copy_(torch.from_numpy(values.astype(np.float64)).reshape(parameter.shape).to(DTYPE))
        # end for
    # end with
    if reader.position != len(data):
        raise CheckpointError("{n} trailing bytes after the last block".format(n=len(data) - reader.position))
    # end if
    return model
# end def


def check_compatible(model, bundle):
    """
    :raises CheckpointError: dimensionality or class count differ between model and bundle.
    """
    if model.dim != bundle.dim:
        raise CheckpointError("checkpoint has d={m}, bundle has d={b}".format(m=model.dim, b=bundle.dim))
    # end if
    if model.num_classes != bundle.num_classes:
        raise CheckpointError("checkpoint has {m} classes, bundle has {b}".format(m=model.num_classes, b=bundle.num_classes))
    # end if
    return model
# end def
