# -*- coding: utf-8 -*-
"""
Full batch training of the :class:`tiograph.model.base.VideoModel` with Adam and an exponentially decaying learning rate.

Every epoch is one step over all training videos. The per-epoch randomness (video order,
retrieval negatives, negative edge samples) comes from a single `numpy.random.Generator` seeded with the run's seed.
"""
import csv
from dataclasses import dataclass, replace, fields, asdict
from typing import NamedTuple, Optional, List

import numpy as np
import torch
from torch.optim import Adam
from torch.optim.lr_scheduler import ExponentialLR
from luckydonaldUtils.logger import logging
from luckydonaldUtils.exceptions import assert_type_or_raise

from ..bundle.types import EmbeddingBundle
from ..exceptions import EmptyBatch, InsufficientClasses, ShapeMismatch
from ..graph.policies import RELATION_POLICIES
from ..utilities import raise_on_non_finite, as_tensor
from .attention import Scoring, DEFAULT_ATTENTION_HEADS
from .base import VideoModel
from .losses import EdgeSupervision, LossReport, cls_loss, ret_loss, gat_reg_loss, total_loss

__author__ = 'luckydonald'
__all__ = [
    'TrainConfig', 'VideoSample', 'TrainResult',
    'build_batch', 'batch_loss', 'compute_gradients', 'make_optimizer', 'adam_step', 'train',
    'write_history_csv', 'read_history_csv',
]
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig(object):
    lr0: float = 5e-5
    decay_per_epoch: float = 0.95
    margin_alpha: float = 0.9
    lambda_gat: float = 1.0
    w_cls: float = 1.4
    w_ret: float = 1.3
    w_gat: float = 1.0
    epochs: int = 200
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sigma_kernel: float = 0.25
    sigma_time: float = 3.0
    relation_policy: str = 'all'
    train_projection: bool = True
    use_gat: bool = True
    use_temporal: bool = True
    d_hidden: Optional[int] = None
    attention: str = 'kernel'  # see tiograph.model.attention.Scoring
    attention_heads: int = DEFAULT_ATTENTION_HEADS  # only used by multi-head scoring

    def __post_init__(self):
        if not self.lr0 > 0:
            raise ValueError("lr0 must be > 0, got {!r}".format(self.lr0))
        # end if
        if not 0 < self.decay_per_epoch <= 1:
            raise ValueError("decay_per_epoch must be in (0, 1], got {!r}".format(self.decay_per_epoch))
        # end if
        if not self.margin_alpha >= 0:
            raise ValueError("margin_alpha must be >= 0, got {!r}".format(self.margin_alpha))
        # end if
        if not isinstance(self.epochs, int) or self.epochs < 0:
            raise ValueError("epochs must be a non-negative integer, got {!r}".format(self.epochs))
        # end if
        if not (self.sigma_kernel > 0 and self.sigma_time > 0):
            raise ValueError("sigma_kernel and sigma_time must be > 0")
        # end if
        if self.relation_policy not in RELATION_POLICIES:
            raise ValueError("relation_policy must be one of {known!r}, got {got!r}".format(
                known=sorted(RELATION_POLICIES), got=self.relation_policy,
            ))
        # end if
        if self.d_hidden is not None and self.d_hidden < 1:
            raise ValueError("d_hidden must be >= 1, got {!r}".format(self.d_hidden))
        # end if
        if self.attention not in {scoring.value for scoring in Scoring}:
            raise ValueError("attention must be one of {known!r}, got {got!r}".format(
                known=[scoring.value for scoring in Scoring], got=self.attention,
            ))
        # end if
        if not isinstance(self.attention_heads, int) or self.attention_heads < 1:
            raise ValueError("attention_heads must be a positive integer, got {!r}".format(self.attention_heads))
        # end if
    # end def

    def replace(self, **overrides):
        """ Copy with some fields changed, `None` values are ignored. """
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError("unknown config fields: {}".format(", ".join(sorted(unknown))))
        # end if
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})
    # end def

    def learning_rate(self, epoch):
        """ `lr0 · decay^epoch`, epochs counted from 0. """
        return self.lr0 * self.decay_per_epoch ** epoch
    # end def
# end class


class VideoSample(NamedTuple):
    graph: object  # KnowledgeGraph
    label_index: int
    positive_text: torch.Tensor
    negative_text: torch.Tensor
    supervision: Optional[EdgeSupervision]
# end class


class TrainResult(NamedTuple):
    model: VideoModel
    history: List[LossReport]
# end class


def check_trainable(bundle, video_indices):
    """
    :raises EmptyBatch: no videos.
    :raises InsufficientClasses: less than two classes among the videos, or a class without keywords to retrieve.
    """
    if len(video_indices) == 0:
        raise EmptyBatch("no videos to train on")
    # end if
    labels = sorted({bundle.videos[v].label_index for v in video_indices})
    if len(labels) < 2:
        raise InsufficientClasses("training videos cover only {n} class(es): {labels!r}".format(
            n=len(labels), labels=[bundle.class_names[c] for c in labels],
        ))
    # end if
    for label in labels:
        if not bundle.keywords_for_class(label):
            raise InsufficientClasses("class {name!r} has no keywords to use as retrieval target".format(
                name=bundle.class_names[label],
            ))
        # end if
    # end for
# end def


def build_batch(bundle, graphs, order, rng, use_gat=True):
    """
    Prepares the samples of one step: per video the positive text (a keyword of the video's own class) and
    the negative text (a keyword of any other class), both drawn uniformly with `rng`, and the edge supervision.

    :param graphs: `{video_index: KnowledgeGraph}`
    :param order: video indices, in the order to use.
    :type  rng: numpy.random.Generator
    :rtype: list of VideoSample
    """
    keywords = bundle.keyword_matrix()
    batch = []
    for v in order:
        v = int(v)
        label = bundle.videos[v].label_index
        own = [j for j, keyword in enumerate(bundle.keywords) if keyword.source_label_index == label]
        other = [j for j, keyword in enumerate(bundle.keywords) if keyword.source_label_index != label]
        if not own or not other:
            raise InsufficientClasses("video {id!r} has no keyword of its own or of another class".format(
                id=bundle.videos[v].id,
            ))
        # end if
        j_pos = own[int(rng.integers(len(own)))]
        j_neg = other[int(rng.integers(len(other)))]
        supervision = EdgeSupervision.from_graph(graphs[v], rng) if use_gat else None
        batch.append(VideoSample(
            graph=graphs[v], label_index=label,
            positive_text=as_tensor(keywords[j_pos]), negative_text=as_tensor(keywords[j_neg]),
            supervision=supervision,
        ))
    # end for
    return batch
# end def


def batch_loss(model, batch, cfg):
    """
    Forward pass over the batch.

    :type model: VideoModel
    :type batch: list of VideoSample
    :type cfg: TrainConfig
    :return: the differentiable total loss and the report of all components.
    :rtype: (torch.Tensor, LossReport)
    """
    if not batch:
        raise EmptyBatch("empty batch")
    # end if
    classified = []
    triplets = []
    l_gat = torch.zeros((), dtype=torch.float64)
    skipped = 0
    for sample in batch:
        out = model(sample.graph)
        classified.append((out.probabilities, sample.label_index))
        triplets.append((out.video_embedding, sample.positive_text, sample.negative_text))
        if model.use_gat and sample.supervision is not None:
            loss, unscored = gat_reg_loss(out.report, sample.supervision, cfg.lambda_gat, return_skipped=True)
            l_gat = l_gat + loss
            skipped += unscored
        # end if
    # end for
    l_cls = cls_loss(classified)
    l_ret = ret_loss(triplets, cfg.margin_alpha)
    l_total = total_loss(l_cls, l_ret, l_gat, cfg)
    report = LossReport(
        l_cls=float(l_cls), l_ret=float(l_ret), l_gat=float(l_gat), l_total=float(l_total),
        skipped_negatives=skipped,
    )
    return l_total, report
# end def


@raise_on_non_finite
def compute_gradients(model, batch, cfg):
    """
    Gradients of the total loss for every trainable parameter, by reverse mode differentiation.
    Parameters the loss doesn't reach get zero gradients.

    :return: `{parameter_name: gradient}` and the loss report.
    :rtype: (dict, LossReport)
    :raises NonFiniteGradient: any NaN or infinity in the loss or a gradient.
    """
    model.zero_grad(set_to_none=True)
    l_total, report = batch_loss(model, batch, cfg)
    if l_total.requires_grad:
        l_total.backward()
    # end if
    gradients = {}
    for name, parameter in model.named_parameters():
        if not parameter.requires_grad:
            continue
        # end if
        gradient = parameter.grad
        gradients[name] = torch.zeros_like(parameter) if gradient is None else gradient.detach().clone()
    # end for
    model.zero_grad(set_to_none=True)
    return gradients, report
# end def


def make_optimizer(model, cfg):
    """ :rtype: torch.optim.Adam """
    return Adam(
        model.parameters(), lr=cfg.lr0, betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps,
    )
# end def


def adam_step(params, grads, state, lr=None):
    """
    One bias corrected Adam update, in place.

    :param params: `{name: parameter}`, the parameters `state` optimizes.
    :param grads: `{name: gradient}`, same names and shapes.
    :param state: The optimizer holding moments and step counts.
    :type  state: torch.optim.Adam
    :param lr: Learning rate for this step, defaults to the optimizer's current one (as set by the scheduler).

    :raises ShapeMismatch: a gradient is missing or shaped differently.
    """
    for name, parameter in params.items():
        if name not in grads:
            raise ShapeMismatch("no gradient for {name!r}".format(name=name))
        # end if
        gradient = as_tensor(grads[name])
        if gradient.shape != parameter.shape:
            raise ShapeMismatch("gradient of {name!r} has shape {got}, expected {expected}".format(
                name=name, got=tuple(gradient.shape), expected=tuple(parameter.shape),
            ))
        # end if
        parameter.grad = gradient.clone()
    # end for
    if lr is not None:
        for group in state.param_groups:
            group['lr'] = lr
        # end for
    # end if
    state.step()
    for parameter in params.values():
        parameter.grad = None
    # end for
    return params, state
# end def


def train(bundle, cfg, video_indices=None):
    """
    Trains a fresh model on the given videos (all by default).

    :type bundle: EmbeddingBundle
    :type cfg: TrainConfig
    :param video_indices: Which videos to train on, e.g. to keep a held-out split.
    :type  video_indices: list of int | None

    :raises InsufficientClasses: less than two classes to train on.
    :raises NonFiniteGradient: the training diverged.
    :rtype: TrainResult
    """
    assert_type_or_raise(bundle, EmbeddingBundle, parameter_name="bundle")
    assert_type_or_raise(cfg, TrainConfig, parameter_name="cfg")
    if video_indices is None:
        video_indices = list(range(len(bundle.videos)))
    # end if
    video_indices = [int(v) for v in video_indices]
    check_trainable(bundle, video_indices)

    model = VideoModel.from_config(bundle.dim, bundle.num_classes, cfg).reset_parameters(cfg.seed)
    graphs = {v: model.graph_for(bundle, v) for v in video_indices}
    rng = np.random.default_rng(cfg.seed)
    optimizer = make_optimizer(model, cfg)
    scheduler = ExponentialLR(optimizer, gamma=cfg.decay_per_epoch)
    params = {name: parameter for name, parameter in model.named_parameters() if parameter.requires_grad}
    logger.info("training on {n} videos for {epochs} epochs (seed {seed})".format(
        n=len(video_indices), epochs=cfg.epochs, seed=cfg.seed,
    ))

    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(video_indices)
        batch = build_batch(bundle, graphs, order, rng, use_gat=model.use_gat)
        gradients, report = compute_gradients(model, batch, cfg)
        adam_step(params, gradients, optimizer)
        scheduler.step()
        history.append(report)
        if epoch == 0 and report.skipped_negatives:
            logger.warning("{n} negative pairs per epoch are outside every attention neighborhood and are skipped".format(
                n=report.skipped_negatives,
            ))
        # end if
        logger.debug("epoch {e}: total={r.l_total:.6g} cls={r.l_cls:.6g} ret={r.l_ret:.6g} gat={r.l_gat:.6g}".format(
            e=epoch + 1, r=report,
        ))
    # end for
    if history:
        logger.info("finished training: total loss {first:.6g} -> {last:.6g}".format(
            first=history[0].l_total, last=history[-1].l_total,
        ))
    # end if
    return TrainResult(model=model, history=history)
# end def


HISTORY_COLUMNS = ('epoch', 'l_cls', 'l_ret', 'l_gat', 'l_total', 'skipped_negatives')


def write_history_csv(history, f):
    """ One row per epoch, counting from 1. """
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for epoch, report in enumerate(history, start=1):
        values = asdict(report)
        writer.writerow([epoch] + [
            "{:.12g}".format(values[column]) if column != 'skipped_negatives' else values[column]
            for column in HISTORY_COLUMNS[1:]
        ])
    # end for
# end def


def read_history_csv(f):
    """ :rtype: list of LossReport """
    history = []
    for row in csv.DictReader(f):
        history.append(LossReport(
            l_cls=float(row['l_cls']), l_ret=float(row['l_ret']), l_gat=float(row['l_gat']),
            l_total=float(row['l_total']), skipped_negatives=int(row['skipped_negatives']),
        ))
    # end for
    return history
# end def
