# -*- coding: utf-8 -*-
from typing import NamedTuple, Optional

import torch
from torch import nn
from luckydonaldUtils.logger import logging

from ..graph.knowledge_graph import build_graph
from ..utilities import DTYPE, as_tensor
from .attention import (
    GatLayer, AttentionReport, Scoring, attention, node_update, DEFAULT_SIGMA_KERNEL, DEFAULT_ATTENTION_HEADS,
)
from .heads import Classifier, classify, anomaly_score
from .temporal import TemporalEncoder, encode, DEFAULT_SIGMA_TIME

__author__ = 'luckydonald'
__all__ = ['VideoModel', 'VideoForward']
logger = logging.getLogger(__name__)


class VideoForward(NamedTuple):
    report: Optional[AttentionReport]  # None with the graph stage switched off
    refined: torch.Tensor  # N×d frame features after the graph stage
    frame_features: torch.Tensor  # N×d, after the temporal stage
    video_embedding: torch.Tensor  # z
    probabilities: torch.Tensor  # C
# end class


class VideoModel(nn.Module):
    """
    The complete pipeline for one video graph:
    graph attention refinement of the frame nodes, temporal encoding, and the classifier head.

    Either of the first two stages can be switched off. Without the graph stage the raw frame embeddings
    go into the temporal encoder, without the temporal stage the video embedding is the mean of the refined frames.
    The graph stage scores neighbors with the distance kernel by default, see :class:`tiograph.model.attention.Scoring`.
    """
    def __init__(
        self, dim, num_classes, d_hidden=None,
        sigma_kernel=DEFAULT_SIGMA_KERNEL, sigma_time=DEFAULT_SIGMA_TIME, projection=True,
        use_gat=True, use_temporal=True, relation_policy='all',
        scoring=Scoring.KERNEL, num_heads=DEFAULT_ATTENTION_HEADS,
    ):
        super().__init__()
        self.dim = dim
        self.num_classes = num_classes
        self.use_gat = bool(use_gat)
        self.use_temporal = bool(use_temporal)
        self.relation_policy = relation_policy
        self.gat = GatLayer(dim, sigma_kernel=sigma_kernel, projection=projection, scoring=scoring, num_heads=num_heads)
        self.temporal = TemporalEncoder(dim, d_hidden=d_hidden, sigma_time=sigma_time)
        self.classifier = Classifier(dim, num_classes)
    # end def

    @classmethod
    def from_config(cls, dim, num_classes, cfg):
        """
        :type cfg: tiograph.model.training.TrainConfig
        """
        return cls(
            dim=dim, num_classes=num_classes, d_hidden=cfg.d_hidden,
            sigma_kernel=cfg.sigma_kernel, sigma_time=cfg.sigma_time, projection=cfg.train_projection,
            use_gat=cfg.use_gat, use_temporal=cfg.use_temporal, relation_policy=cfg.relation_policy,
            scoring=cfg.attention, num_heads=cfg.attention_heads,
        )
    # end def

    @property
    def d_hidden(self):
        return self.temporal.d_hidden
    # end def

    @property
    def non_violence_index(self):
        return self.num_classes - 1
    # end def

    @property
    def scoring(self):
        return self.gat.scoring
    # end def

    @property
    def has_projection(self):
        return self.gat.projection is not None
    # end def

    @torch.no_grad()
    def reset_parameters(self, seed):
        """
        Deterministic initialization: projection = identity, layer norms neutral,
        small uniform feed forward weights drawn from a generator seeded with `seed`, classifier zeros.
        Query and key projections of multi-head scoring are drawn from the same generator, after the feed forward block.
        """
        generator = torch.Generator().manual_seed(int(seed))
        if self.gat.projection is not None:
            self.gat.projection.copy_(torch.eye(self.dim, dtype=DTYPE))
        # end if
        self.temporal.reset_parameters(generator)
        self.gat.reset_heads(generator)
        self.classifier.reset_parameters()
        return self
    # end def

    def graph_for(self, bundle, video_index):
        return build_graph(bundle, video_index, relation_policy=self.relation_policy)
    # end def

    def forward(self, g):
        """
        :type g: tiograph.graph.knowledge_graph.KnowledgeGraph
        :rtype: VideoForward
        """
        features = as_tensor(g.features)
        report = None
        if self.use_gat:
            report = attention(g, self.gat)
            refined = node_update(g, report, self.gat, features)[:g.num_frames]
        else:
            refined = features[:g.num_frames]
        # end if
        if self.use_temporal:
            encoded = encode(refined, self.temporal)
            frame_features, z = encoded.frame_features, encoded.video_embedding
        else:
            frame_features, z = refined, refined.mean(dim=0)
        # end if
        probabilities = classify(z, self.classifier)
        return VideoForward(
            report=report, refined=refined, frame_features=frame_features,
            video_embedding=z, probabilities=probabilities,
        )
    # end def

    @torch.no_grad()
    def scores(self, g):
        """
        Frame level and video level anomaly scores of one graph.

        :return: `(frame_scores, video_score)`, N floats in frame order and one float.
        :rtype: (list of float, float)
        """
        out = self(g)
        frame_probabilities = classify(out.frame_features, self.classifier)
        frame_scores = anomaly_score(frame_probabilities, self.non_violence_index).tolist()
        return frame_scores, anomaly_score(out.probabilities, self.non_violence_index)
    # end def

    @torch.no_grad()
    def embed(self, g):
        """ The video embedding z as numpy array. """
        return self(g).video_embedding.numpy().copy()
    # end def

    def extra_repr(self):
        return "use_gat={g}, use_temporal={t}, relation_policy={p!r}, scoring={s}".format(
            g=self.use_gat, t=self.use_temporal, p=self.relation_policy, s=self.scoring.value,
        )
    # end def
# end class
