# -*- coding: utf-8 -*-
"""
The three training objectives and their weighted sum:

- classification: negative log likelihood of the video label,
- retrieval: hinge on the distance gap between video embedding and class keyword embeddings,
- graph regularization: pulls attention onto supervised edges and away from unsupervised pairs.
"""
from dataclasses import dataclass, asdict
from typing import Tuple, List

import torch
from torch.nn import functional as F
from luckydonaldUtils.logger import logging

from ..exceptions import EmptyBatch, InvalidSupervision
from ..graph.knowledge_graph import NodeKind
from ..utilities import DTYPE, as_tensor

__author__ = 'luckydonald'
__all__ = [
    'EdgeSupervision', 'LossReport',
    'cls_loss', 'ret_loss', 'gat_reg_loss', 'total_loss',
]
logger = logging.getLogger(__name__)


PROBABILITY_CLAMP = 1e-12


@dataclass(frozen=True)
class EdgeSupervision(object):
    """
    Node pairs the attention should (positives) or should not (negatives) connect.
    Pairs are `(center, neighbor)` node ids, the attention mass is read from the center's neighborhood.
    """
    positives: Tuple[tuple, ...] = ()
    negatives: Tuple[tuple, ...] = ()

    @classmethod
    def from_graph(cls, g, rng):
        """
        Positives are all frame–object pairs linked by a triple.
        Negatives are an equally sized uniform sample of frame–object pairs from different frames,
        which by construction are never linked.

        :type g: tiograph.graph.knowledge_graph.KnowledgeGraph
        :type rng: numpy.random.Generator
        :rtype: EdgeSupervision
        """
        positives = list(dict.fromkeys((triple.head, triple.tail) for triple in g.triples))
        frames = [node for node in g.nodes if node.kind == NodeKind.FRAME]
        objects = [node for node in g.nodes if node.kind == NodeKind.OBJECT]
        candidates = [(frame, obj) for frame in frames for obj in objects if obj.t != frame.t]
        if len(candidates) <= len(positives):
            negatives = candidates
        else:
            picked = rng.choice(len(candidates), size=len(positives), replace=False)
            negatives = [candidates[k] for k in sorted(picked.tolist())]
        # end if
        return cls(positives=tuple(positives), negatives=tuple(negatives))
    # end def

    def validate(self, g):
        """
        :raises InvalidSupervision: overlapping sets, or pairs with nodes not in the graph.
        """
        overlap = set(self.positives) & set(self.negatives)
        if overlap:
            raise InvalidSupervision("{n} pairs are both positive and negative".format(n=len(overlap)))
        # end if
        for u, v in self.positives + self.negatives:
            if u not in g.node_index or v not in g.node_index:
                raise InvalidSupervision("pair ({u}, {v}) is not part of the graph".format(u=u, v=v))
            # end if
        # end for
        return self
    # end def
# end class


@dataclass
class LossReport(object):
    l_cls: float = 0.0
    l_ret: float = 0.0
    l_gat: float = 0.0
    l_total: float = 0.0
    skipped_negatives: int = 0

    def as_dict(self):
        return asdict(self)
    # end def
# end class


def cls_loss(batch):
    """
    `−(1/N) Σ_i log p_(i, y_i)`, with p clamped at 1e-12.

    :param batch: `(probabilities, label_index)` pairs.
    :type  batch: list of (torch.Tensor, int)
    :raises EmptyBatch: no samples.
    :rtype: torch.Tensor
    """
    if len(batch) == 0:
        raise EmptyBatch("classification loss of an empty batch")
    # end if
    probabilities = torch.stack([as_tensor(probs) for probs, _ in batch])
    labels = torch.tensor([int(label) for _, label in batch], dtype=torch.long)
    return F.nll_loss(torch.log(probabilities.clamp(min=PROBABILITY_CLAMP)), labels, reduction='mean')
# end def


def ret_loss(pairs, margin):
    """
    `Σ max(0, α + D(q, t⁺) − D(q, t⁻))` with D the Euclidean norm.

    :param pairs: `(q, t_pos, t_neg)` triplets of d reals each.
    :param margin: α ≥ 0
    :rtype: torch.Tensor
    """
    if len(pairs) == 0:
        return torch.zeros((), dtype=DTYPE)
    # end if
    queries = torch.stack([as_tensor(q) for q, _, _ in pairs])
    positives = torch.stack([as_tensor(t) for _, t, _ in pairs])
    negatives = torch.stack([as_tensor(t) for _, _, t in pairs])
    hinge = margin + torch.linalg.norm(queries - positives, dim=1) - torch.linalg.norm(queries - negatives, dim=1)
    return torch.clamp(hinge, min=0).sum()
# end def


def gat_reg_loss(report, sup, lambda_gat, return_skipped=False):
    """
    `λ Σ_(E⁺) −log α + λ Σ_(E⁻) −log(1 − α)`, α clamped to `[1e-12, 1 − 1e-12]`.

    α of a pair is the attention mass the first node assigns to the second, summed over their relations.
    Negatives never scored by the attention have no α and are skipped.

    :type report: tiograph.model.attention.AttentionReport
    :type sup: EdgeSupervision
    :param return_skipped: Also return the number of skipped negatives.
    :raises InvalidSupervision: a positive pair was never scored.
    :rtype: torch.Tensor | (torch.Tensor, int)
    """
    row = {node: index for index, node in enumerate(report.nodes)}

    def pair_masses(pairs, required):
        """ α per scored pair, summed over its edges in a single gather. """
        edges: List[int] = []
        pair_ids: List[int] = []
        unscored = 0
        for u, v in pairs:
            positions = report.pair_edges(row[u], row[v]) if u in row and v in row else []
            if not positions:
                if required:
                    raise InvalidSupervision("positive pair ({u}, {v}) is not an edge of the graph".format(u=u, v=v))
                # end if
                unscored += 1
                continue
            # end if
            next_id = (pair_ids[-1] + 1) if pair_ids else 0
            edges.extend(positions)
            pair_ids.extend([next_id] * len(positions))
        # end for
        if not edges:
            return torch.zeros(0, dtype=DTYPE), unscored
        # end if
        ids = torch.tensor(pair_ids, dtype=torch.long)
        masses = torch.zeros(pair_ids[-1] + 1, dtype=DTYPE).index_add(
            0, ids, report.alpha_tensor[torch.tensor(edges, dtype=torch.long)],
        )
        return masses.clamp(PROBABILITY_CLAMP, 1 - PROBABILITY_CLAMP), unscored
    # end def

    positive_alphas, _ = pair_masses(sup.positives, required=True)
    negative_alphas, skipped = pair_masses(sup.negatives, required=False)
    if skipped:
        logger.debug("skipped {n} of {total} negative pairs without attention".format(
            n=skipped, total=len(sup.negatives),
        ))
    # end if
    loss = lambda_gat * ((-torch.log(positive_alphas)).sum() + (-torch.log(1 - negative_alphas)).sum())
    if return_skipped:
        return loss, skipped
    # end if
    return loss
# end def


def total_loss(l_cls, l_ret, l_gat, cfg):
    """
    `w_cls·l_cls + w_ret·l_ret + w_gat·l_gat`

    :param cfg: anything with `w_cls`, `w_ret` and `w_gat`, usually a :class:`tiograph.model.training.TrainConfig`.
    """
    return cfg.w_cls * l_cls + cfg.w_ret * l_ret + cfg.w_gat * l_gat
# end def
