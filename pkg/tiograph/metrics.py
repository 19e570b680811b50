# -*- coding: utf-8 -*-
"""
Detection and retrieval metrics.

Detection works on per-segment scores in [0, 1] with binary ground truth: confusion counts at a threshold,
average precision as a sum over a threshold grid, and the area under the ROC curve.
Retrieval ranks a gallery by negative Euclidean distance and reports recall@k.
"""
import csv
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from sklearn import metrics as sk_metrics
from luckydonaldUtils.logger import logging

from .exceptions import MetricError, EmptyGrid, IncompleteGrid, DegenerateClasses, NoRelevantItems

__author__ = 'luckydonald'
__all__ = [
    'DetectionOutcome', 'ConfusionCounts', 'RetrievalRanking', 'MetricRow',
    'confusion_counts', 'precision_recall', 'threshold_grid', 'average_precision', 'auc',
    'rank_gallery', 'recall_at_k', 'write_metrics_csv', 'read_metrics_csv',
]
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DetectionOutcome(object):
    scores: np.ndarray
    truths: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        truths = np.asarray(self.truths).reshape(-1)
        if scores.shape[0] == 0 or scores.shape != truths.shape:
            raise MetricError("need equally many (>= 1) scores and truths, got {s} and {t}".format(
                s=scores.shape[0], t=truths.shape[0],
            ))
        # end if
        if not np.all((scores >= 0) & (scores <= 1)):
            raise MetricError("scores must be in [0, 1]")
        # end if
        if not np.all((truths == 0) | (truths == 1)):
            raise MetricError("truths must be 0 or 1")
        # end if
        object.__setattr__(self, 'scores', scores)
        object.__setattr__(self, 'truths', truths.astype(np.int64))
    # end def

    @property
    def num_positives(self):
        return int(self.truths.sum())
    # end def
# end class


class ConfusionCounts(NamedTuple):
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self):
        return self.tp + self.tn + self.fp + self.fn
    # end def
# end class


def confusion_counts(outcome, theta):
    """
    Segment l counts as predicted positive if `score_l ≥ θ`.

    :type outcome: DetectionOutcome
    :param theta: θ in [0, 1]
    :rtype: ConfusionCounts
    """
    predicted = outcome.scores >= theta
    actual = outcome.truths == 1
    return ConfusionCounts(
        tp=int(np.sum(predicted & actual)),
        tn=int(np.sum(~predicted & ~actual)),
        fp=int(np.sum(predicted & ~actual)),
        fn=int(np.sum(~predicted & actual)),
    )
# end def


def precision_recall(outcome, theta):
    """
    Precision is 1 when nothing is predicted positive, recall is 0 when there are no positives.

    :return: `(precision, recall)`
    """
    counts = confusion_counts(outcome, theta)
    predicted = counts.tp + counts.fp
    positives = counts.tp + counts.fn
    precision = counts.tp / predicted if predicted else 1.0
    recall = counts.tp / positives if positives else 0.0
    return precision, recall
# end def


def threshold_grid(scores):
    """ Unique scores together with 0 and 1, descending. """
    return np.unique(np.concatenate([np.asarray(scores, dtype=np.float64).reshape(-1), [0.0, 1.0]]))[::-1]
# end def


def average_precision(outcome, thresholds=None):
    """
    `Σ_j (R(θ_(j+1)) − R(θ_j)) · P(θ_(j+1))` over the thresholds in descending order.

    The sum starts from the state above every threshold (nothing predicted, recall 0, precision 1),
    so recall already reached at the first threshold is counted as well.

    :type outcome: DetectionOutcome
    :param thresholds: The grid, defaults to :func:`threshold_grid` of the scores. Sorted descending before use.
    :raises EmptyGrid: empty threshold grid.
    :raises IncompleteGrid: a given grid lacks 0 or 1.
    :rtype: float
    """
    grid = threshold_grid(outcome.scores) if thresholds is None else np.sort(np.asarray(thresholds, dtype=np.float64))[::-1]
    if grid.shape[0] == 0:
        raise EmptyGrid("average precision needs at least one threshold")
    # end if
    if thresholds is not None and not (np.any(grid == 0.0) and np.any(grid == 1.0)):
        raise IncompleteGrid("the threshold grid must contain 0 and 1, got {grid!r}".format(grid=grid.tolist()))
    # end if
    total = 0.0
    previous_recall = 0.0
    for theta in grid:
        precision, recall = precision_recall(outcome, theta)
        total += (recall - previous_recall) * precision
        previous_recall = recall
    # end for
    return float(total)
# end def


def auc(outcome):
    """
    Area under the ROC curve (true positive rate over false positive rate), trapezoid over all thresholds.
    Tied scores count half, same as the Mann–Whitney statistic.

    :type outcome: DetectionOutcome
    :raises DegenerateClasses: only positives or only negatives.
    :rtype: float
    """
    positives = outcome.num_positives
    if positives == 0 or positives == outcome.truths.shape[0]:
        raise DegenerateClasses("AUC needs both classes, got {p} positives of {n}".format(
            p=positives, n=outcome.truths.shape[0],
        ))
    # end if
    fpr, tpr, _ = sk_metrics.roc_curve(outcome.truths, outcome.scores, pos_label=1, drop_intermediate=False)
    return float(sk_metrics.auc(fpr, tpr))
# end def


@dataclass(frozen=True)
class RetrievalRanking(object):
    """
    `ranking[r]` is the gallery index at rank r + 1, similarities descending, ties in gallery order.
    """
    ids: tuple
    similarities: np.ndarray
    relevance: Optional[np.ndarray]
    ranking: np.ndarray

    def ranked_ids(self):
        return [self.ids[i] for i in self.ranking]
    # end def
# end class


def rank_gallery(query, gallery, relevance=None):
    """
    Ranks gallery items by `s = −‖z − q‖₂`, descending.

    :param query: d reals.
    :param gallery: `(id, embedding)` pairs.
    :type  gallery: list of (str, numpy.ndarray)
    :param relevance: optional 0/1 per gallery item.
    :rtype: RetrievalRanking
    """
    if len(gallery) == 0:
        raise MetricError("can't rank an empty gallery")
    # end if
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    embeddings = np.stack([np.asarray(embedding, dtype=np.float64).reshape(-1) for _, embedding in gallery])
    if embeddings.shape[1] != q.shape[0]:
        raise MetricError("gallery has d={g}, query has d={q}".format(g=embeddings.shape[1], q=q.shape[0]))
    # end if
    similarities = -np.linalg.norm(embeddings - q[None, :], axis=1)
    ranking = np.argsort(-similarities, kind='stable')
    if relevance is not None:
        relevance = np.asarray(relevance, dtype=np.int64).reshape(-1)
        if relevance.shape[0] != len(gallery):
            raise MetricError("relevance has {r} entries for {g} gallery items".format(r=relevance.shape[0], g=len(gallery)))
        # end if
    # end if
    return RetrievalRanking(
        ids=tuple(item_id for item_id, _ in gallery), similarities=similarities,
        relevance=relevance, ranking=ranking,
    )
# end def


def recall_at_k(ranking, k, relevance=None):
    """
    Relevant items in the top k divided by all relevant items.

    :type ranking: RetrievalRanking
    :param k: ≥ 1, values above the gallery size are clamped to it.
    :param relevance: overrides `ranking.relevance`.
    :raises NoRelevantItems: nothing in the gallery is relevant.
    :rtype: float
    """
    relevance = ranking.relevance if relevance is None else np.asarray(relevance, dtype=np.int64).reshape(-1)
    if relevance is None:
        raise MetricError("recall@k needs relevance labels")
    # end if
    if k < 1:
        raise MetricError("k must be >= 1, got {!r}".format(k))
    # end if
    size = ranking.ranking.shape[0]
    if k > size:
        logger.warning("k={k} exceeds the gallery size {n}, using k={n}".format(k=k, n=size))
        k = size
    # end if
    relevant = int(relevance.sum())
    if relevant == 0:
        raise NoRelevantItems("no relevant item in the gallery")
    # end if
    return float(relevance[ranking.ranking[:k]].sum()) / relevant
# end def


class MetricRow(NamedTuple):
    metric: str
    name: str
    value: float
# end class


def write_metrics_csv(rows, f):
    """
    `metric,name,value` rows, values with 12 significant digits.

    :type rows: list of MetricRow
    """
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(MetricRow._fields)
    for row in rows:
        writer.writerow([row.metric, row.name, "{:.12g}".format(row.value)])
    # end for
# end def


def read_metrics_csv(f):
    """ :rtype: list of MetricRow """
    return [MetricRow(row['metric'], row['name'], float(row['value'])) for row in csv.DictReader(f)]
# end def
