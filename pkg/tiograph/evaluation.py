# -*- coding: utf-8 -*-
"""
Putting model and metrics together: evaluation of a trained model, the stage and scoring ablation, and frame explanations.
"""
import csv
import json
from typing import NamedTuple

import numpy as np
from luckydonaldUtils.logger import logging

from .exceptions import DegenerateClasses, UnknownNode
from .graph.knowledge_graph import NodeId, frame_label, object_record
from .metrics import DetectionOutcome, MetricRow, average_precision, auc, rank_gallery, recall_at_k
from .model.attention import Scoring, attention
from .model.training import train

__author__ = 'luckydonald'
__all__ = [
    'RECALL_KS', 'holdout_split', 'keyword_gallery', 'evaluate', 'AblationRow', 'ABLATION_VARIANTS', 'ablate',
    'write_ablation_csv', 'read_ablation_csv', 'Explanation', 'explain_frame',
    'write_explanations_jsonl', 'read_explanations_jsonl',
]
logger = logging.getLogger(__name__)


RECALL_KS = (1, 5, 10)


def holdout_split(num_videos, holdout):
    """
    The last `holdout` videos are held out.

    :return: `(train_indices, held_out_indices)`
    """
    if not 0 <= holdout < num_videos:
        raise ValueError("holdout must be in [0, {n}), got {h}".format(n=num_videos, h=holdout))
    # end if
    split = num_videos - holdout
    return list(range(split)), list(range(split, num_videos))
# end def


def keyword_gallery(bundle):
    """ The class keywords as retrieval gallery: `[(keyword_id, embedding)]`. """
    return [(keyword.id, keyword.embedding) for keyword in bundle.keywords]
# end def


def _is_anomalous(bundle, label_index):
    return int(label_index != bundle.non_violence_index)
# end def


def evaluate(bundle, model, video_indices=None):
    """
    Video level AP and AUC, frame level AP (frames labelled by their video), and class keyword retrieval R@k
    averaged over the videos.

    :type bundle: tiograph.bundle.types.EmbeddingBundle
    :type model: tiograph.model.base.VideoModel
    :rtype: list of MetricRow
    """
    if video_indices is None:
        video_indices = list(range(len(bundle.videos)))
    # end if
    gallery = keyword_gallery(bundle)
    video_scores, video_truths = [], []
    frame_scores, frame_truths = [], []
    recalls = {k: [] for k in RECALL_KS}
    for v in video_indices:
        video = bundle.videos[v]
        g = model.graph_for(bundle, v)
        scores, score = model.scores(g)
        truth = _is_anomalous(bundle, video.label_index)
        video_scores.append(score)
        video_truths.append(truth)
        frame_scores.extend(scores)
        frame_truths.extend([truth] * len(scores))
        relevance = [int(keyword.source_label_index == video.label_index) for keyword in bundle.keywords]
        if sum(relevance) == 0:
            continue
        # end if
        ranking = rank_gallery(model.embed(g), gallery, relevance=relevance)
        for k in RECALL_KS:
            recalls[k].append(recall_at_k(ranking, min(k, len(gallery))))
        # end for
    # end for

    rows = []
    videos = DetectionOutcome(video_scores, video_truths)
    rows.append(MetricRow('AP', 'video', average_precision(videos)))
    try:
        rows.append(MetricRow('AUC', 'video', auc(videos)))
    except DegenerateClasses as e:
        logger.warning("no video level AUC: {}".format(e))
    # end try
    rows.append(MetricRow('AP', 'frame', average_precision(DetectionOutcome(frame_scores, frame_truths))))
    for k in RECALL_KS:
        if recalls[k]:
            rows.append(MetricRow('R@{}'.format(k), 'retrieval', float(np.mean(recalls[k]))))
        # end if
    # end for
    return rows
# end def


class AblationRow(NamedTuple):
    use_gat: bool
    use_temporal: bool
    attention: str  # neighbor scoring of the graph stage, "none" without it
    metrics: dict  # "AP/video" -> value
# end class


# (use_gat, use_temporal, scoring)
ABLATION_VARIANTS = (
    (True, True, Scoring.KERNEL),
    (True, False, Scoring.KERNEL),
    (False, True, None),
    (False, False, None),
    (True, True, Scoring.UNIFORM),
    (True, True, Scoring.MULTIHEAD),
)
NO_ATTENTION = 'none'


def ablate(bundle, cfg, train_indices, eval_indices):
    """
    Trains and evaluates the variants in :data:`ABLATION_VARIANTS`:
    all four combinations of the graph and temporal stages with distance kernel scoring,
    then the full pipeline with uniform neighbor weights, and with multi-head dot product scoring instead.

    :type cfg: tiograph.model.training.TrainConfig
    :rtype: list of AblationRow
    """
    rows = []
    for use_gat, use_temporal, scoring in ABLATION_VARIANTS:
        overrides = dict(use_gat=use_gat, use_temporal=use_temporal)
        if scoring is not None:
            overrides['attention'] = scoring.value
        # end if
        result = train(bundle, cfg.replace(**overrides), video_indices=train_indices)
        metrics = evaluate(bundle, result.model, eval_indices)
        rows.append(AblationRow(
            use_gat=use_gat, use_temporal=use_temporal, attention=NO_ATTENTION if scoring is None else scoring.value,
            metrics={"{}/{}".format(row.metric, row.name): row.value for row in metrics},
        ))
        logger.info("ablation gat={g} temporal={t} attention={a}: {m}".format(
            g=use_gat, t=use_temporal, a=rows[-1].attention, m=rows[-1].metrics,
        ))
    # end for
    return rows
# end def


ABLATION_COLUMNS = ('use_gat', 'use_temporal', 'attention')


def write_ablation_csv(rows, f):
    keys = []
    for row in rows:
        keys.extend(key for key in row.metrics if key not in keys)
    # end for
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(list(ABLATION_COLUMNS) + keys)
    for row in rows:
        writer.writerow([int(row.use_gat), int(row.use_temporal), row.attention] + [
            "{:.12g}".format(row.metrics[key]) if key in row.metrics else "" for key in keys
        ])
    # end for
# end def


def read_ablation_csv(f):
    rows = []
    for row in csv.DictReader(f):
        metrics = {key: float(value) for key, value in row.items() if key not in ABLATION_COLUMNS and value}
        rows.append(AblationRow(
            use_gat=row['use_gat'] == '1', use_temporal=row['use_temporal'] == '1', attention=row['attention'],
            metrics=metrics,
        ))
    # end for
    return rows
# end def


class Explanation(NamedTuple):
    head: str
    relation: str
    tail: str
    alpha: float
    bbox: tuple
# end class


def explain_frame(bundle, model, video_index, t, topk=5, report=None):
    """
    The triples incident to frame t, sorted by the attention the frame pays them, strongest first.

    :param topk: at most this many, clamped to the number of incident triples.
    :param report: an already computed attention report of this video's graph.
    :raises UnknownNode: the video has no frame t.
    :rtype: list of Explanation
    """
    g = model.graph_for(bundle, video_index)
    node = NodeId.frame(video_index, t)
    if node not in g.node_index:
        raise UnknownNode("video {id!r} has no frame t={t}".format(id=bundle.videos[video_index].id, t=t))
    # end if
    if report is None:
        report = attention(g, model.gat)
    # end if
    entries = report.for_node(node)
    if topk > len(entries):
        logger.debug("topk={k} clamped to the {n} incident triples".format(k=topk, n=len(entries)))
    # end if
    order = sorted(range(len(entries)), key=lambda k: -entries[k].alpha)
    explanations = []
    for k in order[:max(topk, 0)]:
        entry = entries[k]
        obj = object_record(bundle, entry.neighbor)
        explanations.append(Explanation(
            head=frame_label(bundle, node), relation=bundle.keywords[entry.relation_index].text,
            tail=obj.class_name, alpha=entry.alpha, bbox=tuple(float(x) for x in obj.bbox),
        ))
    # end for
    return explanations
# end def


def write_explanations_jsonl(explanations, f):
    for explanation in explanations:
        f.write(json.dumps({
            "head": explanation.head, "relation": explanation.relation, "tail": explanation.tail,
            "alpha": explanation.alpha, "bbox": list(explanation.bbox),
        }, ensure_ascii=False))
        f.write("\n")
    # end for
# end def


def read_explanations_jsonl(f):
    explanations = []
    for line in f:
        if not line.strip():
            continue
        # end if
        data = json.loads(line)
        explanations.append(Explanation(data["head"], data["relation"], data["tail"], data["alpha"], tuple(data["bbox"])))
    # end for
    return explanations
# end def
