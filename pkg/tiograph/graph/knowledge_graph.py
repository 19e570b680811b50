# -*- coding: utf-8 -*-
"""
The per-video multimodal knowledge graph.

Nodes are the frames (frame-level entities) and the objects detected in them (object-level entities).
Edges are triples `(frame, keyword k_j, object)`, stored directed from the frame to the object,
and only ever between a frame and its own objects.
"""
import json
from enum import Enum
from typing import NamedTuple, Optional, List, Tuple

import numpy as np
import torch
from luckydonaldUtils.logger import logging
from luckydonaldUtils.exceptions import assert_type_or_raise

from ..bundle.types import EmbeddingBundle
from ..exceptions import EmptyGraph, UnknownNode, MissingKeywords
from .policies import get_relation_policy

__author__ = 'luckydonald'
__all__ = [
    'NodeKind', 'NodeId', 'Triple', 'KnowledgeGraph', 'ExplainedTriple',
    'build_graph', 'adjacency_entry', 'export_triples', 'write_triples_jsonl', 'read_triples_jsonl',
    'frame_label', 'object_record',
]
logger = logging.getLogger(__name__)


class NodeKind(Enum):
    FRAME = 'frame'
    OBJECT = 'object'
# end class


class NodeId(NamedTuple):
    kind: NodeKind
    video_index: int
    t: int
    object_index: Optional[int] = None

    @classmethod
    def frame(cls, video_index, t):
        return cls(NodeKind.FRAME, video_index, t, None)
    # end def

    @classmethod
    def object(cls, video_index, t, object_index):
        return cls(NodeKind.OBJECT, video_index, t, object_index)
    # end def

    def __str__(self):
        if self.kind == NodeKind.FRAME:
            return "frame(v={v}, t={t})".format(v=self.video_index, t=self.t)
        # end if
        return "object(v={v}, t={t}, i={i})".format(v=self.video_index, t=self.t, i=self.object_index)
    # end def
# end class


class Triple(NamedTuple):
    head: NodeId
    relation_index: int
    tail: NodeId
# end class


class ExplainedTriple(NamedTuple):
    """ A triple with the ids replaced by what a human wants to read. """
    frame_label: str
    keyword_text: str
    object_class: str
    bbox: Tuple[float, float, float, float]
# end class


class KnowledgeGraph(object):
    """
    Immutable after construction, use :func:`build_graph` to get one.

    Node rows: the T frames first (in frame order), followed by the objects ordered by `(t, i)`.
    So `features[:num_frames]` are the frame features in frame order.
    """
    def __init__(self, video_index, nodes, features, triples, num_relations):
        """
        :param video_index: Index of the video in the bundle.
        :param nodes: All nodes, frames first.
        :type  nodes: tuple of NodeId
        :param features: |V|×d initial node features h_v.
        :type  features: numpy.ndarray
        :param triples: The triples, duplicates are dropped (set semantics, first occurrence wins the position).
        :type  triples: list of Triple
        :param num_relations: m, the number of keyword relation types.
        """
        self.video_index = video_index
        self.nodes = tuple(nodes)
        self.node_index = {node: row for row, node in enumerate(self.nodes)}
        if len(self.node_index) != len(self.nodes):
            raise ValueError("node ids must be unique")
        # end if
        self.features = np.array(features, dtype=np.float64)
        self.features.flags.writeable = False
        self.num_relations = num_relations
        self.num_frames = sum(1 for node in self.nodes if node.kind == NodeKind.FRAME)

        unique_triples = list(dict.fromkeys(triples))  # keeps the order
        if len(unique_triples) != len(triples):
            logger.debug("dropped {n} duplicate triples".format(n=len(triples) - len(unique_triples)))
        # end if
        self.triples = tuple(unique_triples)

        if self.triples:
            indices = torch.tensor([
                [self.node_index[triple.head], self.node_index[triple.tail], triple.relation_index]
                for triple in self.triples
            ], dtype=torch.long).t()
        else:
            indices = torch.zeros((3, 0), dtype=torch.long)
        # end if
        self.adjacency = torch.sparse_coo_tensor(
            indices, torch.ones(indices.shape[1], dtype=torch.bool),
            size=(len(self.nodes), len(self.nodes), max(num_relations, 1)),
        ).coalesce()
        self._set_entries = frozenset(tuple(entry) for entry in self.adjacency.indices().t().tolist())

        neighbor_index = {node: [] for node in self.nodes}
        for triple in self.triples:
            neighbor_index[triple.head].append((triple.tail, triple.relation_index))
            neighbor_index[triple.tail].append((triple.head, triple.relation_index))
        # end for
        self.neighbor_index = {node: tuple(neighbors) for node, neighbors in neighbor_index.items()}
        self._attention_edges = None
    # end def

    @property
    def num_nodes(self):
        return len(self.nodes)
    # end def

    @property
    def frame_nodes(self):
        return self.nodes[:self.num_frames]
    # end def

    def row(self, node):
        """
        :raises UnknownNode: the node is not part of this graph.
        :rtype: int
        """
        try:
            return self.node_index[node]
        except KeyError:
            raise UnknownNode("node {node} is not in the graph of video {v}".format(node=node, v=self.video_index))
        # end try
    # end def

    def has_entry(self, u, v, j):
        """ Looks up the adjacency tensor entry A_(u,v,j) by node rows. """
        return (u, v, j) in self._set_entries
    # end def

    def attention_edges(self):
        """
        The edges traversed by the attention, in both directions.
        One entry per incident triple, grouped by center node in node order,
        neighbors in the order of `neighbor_index`.

        :return: `(centers, neighbors, relations)`, three equally long int64 arrays of node rows / relation indices.
        :rtype: tuple of numpy.ndarray
        """
        if self._attention_edges is None:
            centers, neighbors, relations = [], [], []
            for row, node in enumerate(self.nodes):
                for neighbor, j in self.neighbor_index[node]:
                    centers.append(row)
                    neighbors.append(self.node_index[neighbor])
                    relations.append(j)
                # end for
            # end for
            self._attention_edges = tuple(np.array(values, dtype=np.int64) for values in (centers, neighbors, relations))
        # end if
        return self._attention_edges
    # end def

    def __repr__(self):
        return "<KnowledgeGraph video={v} nodes={n} triples={e} relations={m}>".format(
            v=self.video_index, n=self.num_nodes, e=len(self.triples), m=self.num_relations,
        )
    # end def
# end class


def build_graph(bundle, video_index, relation_policy='all'):
    """
    Builds the knowledge graph of one video.

    With the `"all"` policy the edge set is the union over frames t, objects i of frame t and keywords j
    of `(v_t^image, k_j, v_{t,i}^object)`; `"nearest"` keeps only the keyword nearest to each object.

    :param bundle: The bundle holding the video.
    :type  bundle: EmbeddingBundle

    :param video_index: Which video.
    :type  video_index: int

    :param relation_policy: `"all"`, `"nearest"` or a :class:`tiograph.graph.policies.RelationPolicy`.

    :raises UnknownNode: no such video.
    :raises EmptyGraph: the video has zero frames.
    :raises MissingKeywords: objects exist, but the bundle has no keywords to link them with.
    :rtype: KnowledgeGraph
    """
    assert_type_or_raise(bundle, EmbeddingBundle, parameter_name="bundle")
    assert_type_or_raise(video_index, int, parameter_name="video_index")
    policy = get_relation_policy(relation_policy)
    if not 0 <= video_index < len(bundle.videos):
        raise UnknownNode("bundle has no video #{i} ({n} videos)".format(i=video_index, n=len(bundle.videos)))
    # end if
    video = bundle.videos[video_index]
    if not video.frames:
        raise EmptyGraph("video {id!r} has zero frames".format(id=video.id))
    # end if
    keyword_matrix = bundle.keyword_matrix()
    has_objects = any(frame.objects for frame in video.frames)
    if has_objects and keyword_matrix.shape[0] == 0:
        raise MissingKeywords("video {id!r} has objects, but the bundle has no keywords".format(id=video.id))
    # end if

    nodes: List[NodeId] = []
    features = []
    for frame in video.frames:
        nodes.append(NodeId.frame(video_index, frame.t))
        features.append(frame.embedding)
    # end for
    triples: List[Triple] = []
    for frame in video.frames:
        head = NodeId.frame(video_index, frame.t)
        for i, obj in enumerate(frame.objects):
            tail = NodeId.object(video_index, frame.t, i)
            nodes.append(tail)
            features.append(obj.embedding)
            for j in policy.relations(np.asarray(obj.embedding), keyword_matrix):
                triples.append(Triple(head, j, tail))
            # end for
        # end for
    # end for
    graph = KnowledgeGraph(
        video_index=video_index, nodes=nodes, features=np.stack(features),
        triples=triples, num_relations=keyword_matrix.shape[0],
    )
    logger.debug("built {graph!r} with policy {policy!r}".format(graph=graph, policy=policy))
    return graph
# end def


def adjacency_entry(g, u, v, j):
    """
    `A_(u,v,j) = 1` if and only if the triple `(u, k_j, v)` exists. Storage is directed, so `(v, u, j)` is a different entry.

    :type g: KnowledgeGraph
    :type u: NodeId
    :type v: NodeId
    :type j: int

    :raises UnknownNode: u or v not in the graph, or j not a relation index.
    :rtype: bool
    """
    u_row, v_row = g.row(u), g.row(v)
    if not 0 <= j < g.num_relations:
        raise UnknownNode("relation index {j} outside of the {m} relations".format(j=j, m=g.num_relations))
    # end if
    return g.has_entry(u_row, v_row, j)
# end def


def frame_label(bundle, node):
    """ e.g. `"video-0001@t=3"` """
    return "{id}@t={t}".format(id=bundle.videos[node.video_index].id, t=node.t)
# end def


def object_record(bundle, node):
    """
    :return: The :class:`tiograph.bundle.types.ObjectEntity` behind an object node.
    """
    return bundle.videos[node.video_index].frame(node.t).objects[node.object_index]
# end def


def export_triples(g, bundle):
    """
    Human readable triples, in graph order.

    :type g: KnowledgeGraph
    :type bundle: EmbeddingBundle
    :rtype: list of ExplainedTriple
    """
    explained = []
    for triple in g.triples:
        obj = object_record(bundle, triple.tail)
        explained.append(ExplainedTriple(
            frame_label=frame_label(bundle, triple.head),
            keyword_text=bundle.keywords[triple.relation_index].text,
            object_class=obj.class_name,
            bbox=tuple(float(x) for x in obj.bbox),
        ))
    # end for
    return explained
# end def


def write_triples_jsonl(triples, f):
    """
    One JSON object per line: `{"head", "relation", "tail", "bbox"}`.

    :type triples: list of ExplainedTriple
    :param f: text file opened for writing.
    """
    for triple in triples:
        f.write(json.dumps({
            "head": triple.frame_label, "relation": triple.keyword_text,
            "tail": triple.object_class, "bbox": list(triple.bbox),
        }, ensure_ascii=False))
        f.write("\n")
    # end for
# end def


def read_triples_jsonl(f):
    """
    Reads what :func:`write_triples_jsonl` wrote.

    :rtype: list of ExplainedTriple
    """
    triples = []
    for line in f:
        if not line.strip():
            continue
        # end if
        data = json.loads(line)
        triples.append(ExplainedTriple(data["head"], data["relation"], data["tail"], tuple(data["bbox"])))
    # end for
    return triples
# end def
