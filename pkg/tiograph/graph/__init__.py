# -*- coding: utf-8 -*-
from .policies import RelationPolicy, AllRelations, NearestKeyword, get_relation_policy
from .knowledge_graph import (
    NodeKind, NodeId, Triple, KnowledgeGraph, ExplainedTriple, build_graph, adjacency_entry, export_triples,
)

__author__ = 'luckydonald'
