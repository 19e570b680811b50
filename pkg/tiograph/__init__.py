# -*- coding: utf-8 -*-
__author__ = 'luckydonald'

VERSION = "0.3.0"
__version__ = VERSION

from .bundle import (
    EmbeddingBundle, VideoRecord, FrameRecord, ObjectEntity, KeywordRelation,
    load_bundle, write_bundle, SyntheticSpec, generate_synthetic_bundle,
)
from .graph import build_graph, adjacency_entry, export_triples, KnowledgeGraph, NodeId, Triple
from .model import VideoModel, TrainConfig, train, read_checkpoint, write_checkpoint
