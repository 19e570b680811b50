# -*- coding: utf-8 -*-
from .types import EmbeddingBundle, VideoRecord, FrameRecord, ObjectEntity, KeywordRelation
from .io import load_bundle, write_bundle
from .synthetic import SyntheticSpec, generate_synthetic_bundle

__author__ = 'luckydonald'
