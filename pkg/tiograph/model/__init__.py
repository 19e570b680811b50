# -*- coding: utf-8 -*-
from .attention import (
    GatLayer, AttentionReport, MultiHeadBaseline, Activation,
    pairwise_distance, normalize_distances, kernel_weights, attention, node_update, refine_frames,
    multihead_baseline_attention,
)
from .temporal import (
    TemporalEncoder, TemporalMatrices, build_temporal_adjacency, fuse, layer_norm, ffn_residual, encode,
)
from .heads import Classifier, classify, anomaly_score
from .losses import EdgeSupervision, LossReport, cls_loss, ret_loss, gat_reg_loss, total_loss
from .base import VideoModel
from .training import TrainConfig, TrainResult, compute_gradients, adam_step, train
from .checkpoint import write_checkpoint, read_checkpoint

__author__ = 'luckydonald'
