# -*- coding: utf-8 -*-
import torch
from torch import nn
from luckydonaldUtils.logger import logging

from ..utilities import DTYPE, as_tensor

__author__ = 'luckydonald'
__all__ = ['Classifier', 'classify', 'anomaly_score']
logger = logging.getLogger(__name__)


class Classifier(nn.Module):
    """
    Linear classifier head, `softmax(W·z + b)` over the C classes.
    Starts out all zeros, i.e. predicting the uniform distribution.
    """
    def __init__(self, dim, num_classes):
        super().__init__()
        if num_classes < 2:
            raise ValueError("need at least two classes, got {!r}".format(num_classes))
        # end if
        self.dim = dim
        self.num_classes = num_classes
        self.weight = nn.Parameter(torch.zeros((num_classes, dim), dtype=DTYPE))
        self.bias = nn.Parameter(torch.zeros(num_classes, dtype=DTYPE))
    # end def

    @torch.no_grad()
    def reset_parameters(self):
        self.weight.zero_()
        self.bias.zero_()
    # end def

    def forward(self, z):
        return classify(z, self)
    # end def

    def extra_repr(self):
        return "dim={d}, num_classes={c}".format(d=self.dim, c=self.num_classes)
    # end def
# end class


def classify(z, clf):
    """
    Class probabilities for a video embedding, or for every row of a matrix of embeddings.

    :param z: d reals, or N×d.
    :type  clf: Classifier
    :return: C probabilities (or N×C), strictly positive, summing to 1.
    :rtype: torch.Tensor
    """
    z = as_tensor(z)
    return torch.softmax(z @ clf.weight.t() + clf.bias, dim=-1)
# end def


def anomaly_score(probs, non_violence_index=-1):
    """
    `1 − p(non-violence)`, for a single probability vector or row wise.

    :param probs: C probabilities, or N×C.
    :param non_violence_index: Position of the non-violence class, the last one by default.
    :return: The score in [0, 1], a float for a vector input, a tensor of N scores for a matrix input.
    """
    probs = as_tensor(probs)
    scores = (1.0 - probs[..., non_violence_index]).clamp(0.0, 1.0)
    if scores.ndim == 0:
        return float(scores)
    # end if
    return scores
# end def
