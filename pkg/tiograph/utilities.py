# -*- coding: utf-8 -*-
import os
from functools import wraps

import numpy as np
import torch
from luckydonaldUtils.logger import logging

from .exceptions import DimensionMismatch, NonFiniteValue, NonFiniteGradient

__author__ = 'luckydonald'
logger = logging.getLogger(__name__)

SEED_ENVIRONMENT_VARIABLE = 'TIO_SEED'
DEFAULT_SEED = 0
DTYPE = torch.float64


def resolve_seed(seed=None):
    """
    Returns the seed to use.
    If `seed` is None (default), the seed comes from the TIO_SEED environment variable, or 0 if that isn't set.

    :param seed: An explicit seed, wins over everything else.
    :type  seed: int | None

    :return: the seed
    :rtype: int
    """
    if seed is not None:
        return int(seed)
    # end if
    env_seed = os.getenv(SEED_ENVIRONMENT_VARIABLE, None)
    if env_seed is None or env_seed.strip() == "":
        logger.debug("{env} not set, using seed {seed}.".format(env=SEED_ENVIRONMENT_VARIABLE, seed=DEFAULT_SEED))
        return DEFAULT_SEED
    # end if
    try:
        return int(env_seed)
    except ValueError:
        raise ValueError("{env} must be an integer, got {value!r}".format(env=SEED_ENVIRONMENT_VARIABLE, value=env_seed))
    # end try
# end def


def as_vector(values, dim=None, what="vector"):
    """
    Converts anything array-like into a read-only 1d float64 numpy array and checks it.

    :param values: list, tuple, numpy array or tensor.
    :param dim: If given, the required number of components.
    :type  dim: int | None
    :param what: Human readable name used in error messages, e.g. `"frame 3 of video 'abc'"`.

    :raises DimensionMismatch: wrong number of components (or not 1d).
    :raises NonFiniteValue: NaN or infinity found.

    :rtype: numpy.ndarray
    """
    if isinstance(values, torch.Tensor):
        values = values.detach().cpu().numpy()
    # end if
    array = np.array(values, dtype=np.float64)
    if array.ndim != 1:
        raise DimensionMismatch("{what} must be one dimensional, got shape {shape}".format(what=what, shape=array.shape))
    # end if
    if dim is not None and array.shape[0] != dim:
        raise DimensionMismatch("{what} has {n} components, expected dim={dim}".format(what=what, n=array.shape[0], dim=dim))
    # end if
    if not np.all(np.isfinite(array)):
        raise NonFiniteValue("{what} contains non-finite values".format(what=what))
    # end if
    array.flags.writeable = False
    return array
# end def


def as_tensor(values):
    """
    float64 tensor view of the given values. Tensors are only converted if the dtype differs.

    :rtype: torch.Tensor
    """
    if isinstance(values, torch.Tensor):
        return values if values.dtype == DTYPE else values.to(DTYPE)
    # end if
    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=DTYPE)
# end def


def raise_on_non_finite(func):
    """
    Wraps a function returning a `(gradients, report)` tuple,
    raising a `NonFiniteGradient` if any gradient tensor contains NaN or infinity.

    The gradients must be a dict of `{parameter_name: tensor}`.
    """
    @wraps(func)
    def raise_on_non_finite_inner(*args, **kwargs):
        gradients, report = func(*args, **kwargs)
        if not np.isfinite(report.l_total):
            raise NonFiniteGradient("total loss is not finite: {!r}".format(report.l_total))
        # end if
        for name, gradient in gradients.items():
            if not bool(torch.isfinite(gradient).all()):
                raise NonFiniteGradient("gradient of {name!r} is not finite".format(name=name), parameter_name=name)
            # end if
        # end for
        return gradients, report
    # end def
    return raise_on_non_finite_inner
# end def
