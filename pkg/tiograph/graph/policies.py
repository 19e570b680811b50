#!/usr/bin/env python3
# -*- coding: utf-8 -*-
from abc import abstractmethod
from typing import List, Union, Type, Dict

import numpy as np
from luckydonaldUtils.logger import logging

__author__ = 'luckydonald'
__all__ = ['RelationPolicy', 'AllRelations', 'NearestKeyword', 'RELATION_POLICIES', 'get_relation_policy']

logger = logging.getLogger(__name__)
if __name__ == '__main__':
    logging.add_colored_handler(level=logging.DEBUG)
# end if


class RelationPolicy(object):
    """
    Decides which keyword relations link a frame to one of its own objects.
    """
    TYPE: str

    @abstractmethod
    def relations(self, object_embedding: np.ndarray, keyword_matrix: np.ndarray) -> List[int]:
        """
        :param object_embedding: d reals, the object's embedding.
        :param keyword_matrix: m×d, all keyword embeddings.
        :return: the keyword indices j to create a triple `(frame, k_j, object)` for.
        """
        raise NotImplementedError()
    # end def

    def __repr__(self):
        return "{clazz}()".format(clazz=self.__class__.__name__)
    # end def
# end class


class AllRelations(RelationPolicy):
    """
    Every frame–object pair is linked under every keyword.
    This is the plain union over all frames, objects and keywords, giving `Σ_t n_t · m` triples.

    Note: with this policy the attention can't tell relations apart,
    as the edge weight only depends on the two endpoint features.
    """
    TYPE = 'all'

    def relations(self, object_embedding: np.ndarray, keyword_matrix: np.ndarray) -> List[int]:
        return list(range(keyword_matrix.shape[0]))
    # end def
# end class


class NearestKeyword(RelationPolicy):
    """
    Every frame–object pair is linked only under the keyword nearest (Euclidean) to the object embedding.
    Ties go to the lower keyword index.
    """
    TYPE = 'nearest'

    def relations(self, object_embedding: np.ndarray, keyword_matrix: np.ndarray) -> List[int]:
        if keyword_matrix.shape[0] == 0:
            return []
        # end if
        distances = np.linalg.norm(keyword_matrix - object_embedding[None, :], axis=1)
        return [int(np.argmin(distances))]
    # end def
# end class


RELATION_POLICIES: Dict[str, Type[RelationPolicy]] = {
    AllRelations.TYPE: AllRelations,
    NearestKeyword.TYPE: NearestKeyword,
}


def get_relation_policy(policy: Union[str, RelationPolicy, None]) -> RelationPolicy:
    """
    :param policy: A policy instance, or its `TYPE` string (`"all"`, `"nearest"`). `None` means `"all"`.
    :raises ValueError: unknown policy name.
    """
    if policy is None:
        return AllRelations()
    # end if
    if isinstance(policy, RelationPolicy):
        return policy
    # end if
    try:
        return RELATION_POLICIES[policy]()
    except KeyError:
        raise ValueError('Relation policy {policy!r} unknown, use one of {known!r}.'.format(
            policy=policy, known=sorted(RELATION_POLICIES),
        ))
    # end try
# end def
