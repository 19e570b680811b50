# -*- coding: utf-8 -*-
"""
The in-memory embedding bundle: what the frozen image/text encoders, the keyword generator and the object
detector would have produced for a set of videos.

All vectors are read-only float64 numpy arrays. Records are immutable after construction and safe to share.
"""
from dataclasses import dataclass, fields
from typing import Tuple

import numpy as np
from luckydonaldUtils.logger import logging

from ..exceptions import MalformedManifest
from ..utilities import as_vector

__author__ = 'luckydonald'
__all__ = ['ObjectEntity', 'FrameRecord', 'VideoRecord', 'KeywordRelation', 'EmbeddingBundle']
logger = logging.getLogger(__name__)


class _ArrayFieldsEquality(object):
    """
    Dataclass equality which also works for numpy array fields.
    Arrays compare bit-exact (`np.array_equal`), everything else with `==`.
    """
    def __eq__(self, other):
        if other.__class__ is not self.__class__:
            return NotImplemented
        # end if
        for field in fields(self):
            mine, theirs = getattr(self, field.name), getattr(other, field.name)
            if isinstance(mine, np.ndarray) or isinstance(theirs, np.ndarray):
                if not np.array_equal(mine, theirs):
                    return False
                # end if
            elif mine != theirs:
                return False
            # end if
        # end for
        return True
    # end def

    __hash__ = None
# end class


@dataclass(frozen=True, eq=False)
class ObjectEntity(_ArrayFieldsEquality):
    """
    One detected object in a frame.

    :param class_name: The detector's class, e.g. `"knife"`.
    :param bbox: `[x1, y1, x2, y2]`, normalized to [0,1].
    :param embedding: The encoded textual description of that object class.
    """
    class_name: str
    bbox: np.ndarray
    embedding: np.ndarray

    def validate(self, dim, what="object"):
        if not isinstance(self.class_name, str):
            raise MalformedManifest("{what}: class_name must be a string".format(what=what))
        # end if
        bbox = as_vector(self.bbox, 4, what + " bbox")
        x1, y1, x2, y2 = bbox
        if not (0.0 <= x1 <= x2 <= 1.0 and 0.0 <= y1 <= y2 <= 1.0):
            raise MalformedManifest("{what}: bbox {bbox!r} must satisfy 0 <= x1 <= x2 <= 1 and 0 <= y1 <= y2 <= 1".format(
                what=what, bbox=bbox.tolist(),
            ))
        # end if
        as_vector(self.embedding, dim, what + " embedding")
    # end def
# end class


@dataclass(frozen=True, eq=False)
class FrameRecord(_ArrayFieldsEquality):
    t: int
    embedding: np.ndarray
    objects: Tuple[ObjectEntity, ...] = ()

    def validate(self, dim, what="frame"):
        as_vector(self.embedding, dim, what + " embedding")
        for i, obj in enumerate(self.objects):
            obj.validate(dim, what="{what} object {i}".format(what=what, i=i))
        # end for
    # end def
# end class


@dataclass(frozen=True, eq=False)
class VideoRecord(_ArrayFieldsEquality):
    """
    :param id: The video id.
    :param label_index: Index into `EmbeddingBundle.class_names`, the video-level (weak) label.
    :param frames: Frames, ordered by `t` = 1..T.
    """
    id: str
    label_index: int
    frames: Tuple[FrameRecord, ...]

    @property
    def num_frames(self):
        return len(self.frames)
    # end def

    def frame_matrix(self):
        """
        :return: T×d float64 matrix of the frame embeddings, in frame order.
        :rtype: numpy.ndarray
        """
        return np.stack([frame.embedding for frame in self.frames]) if self.frames else np.zeros((0, 0))
    # end def

    def frame(self, t):
        """
        :param t: 1-based frame index.
        :rtype: FrameRecord
        """
        if not 1 <= t <= len(self.frames):
            raise KeyError("video {id!r} has no frame t={t}".format(id=self.id, t=t))
        # end if
        return self.frames[t - 1]
    # end def
# end class


@dataclass(frozen=True, eq=False)
class KeywordRelation(_ArrayFieldsEquality):
    """
    A keyword relation type k_j, generated from the label `class_names[source_label_index]`.
    """
    id: str
    text: str
    embedding: np.ndarray
    source_label_index: int
# end class


@dataclass(frozen=True, eq=False)
class EmbeddingBundle(_ArrayFieldsEquality):
    """
    The precomputed multimodal embeddings of a set of videos.

    The label set is `class_names`, the non-violence class is always the last one.
    Call :meth:`validate` after constructing one by hand, :func:`tiograph.bundle.io.load_bundle` does it for you.
    """
    dim: int
    videos: Tuple[VideoRecord, ...]
    keywords: Tuple[KeywordRelation, ...]
    class_names: Tuple[str, ...]

    @property
    def num_classes(self):
        return len(self.class_names)
    # end def

    @property
    def non_violence_index(self):
        """ Index of the non-violence class. It's the last one. """
        return len(self.class_names) - 1
    # end def

    def keyword_matrix(self):
        """
        :return: m×d matrix of the keyword embeddings, in keyword order.
        :rtype: numpy.ndarray
        """
        if not self.keywords:
            return np.zeros((0, self.dim))
        # end if
        return np.stack([keyword.embedding for keyword in self.keywords])
    # end def

    def keywords_for_class(self, label_index):
        """
        :return: Indices of the keywords generated from the given class.
        :rtype: list of int
        """
        return [j for j, keyword in enumerate(self.keywords) if keyword.source_label_index == label_index]
    # end def

    def video_index(self, video_id):
        """
        :param video_id: The `VideoRecord.id` to look for.
        :raises KeyError: unknown id
        :rtype: int
        """
        for i, video in enumerate(self.videos):
            if video.id == video_id:
                return i
            # end if
        # end for
        raise KeyError("no video with id {!r}".format(video_id))
    # end def

    def validate(self):
        """
        Checks all the invariants, raising a typed error on the first violation.

        :raises MalformedManifest: labels, ids, frame order or bboxes are wrong.
        :raises DimensionMismatch: a vector has not exactly `dim` components.
        :raises NonFiniteValue: a vector contains NaN or infinity.
        :return: self, for chaining.
        """
        if not isinstance(self.dim, int) or isinstance(self.dim, bool) or self.dim < 1:
            raise MalformedManifest("dim must be a positive integer, got {!r}".format(self.dim))
        # end if
        if len(self.class_names) < 2:
            raise MalformedManifest("need at least 2 class names, got {!r}".format(list(self.class_names)))
        # end if
        if len(set(self.class_names)) != len(self.class_names):
            raise MalformedManifest("class names must be unique, got {!r}".format(list(self.class_names)))
        # end if
        seen_keyword_ids = set()
        for keyword in self.keywords:
            if keyword.id in seen_keyword_ids:
                raise MalformedManifest("duplicate keyword id {!r}".format(keyword.id))
            # end if
            seen_keyword_ids.add(keyword.id)
            self._check_label(keyword.source_label_index, "keyword {!r}".format(keyword.id))
            as_vector(keyword.embedding, self.dim, "keyword {!r} embedding".format(keyword.id))
        # end for
        for video in self.videos:
            what = "video {!r}".format(video.id)
            self._check_label(video.label_index, what)
            if not video.frames:
                raise MalformedManifest("{what} has no frames".format(what=what))
            # end if
            for expected_t, frame in enumerate(video.frames, start=1):
                if frame.t != expected_t:
                    raise MalformedManifest("{what}: frames must be consecutive from 1, found t={t} at position {pos}".format(
                        what=what, t=frame.t, pos=expected_t,
                    ))
                # end if
                frame.validate(self.dim, what="{what} frame {t}".format(what=what, t=frame.t))
            # end for
        # end for
        return self
    # end def

    def _check_label(self, label_index, what):
        if not isinstance(label_index, int) or isinstance(label_index, bool):
            raise MalformedManifest("{what}: label index must be an integer, got {value!r}".format(what=what, value=label_index))
        # end if
        if not 0 <= label_index < len(self.class_names):
            raise MalformedManifest("{what}: label index {value} outside of the {n} classes".format(
                what=what, value=label_index, n=len(self.class_names),
            ))
        # end if
    # end def
# end class
