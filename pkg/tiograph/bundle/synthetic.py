# -*- coding: utf-8 -*-
"""
Synthetic bundles standing in for real encoder outputs.

Per class there is a centroid; frame, object and keyword embeddings are isotropic Gaussian clouds around the
centroid of their class. Centroids are pairwise at least `class_separation` apart.
"""
from dataclasses import dataclass

import numpy as np
from luckydonaldUtils.logger import logging

from ..exceptions import InvalidSpec
from .types import EmbeddingBundle, VideoRecord, FrameRecord, ObjectEntity, KeywordRelation

__author__ = 'luckydonald'
__all__ = ['SyntheticSpec', 'generate_synthetic_bundle', 'class_centroids']
logger = logging.getLogger(__name__)

NON_VIOLENCE_CLASS_NAME = "non-violence"


@dataclass(frozen=True)
class SyntheticSpec(object):
    """
    :param num_videos: Videos to generate. Labels go round-robin over the classes.
    :param frames_per_video: T for every video.
    :param dim: Embedding dimensionality d.
    :param num_classes: Size of the label set, including the non-violence class (which is the last one).
    :param class_separation: Minimal pairwise distance of the class centroids.
    :param objects_per_frame: Detected objects per frame.
    :param noise_scale: Standard deviation of the frame and object clouds.
    :param keyword_noise: Standard deviation of the keyword clouds.
    :param keywords_per_class: Keyword relations generated from every class.
    """
    num_videos: int = 8
    frames_per_video: int = 16
    dim: int = 16
    num_classes: int = 2
    class_separation: float = 6.0
    objects_per_frame: int = 2
    noise_scale: float = 1.0
    keyword_noise: float = 0.1
    keywords_per_class: int = 1

    def validate(self):
        for name in ("num_videos", "frames_per_video", "dim", "objects_per_frame", "keywords_per_class"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise InvalidSpec("{name} must be a positive integer, got {value!r}".format(name=name, value=value))
            # end if
        # end for
        if not isinstance(self.num_classes, int) or self.num_classes < 2:
            raise InvalidSpec("num_classes must be at least 2 (one of them is non-violence), got {!r}".format(self.num_classes))
        # end if
        if not self.class_separation >= 0:
            raise InvalidSpec("class_separation must be >= 0, got {!r}".format(self.class_separation))
        # end if
        if not (self.noise_scale >= 0 and self.keyword_noise >= 0):
            raise InvalidSpec("noise scales must be >= 0")
        # end if
        return self
    # end def
# end class


def class_centroids(rng, num_classes, dim, class_separation):
    """
    Draws `num_classes` centroids in R^dim whose pairwise distances are all >= `class_separation`.
    Directions are centered (zero component mean) so a later layer norm doesn't wipe them out.
    With `class_separation == 0` all centroids are the origin.

    :type rng: numpy.random.Generator
    :rtype: numpy.ndarray
    """
    directions = rng.standard_normal((num_classes, dim))
    if class_separation == 0:
        return np.zeros((num_classes, dim))
    # end if
    if dim == 1:
        # a line has only two directions, so space them out evenly instead
        return ((np.arange(num_classes) - (num_classes - 1) / 2.0) * class_separation).reshape(num_classes, 1)
    # end if
    directions -= directions.mean(axis=1, keepdims=True)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    centroids = directions * class_separation
    differences = centroids[:, None, :] - centroids[None, :, :]
    distances = np.linalg.norm(differences, axis=-1)[np.triu_indices(num_classes, k=1)]
    closest = distances.min()
    if 0 < closest < class_separation:
        centroids *= class_separation / closest
    # end if
    return centroids
# end def


def _f32(array):
    """ Rounds to float32 precision, so the bundle survives a write/load round trip bit-exactly. """
    rounded = np.asarray(array, dtype=np.float32).astype(np.float64)
    rounded.flags.writeable = False
    return rounded
# end def


def generate_synthetic_bundle(seed, spec):
    """
    Deterministic synthetic bundle: a pure function of `(seed, spec)`.

    :param seed: Seed for `numpy.random.default_rng`.
    :type  seed: int

    :param spec: What to generate.
    :type  spec: SyntheticSpec

    :raises InvalidSpec: zero counts or negative separation.
    :rtype: EmbeddingBundle
    """
    spec.validate()
    rng = np.random.default_rng(seed)
    centroids = class_centroids(rng, spec.num_classes, spec.dim, spec.class_separation)
    class_names = tuple(
        ["violence-{}".format(c) for c in range(spec.num_classes - 1)] + [NON_VIOLENCE_CLASS_NAME]
    )
    logger.debug("centroids for seed={seed}: min pairwise distance {d}".format(
        seed=seed, d=_min_pairwise_distance(centroids),
    ))

    keywords = []
    for c, class_name in enumerate(class_names):
        for k in range(spec.keywords_per_class):
            keywords.append(KeywordRelation(
                id="kw-{c}-{k}".format(c=c, k=k),
                text="{name} keyword {k}".format(name=class_name, k=k),
                embedding=_f32(centroids[c] + spec.keyword_noise * rng.standard_normal(spec.dim)),
                source_label_index=c,
            ))
        # end for
    # end for

    videos = []
    for v in range(spec.num_videos):
        label = v % spec.num_classes
        frames = []
        for t in range(1, spec.frames_per_video + 1):
            frame_embedding = _f32(centroids[label] + spec.noise_scale * rng.standard_normal(spec.dim))
            objects = []
            for i in range(spec.objects_per_frame):
                corners = np.sort(rng.uniform(0.0, 1.0, size=(2, 2)), axis=0)  # rows: (x1, y1), (x2, y2)
                objects.append(ObjectEntity(
                    class_name="{name}-object-{i}".format(name=class_names[label], i=i),
                    bbox=_f32([corners[0, 0], corners[0, 1], corners[1, 0], corners[1, 1]]),
                    embedding=_f32(centroids[label] + spec.noise_scale * rng.standard_normal(spec.dim)),
                ))
            # end for
            frames.append(FrameRecord(t=t, embedding=frame_embedding, objects=tuple(objects)))
        # end for
        videos.append(VideoRecord(id="video-{:04d}".format(v), label_index=label, frames=tuple(frames)))
    # end for
    bundle = EmbeddingBundle(dim=spec.dim, videos=tuple(videos), keywords=tuple(keywords), class_names=class_names)
    return bundle.validate()
# end def


def _min_pairwise_distance(points):
    if len(points) < 2:
        return float("inf")
    # end if
    distances = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    return float(distances[np.triu_indices(len(points), k=1)].min())
# end def
