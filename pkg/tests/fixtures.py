# -*- coding: utf-8 -*-
"""
Small hand made bundles shared by the tests.
"""
import numpy as np

from tiograph.bundle.types import EmbeddingBundle, VideoRecord, FrameRecord, ObjectEntity, KeywordRelation

__author__ = 'luckydonald'


def _frozen(values):
    array = np.asarray(values, dtype=np.float32).astype(np.float64)
    array.flags.writeable = False
    return array
# end def


def _object_values(rng, dim, positive):
    values = rng.standard_normal(dim)
    return np.abs(values) + 0.5 if positive else values
# end def


def tiny_bundle(
    seed=0, dim=4, num_videos=1, num_frames=4, objects_per_frame=2, num_keywords=5, num_classes=2,
    positive_objects=False,
):
    """
    Random float32 representable values, keywords spread round-robin over the classes,
    video labels round-robin as well.

    :param positive_objects: all object embedding components >= 0.5, so aggregating objects stays clear of the ReLU kink.
    """
    rng = np.random.default_rng(seed)
    class_names = tuple(["violence-{}".format(c) for c in range(num_classes - 1)] + ["non-violence"])
    keywords = tuple(
        KeywordRelation(
            id="kw-{}".format(j), text="keyword {}".format(j),
            embedding=_frozen(rng.standard_normal(dim)), source_label_index=j % num_classes,
        )
        for j in range(num_keywords)
    )
    videos = []
    for v in range(num_videos):
        frames = []
        for t in range(1, num_frames + 1):
            objects = tuple(
                ObjectEntity(
                    class_name="thing-{}".format(i), bbox=_frozen([0.1, 0.2, 0.5, 0.75]),
                    embedding=_frozen(_object_values(rng, dim, positive_objects)),
                )
                for i in range(objects_per_frame)
            )
            frames.append(FrameRecord(t=t, embedding=_frozen(rng.standard_normal(dim)), objects=objects))
        # end for
        videos.append(VideoRecord(id="clip-{}".format(v), label_index=v % num_classes, frames=tuple(frames)))
    # end for
    return EmbeddingBundle(dim=dim, videos=tuple(videos), keywords=keywords, class_names=class_names).validate()
# end def
