# -*- coding: utf-8 -*-
"""
Reading and writing embedding bundles.

A bundle is a directory containing

- `manifest.json`: `{"dim", "class_names", "keywords": [{"id", "text", "source_label_index", "offset"}],
  "videos": [{"id", "label_index", "frames": [{"t", "offset", "objects": [{"class_name", "bbox", "offset"}]}]}]}`
- `embeddings.f32`: raw little-endian float32 values. Every `offset` is an element index (not a byte index),
  a vector occupies `dim` consecutive elements.

Everything is converted to float64 after loading.
"""
import os
import json

import numpy as np
from DictObject import DictObject
from luckydonaldUtils.logger import logging
from luckydonaldUtils.exceptions import assert_type_or_raise

from ..exceptions import MalformedManifest, DimensionMismatch, DanglingReference, IoFailure
from .types import EmbeddingBundle, VideoRecord, FrameRecord, ObjectEntity, KeywordRelation

__author__ = 'luckydonald'
__all__ = ['load_bundle', 'write_bundle', 'MANIFEST_FILENAME', 'BLOB_FILENAME']
logger = logging.getLogger(__name__)

MANIFEST_FILENAME = "manifest.json"
BLOB_FILENAME = "embeddings.f32"
BLOB_DTYPE = np.dtype('<f4')


def load_bundle(path):
    """
    Reads a bundle directory and validates it completely.

    :param path: The bundle directory.
    :type  path: str | os.PathLike

    :raises IoFailure: files missing or unreadable.
    :raises MalformedManifest: schema violation.
    :raises DimensionMismatch: a vector is cut short by the end of the blob.
    :raises DanglingReference: an offset points outside of the blob.
    :raises NonFiniteValue: NaN or infinity in a vector.

    :return: the validated bundle
    :rtype: EmbeddingBundle
    """
    manifest_path = os.path.join(path, MANIFEST_FILENAME)
    blob_path = os.path.join(path, BLOB_FILENAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            raw_manifest = json.load(f)
        # end with
        blob_size = os.path.getsize(blob_path)
        blob = np.fromfile(blob_path, dtype=BLOB_DTYPE)
    except json.JSONDecodeError as e:
        raise MalformedManifest("{file} is not valid JSON: {e}".format(file=manifest_path, e=e)) from e
    except (OSError, ValueError) as e:
        raise IoFailure("could not read bundle at {path!r}: {e}".format(path=str(path), e=e)) from e
    # end try
    if blob_size % BLOB_DTYPE.itemsize != 0:
        raise DimensionMismatch("{file} has {size} bytes, which is no whole number of float32 values".format(
            file=blob_path, size=blob_size,
        ))
    # end if
    if not isinstance(raw_manifest, dict):
        raise MalformedManifest("manifest must be a JSON object")
    # end if
    manifest = DictObject.objectify(raw_manifest)
    bundle = _BundleReader(manifest, blob.astype(np.float64)).read()
    bundle.validate()
    logger.info("Loaded bundle {path!r}: {videos} videos, {keywords} keywords, {classes} classes, dim={dim}.".format(
        path=str(path), videos=len(bundle.videos), keywords=len(bundle.keywords), classes=bundle.num_classes, dim=bundle.dim,
    ))
    return bundle
# end def


class _BundleReader(object):
    """
    Turns the objectified manifest plus the blob into records.
    Only the manifest schema is checked here, the record invariants are checked by `EmbeddingBundle.validate()`.
    """
    def __init__(self, manifest, blob):
        self.manifest = manifest
        self.blob = blob
        self.dim = None
    # end def

    def read(self):
        self.dim = self._field(self.manifest, "dim", int, "manifest")
        if self.dim < 1:
            raise MalformedManifest("manifest: dim must be positive, got {}".format(self.dim))
        # end if
        class_names = self._field(self.manifest, "class_names", list, "manifest")
        for name in class_names:
            if not isinstance(name, str):
                raise MalformedManifest("manifest: class_names must all be strings, got {!r}".format(name))
            # end if
        # end for
        keywords = tuple(
            self._keyword(entry, "keyword #{}".format(i))
            for i, entry in enumerate(self._field(self.manifest, "keywords", list, "manifest"))
        )
        videos = tuple(
            self._video(entry, "video #{}".format(i))
            for i, entry in enumerate(self._field(self.manifest, "videos", list, "manifest"))
        )
        return EmbeddingBundle(dim=self.dim, videos=videos, keywords=keywords, class_names=tuple(class_names))
    # end def

    def _keyword(self, entry, what):
        self._expect_object(entry, what)
        return KeywordRelation(
            id=self._field(entry, "id", str, what),
            text=self._field(entry, "text", str, what),
            embedding=self._vector(entry, what),
            source_label_index=self._field(entry, "source_label_index", int, what),
        )
    # end def

    def _video(self, entry, what):
        self._expect_object(entry, what)
        video_id = self._field(entry, "id", str, what)
        what = "video {!r}".format(video_id)
        frames = tuple(
            self._frame(frame, "{what} frame #{i}".format(what=what, i=i))
            for i, frame in enumerate(self._field(entry, "frames", list, what))
        )
        return VideoRecord(id=video_id, label_index=self._field(entry, "label_index", int, what), frames=frames)
    # end def

    def _frame(self, entry, what):
        self._expect_object(entry, what)
        objects = entry.get("objects", [])
        if not isinstance(objects, list):
            raise MalformedManifest("{what}: 'objects' must be a list".format(what=what))
        # end if
        return FrameRecord(
            t=self._field(entry, "t", int, what),
            embedding=self._vector(entry, what),
            objects=tuple(self._object(obj, "{what} object #{i}".format(what=what, i=i)) for i, obj in enumerate(objects)),
        )
    # end def

    def _object(self, entry, what):
        self._expect_object(entry, what)
        bbox = self._field(entry, "bbox", list, what)
        if len(bbox) != 4 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in bbox):
            raise MalformedManifest("{what}: bbox must be 4 numbers, got {bbox!r}".format(what=what, bbox=bbox))
        # end if
        bbox = np.array(bbox, dtype=np.float64)
        bbox.flags.writeable = False
        return ObjectEntity(
            class_name=self._field(entry, "class_name", str, what),
            bbox=bbox,
            embedding=self._vector(entry, what),
        )
    # end def

    def _vector(self, entry, what):
        offset = self._field(entry, "offset", int, what)
        if offset < 0 or offset >= len(self.blob):
            raise DanglingReference("{what}: offset {offset} outside of the blob with {n} values".format(
                what=what, offset=offset, n=len(self.blob),
            ))
        # end if
        if offset + self.dim > len(self.blob):
            raise DimensionMismatch("{what}: only {n} values left at offset {offset}, expected dim={dim}".format(
                what=what, n=len(self.blob) - offset, offset=offset, dim=self.dim,
            ))
        # end if
        vector = self.blob[offset:offset + self.dim].copy()
        vector.flags.writeable = False
        return vector
    # end def

    @staticmethod
    def _expect_object(entry, what):
        if not isinstance(entry, dict):
            raise MalformedManifest("{what} must be a JSON object, got {value!r}".format(what=what, value=entry))
        # end if
    # end def

    @staticmethod
    def _field(entry, key, expected_type, what):
        if key not in entry:
            raise MalformedManifest("{what}: missing field {key!r}".format(what=what, key=key))
        # end if
        value = entry[key]
        if expected_type is int and isinstance(value, bool) or not isinstance(value, expected_type):
            raise MalformedManifest("{what}: field {key!r} must be {type}, got {value!r}".format(
                what=what, key=key, type=expected_type.__name__, value=value,
            ))
        # end if
        return value
    # end def
# end class


def write_bundle(bundle, path):
    """
    Writes the bundle as a directory, creating it if needed.
    Vectors are stored as float32; a bundle whose values are float32-representable
    (all bundles read from disk or generated synthetically are) reads back bit-identical.

    :param bundle: A valid bundle.
    :type  bundle: EmbeddingBundle

    :param path: Target directory.
    :type  path: str | os.PathLike

    :raises IoFailure: the directory or files can't be written.
    """
    assert_type_or_raise(bundle, EmbeddingBundle, parameter_name="bundle")
    vectors = []

    def allocate(vector):
        vectors.append(np.asarray(vector, dtype=np.float64))
        return (len(vectors) - 1) * bundle.dim
    # end def

    manifest = {
        "dim": bundle.dim,
        "class_names": list(bundle.class_names),
        "keywords": [
            {
                "id": keyword.id, "text": keyword.text,
                "source_label_index": keyword.source_label_index, "offset": allocate(keyword.embedding),
            } for keyword in bundle.keywords
        ],
        "videos": [
            {
                "id": video.id, "label_index": video.label_index,
                "frames": [
                    {
                        "t": frame.t, "offset": allocate(frame.embedding),
                        "objects": [
                            {
                                "class_name": obj.class_name,
                                "bbox": [float(x) for x in obj.bbox],
                                "offset": allocate(obj.embedding),
                            } for obj in frame.objects
                        ],
                    } for frame in video.frames
                ],
            } for video in bundle.videos
        ],
    }
    if vectors:
        blob = np.concatenate(vectors).astype(BLOB_DTYPE)
    else:
        blob = np.zeros(0, dtype=BLOB_DTYPE)
    # end if
    try:
        os.makedirs(path, exist_ok=True)
        with open(os.path.join(path, MANIFEST_FILENAME), "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, ensure_ascii=False)
        # end with
        with open(os.path.join(path, BLOB_FILENAME), "wb") as f:
            f.write(blob.tobytes())
        # end with
    except OSError as e:
        raise IoFailure("could not write bundle to {path!r}: {e}".format(path=str(path), e=e)) from e
    # end try
    logger.info("Wrote bundle to {path!r} ({n} vectors).".format(path=str(path), n=len(vectors)))
# end def
