# -*- coding: utf-8 -*-
import unittest

import numpy as np
from luckydonaldUtils.logger import logging

from tiograph.bundle.synthetic import SyntheticSpec, generate_synthetic_bundle, class_centroids
from tiograph.exceptions import InvalidSpec

__author__ = 'luckydonald'
logger = logging.getLogger(__name__)


class SyntheticBundleTestCase(unittest.TestCase):
    def test_shape(self):
        spec = SyntheticSpec(num_videos=5, frames_per_video=3, dim=6, num_classes=3, objects_per_frame=2, keywords_per_class=2)
        bundle = generate_synthetic_bundle(1, spec)
        self.assertEqual(bundle.dim, 6)
        self.assertEqual(len(bundle.videos), 5)
        self.assertEqual(len(bundle.keywords), 6)
        self.assertEqual(bundle.class_names, ("violence-0", "violence-1", "non-violence"))
        self.assertEqual(bundle.non_violence_index, 2)
        self.assertEqual([video.label_index for video in bundle.videos], [0, 1, 2, 0, 1])
        for video in bundle.videos:
            self.assertEqual([frame.t for frame in video.frames], [1, 2, 3])
            for frame in video.frames:
                self.assertEqual(len(frame.objects), 2)
                self.assertEqual(frame.embedding.shape, (6,))
            # end for
        # end for
        self.assertEqual(bundle.keywords_for_class(1), [2, 3])
    # end def

    def test_deterministic(self):
        spec = SyntheticSpec(num_videos=3, frames_per_video=4)
        self.assertEqual(generate_synthetic_bundle(7, spec), generate_synthetic_bundle(7, spec))
        self.assertNotEqual(generate_synthetic_bundle(7, spec), generate_synthetic_bundle(8, spec))
    # end def

    def test_centroids_separated(self):
        for seed in range(20):
            centroids = class_centroids(np.random.default_rng(seed), 4, 16, 6.0)
            for a in range(4):
                for b in range(a + 1, 4):
                    self.assertGreaterEqual(np.linalg.norm(centroids[a] - centroids[b]), 6.0 - 1e-9)
                # end for
            # end for
        # end for
    # end def

    def test_one_dimensional_centroids(self):
        centroids = class_centroids(np.random.default_rng(0), 3, 1, 2.0)
        np.testing.assert_allclose(centroids.reshape(-1), [-2.0, 0.0, 2.0])
    # end def

    def test_zero_separation(self):
        bundle = generate_synthetic_bundle(0, SyntheticSpec(num_videos=2, class_separation=0.0, noise_scale=0.0, keyword_noise=0.0))
        np.testing.assert_array_equal(bundle.keyword_matrix(), np.zeros((2, 16)))
    # end def

    def test_keywords_near_own_class(self):
        bundle = generate_synthetic_bundle(7, SyntheticSpec(num_videos=4))
        keywords = bundle.keyword_matrix()
        for video in bundle.videos:
            mean = video.frame_matrix().mean(axis=0)
            nearest = int(np.argmin(np.linalg.norm(keywords - mean[None, :], axis=1)))
            self.assertEqual(bundle.keywords[nearest].source_label_index, video.label_index)
        # end for
    # end def

    def test_invalid(self):
        for spec in (
            SyntheticSpec(num_videos=0),
            SyntheticSpec(frames_per_video=0),
            SyntheticSpec(dim=0),
            SyntheticSpec(num_classes=1),
            SyntheticSpec(class_separation=-1.0),
            SyntheticSpec(objects_per_frame=0),
        ):
            with self.assertRaises(InvalidSpec, msg=repr(spec)):
                generate_synthetic_bundle(0, spec)
            # end with
        # end for
    # end def
# end class


if __name__ == "__main__":
    unittest.main()
# end if
