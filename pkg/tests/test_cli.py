# -*- coding: utf-8 -*-
import csv
import os
import shutil
import tempfile
import unittest
from unittest import mock

from luckydonaldUtils.logger import logging

from tiograph.bench import read_bench_csv
from tiograph.cli import main, exit_code_for, n_list, EXIT_OK, EXIT_ABORT, EXIT_USAGE
from tiograph.evaluation import read_ablation_csv, read_explanations_jsonl
from tiograph.exceptions import NonFiniteGradient, InsufficientClasses, EmptyBatch, TrainingError, MalformedManifest
from tiograph.graph.knowledge_graph import read_triples_jsonl
from tiograph.metrics import read_metrics_csv
from tiograph.model.attention import read_attention_jsonl
from tiograph.model.checkpoint import read_checkpoint

__author__ = 'luckydonald'
logger = logging.getLogger(__name__)


class ExitCodeTestCase(unittest.TestCase):
    def test_mapping(self):
        self.assertEqual(exit_code_for(NonFiniteGradient("nan")), EXIT_ABORT)
        self.assertEqual(exit_code_for(TrainingError("stopped")), EXIT_ABORT)
        self.assertEqual(exit_code_for(InsufficientClasses("one class")), EXIT_USAGE)
        self.assertEqual(exit_code_for(EmptyBatch("empty")), EXIT_USAGE)
        self.assertEqual(exit_code_for(MalformedManifest("broken")), EXIT_USAGE)
    # end def

    def test_n_list(self):
        self.assertEqual(n_list("1,8,64"), [1, 8, 64])
        self.assertEqual(n_list("4,"), [4])
    # end def
# end class


class CommandLineTestCase(unittest.TestCase):
    def setUp(self):
        self.folder = tempfile.mkdtemp(prefix="tiograph-cli-")
        self.data = os.path.join(self.folder, "bundle")
        self.checkpoint = os.path.join(self.folder, "model.ckpt")
        self.run_ok(
            'generate', '--out', self.data, '--seed', '3', '--videos', '4', '--frames', '3', '--dim', '4',
            '--objects', '1', '--keywords-per-class', '1',
        )
    # end def

    def tearDown(self):
        shutil.rmtree(self.folder, ignore_errors=True)
    # end def

    def path(self, name):
        return os.path.join(self.folder, name)
    # end def

    def run_cli(self, *argv):
        return main(['--quiet'] + list(argv))
    # end def

    def run_ok(self, *argv):
        self.assertEqual(self.run_cli(*argv), EXIT_OK, argv)
    # end def

    def train(self, out=None, *extra):
        out = self.checkpoint if out is None else out
        self.run_ok('train', '--data', self.data, '--out', out, '--epochs', '2', '--seed', '1', *extra)
        return out
    # end def

    def read_bytes(self, path):
        with open(path, 'rb') as f:
            return f.read()
        # end with
    # end def

    def read_rows(self, path):
        with open(path, encoding='utf-8', newline='') as f:
            return list(csv.reader(f))
        # end with
    # end def

    def test_train_writes_checkpoint_and_history(self):
        self.train(None, '--holdout', '1')
        model = read_checkpoint(self.checkpoint)
        self.assertEqual((model.dim, model.num_classes), (4, 2))
        rows = self.read_rows(self.checkpoint + ".history.csv")
        self.assertEqual(rows[0][0], 'epoch')
        self.assertEqual([row[0] for row in rows[1:]], ['1', '2'])
    # end def

    def test_train_is_deterministic(self):
        first = self.train(self.path("first.ckpt"))
        second = self.train(self.path("second.ckpt"))
        self.assertEqual(self.read_bytes(first), self.read_bytes(second))
        self.assertEqual(self.read_bytes(first + ".history.csv"), self.read_bytes(second + ".history.csv"))
    # end def

    def test_detect(self):
        self.train()
        out = self.path("scores.csv")
        self.run_ok('detect', '--data', self.data, '--checkpoint', self.checkpoint, '--out', out, '--theta', '0.5')
        rows = self.read_rows(out)
        self.assertEqual(rows[0], ['video_id', 'level', 't', 'score', 'decision'])
        self.assertEqual(len(rows), 1 + 4 * (3 + 1))
        self.assertEqual(rows[1][:3], ['video-0000', 'frame', '1'])
        self.assertEqual(rows[4][:3], ['video-0000', 'video', ''])
        for row in rows[1:]:
            score = float(row[3])
            self.assertTrue(0.0 <= score <= 1.0)
            self.assertEqual(row[4], str(int(score >= 0.5)))
        # end for

        again = self.path("scores-again.csv")
        self.run_ok('detect', '--data', self.data, '--checkpoint', self.checkpoint, '--out', again, '--theta', '0.5')
        self.assertEqual(self.read_bytes(out), self.read_bytes(again))
    # end def

    def test_retrieve(self):
        self.train()
        out, metrics = self.path("ranking.csv"), self.path("recall.csv")
        self.run_ok(
            'retrieve', '--data', self.data, '--checkpoint', self.checkpoint, '--video', 'video-0001',
            '--out', out, '--metrics', metrics,
        )
        rows = self.read_rows(out)
        self.assertEqual(rows[0], ['rank', 'keyword_id', 'text', 'similarity', 'relevant'])
        self.assertEqual([row[0] for row in rows[1:]], ['1', '2'])
        self.assertEqual(sorted(row[4] for row in rows[1:]), ['0', '1'])
        with open(metrics, encoding='utf-8') as f:
            recalls = read_metrics_csv(f)
        # end with
        self.assertEqual([(r.metric, r.name) for r in recalls], [
            ('R@1', 'video-0001'), ('R@5', 'video-0001'), ('R@10', 'video-0001'),
        ])
        self.assertEqual(recalls[1].value, 1.0)
    # end def

    def test_explain(self):
        self.train()
        out = self.path("explain.jsonl")
        self.run_ok(
            'explain', '--data', self.data, '--checkpoint', self.checkpoint, '--video', 'video-0000',
            '--frame', '2', '--topk', '3', '--out', out,
        )
        with open(out, encoding='utf-8') as f:
            explanations = read_explanations_jsonl(f)
        # end with
        # one object under two keywords
        self.assertEqual(len(explanations), 2)
        self.assertGreaterEqual(explanations[0].alpha, explanations[1].alpha)
        self.assertEqual(explanations[0].head, 'video-0000@t=2')
    # end def

    def test_explain_writes_triples_and_attention(self):
        self.train()
        out, triples, edges = self.path("explain.jsonl"), self.path("triples.jsonl"), self.path("attention.jsonl")
        self.run_ok(
            'explain', '--data', self.data, '--checkpoint', self.checkpoint, '--video', 'video-0000',
            '--frame', '2', '--out', out, '--triples', triples, '--attention-out', edges,
        )
        with open(out, encoding='utf-8') as f:
            explanations = read_explanations_jsonl(f)
        # end with
        with open(triples, encoding='utf-8') as f:
            graph_triples = read_triples_jsonl(f)
        # end with
        with open(edges, encoding='utf-8') as f:
            scored = read_attention_jsonl(f)
        # end with
        # three frames, one object each, under both keywords
        self.assertEqual(len(graph_triples), 3 * 2)
        self.assertEqual(sorted({triple.frame_label for triple in graph_triples}), [
            'video-0000@t=1', 'video-0000@t=2', 'video-0000@t=3',
        ])
        frame_alphas = sorted((edge['alpha'] for edge in scored if edge['head'] == 'frame(v=0, t=2)'), reverse=True)
        self.assertEqual([explanation.alpha for explanation in explanations], frame_alphas)
        self.assertAlmostEqual(sum(frame_alphas), 1.0, delta=1e-9)
    # end def

    def test_evaluate(self):
        self.train(None, '--holdout', '1')
        out = self.path("metrics.csv")
        self.run_ok('evaluate', '--data', self.data, '--checkpoint', self.checkpoint, '--out', out)
        with open(out, encoding='utf-8') as f:
            rows = read_metrics_csv(f)
        # end with
        self.assertEqual([(r.metric, r.name) for r in rows][:3], [('AP', 'video'), ('AUC', 'video'), ('AP', 'frame')])

        self.run_ok('evaluate', '--data', self.data, '--checkpoint', self.checkpoint, '--holdout', '1', '--out', out)
        with open(out, encoding='utf-8') as f:
            self.assertNotIn('AUC', [r.metric for r in read_metrics_csv(f)])
        # end with
    # end def

    def test_ablate(self):
        out = self.path("ablation.csv")
        self.run_ok('ablate', '--data', self.data, '--epochs', '1', '--holdout', '2', '--out', out)
        with open(out, encoding='utf-8') as f:
            rows = read_ablation_csv(f)
        # end with
        self.assertEqual([(r.use_gat, r.use_temporal, r.attention) for r in rows], [
            (True, True, 'kernel'), (True, False, 'kernel'), (False, True, 'none'), (False, False, 'none'),
            (True, True, 'uniform'), (True, True, 'multihead'),
        ])
    # end def

    def test_train_with_multihead_scoring(self):
        out = self.train(self.path("multihead.ckpt"), '--attention', 'multihead', '--attention-heads', '2')
        model = read_checkpoint(out)
        self.assertEqual((model.scoring.value, model.gat.num_heads), ('multihead', 2))
        scores = self.path("scores.csv")
        self.run_ok('detect', '--data', self.data, '--checkpoint', out, '--out', scores)
        self.assertEqual(len(self.read_rows(scores)), 1 + 4 * (3 + 1))
        self.assertEqual(self.run_cli('train', '--data', self.data, '--out', out, '--attention', 'dot'), EXIT_USAGE)
    # end def

    def test_bench(self):
        out = self.path("bench.csv")
        self.run_ok(
            'bench', '--n-list', '1,4,16,32', '--heads', '2', '--dim-in', '8', '--dim-head', '2',
            '--repeats', '3', '--max-timed-n', '4', '--out', out,
        )
        with open(out, encoding='utf-8') as f:
            rows, settings = read_bench_csv(f)
        # end with
        self.assertEqual([row.n for row in rows], [1, 4, 16, 32])
        self.assertIsNotNone(rows[1].time_kernel)
        self.assertIsNone(rows[2].time_kernel)
        self.assertIsNotNone(rows[3].time_kernel)
        self.assertIn(settings['timing_agrees_largest_n'], ('0', '1'))
        self.assertEqual((settings['H'], settings['D'], settings['d']), ('2', '8', '2'))

        self.run_ok('bench', '--n-list', '1,8,64,256,1024,2048,4096', '--no-timing', '--out', out)
        with open(out, encoding='utf-8') as f:
            rows, settings = read_bench_csv(f)
        # end with
        self.assertTrue(all(row.time_multihead is None for row in rows))
        self.assertEqual(settings['first_flip_n'], '2048')
    # end def

    def test_usage_errors(self):
        self.train()
        model = ('--data', self.data, '--checkpoint', self.checkpoint)
        self.assertEqual(self.run_cli(), EXIT_USAGE)
        self.assertEqual(self.run_cli('retrieve', *model, '--video', 'no-such-video', '--out', self.path("r.csv")), EXIT_USAGE)
        self.assertEqual(self.run_cli('explain', *model, '--video', 'video-0000', '--frame', '4'), EXIT_USAGE)
        self.assertEqual(self.run_cli('detect', *model, '--theta', '1.5'), EXIT_USAGE)
        self.assertEqual(self.run_cli('bench', '--repeats', '2'), EXIT_USAGE)
        self.assertEqual(self.run_cli('bench', '--n-list', '8,4'), EXIT_USAGE)
        self.assertEqual(self.run_cli('train', '--data', self.data, '--out', self.path("m.ckpt"), '--decay', '0'), EXIT_USAGE)
        self.assertEqual(self.run_cli('train', '--data', self.path("missing"), '--out', self.path("m.ckpt")), EXIT_USAGE)
        self.assertEqual(self.run_cli('evaluate', '--data', self.data, '--checkpoint', self.path("missing.ckpt")), EXIT_USAGE)
        self.assertEqual(self.run_cli('generate', '--out', self.path("other"), '--classes', '1'), EXIT_USAGE)
    # end def

    def test_single_class_training_fails(self):
        # with 3 of 4 videos held out only the first class is left
        self.assertEqual(
            self.run_cli('train', '--data', self.data, '--out', self.path("m.ckpt"), '--epochs', '1', '--holdout', '3'),
            EXIT_USAGE,
        )
    # end def

    def test_unwritable_output_fails_before_work(self):
        self.train()
        missing = self.path(os.path.join("missing", "folder"))
        model = ('--data', self.data, '--checkpoint', self.checkpoint)
        with mock.patch('tiograph.cli.train') as train:
            self.assertEqual(
                self.run_cli('train', '--data', self.data, '--out', os.path.join(missing, "m.ckpt"), '--epochs', '50'),
                EXIT_USAGE,
            )
            self.assertEqual(
                self.run_cli(
                    'train', '--data', self.data, '--out', self.path("m.ckpt"), '--history', os.path.join(missing, "h.csv"),
                ),
                EXIT_USAGE,
            )
            self.assertEqual(self.run_cli('ablate', '--data', self.data, '--out', os.path.join(missing, "a.csv")), EXIT_USAGE)
            train.assert_not_called()
        # end with
        self.assertFalse(os.path.exists(self.path("m.ckpt")))
        self.assertEqual(self.run_cli('detect', *model, '--out', os.path.join(missing, "scores.csv")), EXIT_USAGE)
        self.assertEqual(self.run_cli('detect', *model, '--out', self.folder), EXIT_USAGE)
        self.assertEqual(
            self.run_cli(
                'retrieve', *model, '--video', 'video-0000', '--out', self.path("r.csv"),
                '--metrics', os.path.join(missing, "recall.csv"),
            ),
            EXIT_USAGE,
        )
        self.assertFalse(os.path.exists(self.path("r.csv")))
        self.assertEqual(self.run_cli('evaluate', *model, '--out', os.path.join(missing, "metrics.csv")), EXIT_USAGE)
        self.assertEqual(self.run_cli('bench', '--n-list', '1', '--out', os.path.join(missing, "bench.csv")), EXIT_USAGE)
        self.assertEqual(self.run_cli('generate', '--out', self.checkpoint), EXIT_USAGE)
    # end def

    def test_repeated_runs_attach_one_log_handler(self):
        root = logging.getLogger()
        bench = ('bench', '--n-list', '1', '--heads', '1', '--dim-in', '2', '--dim-head', '1', '--out', self.path("b.csv"))
        self.run_ok(*bench)
        count = len(root.handlers)
        self.run_ok(*bench)
        self.assertEqual(main(['--verbose'] + list(bench)), EXIT_OK)
        self.assertEqual(len(root.handlers), count)
        self.assertEqual(root.level, logging.DEBUG)
    # end def
# end class


if __name__ == "__main__":
    unittest.main()
# end if
