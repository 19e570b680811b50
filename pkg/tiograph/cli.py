#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
The `tiograph` command line.

    tiograph generate --out fixture/ --seed 7 --videos 40
    tiograph train    --data fixture/ --out model.ckpt --holdout 8
    tiograph detect   --data fixture/ --checkpoint model.ckpt --theta 0.5
    tiograph retrieve --data fixture/ --checkpoint model.ckpt --video video-0003
    tiograph explain  --data fixture/ --checkpoint model.ckpt --video video-0003 --frame 2 --topk 3
    tiograph evaluate --data fixture/ --checkpoint model.ckpt
    tiograph ablate   --data fixture/ --holdout 8
    tiograph bench    --n-list 1,8,64,256,1024,2048

Exit codes: 0 success, 1 training aborted, 2 usage or validation error.
"""
import os
import sys
import csv
import argparse
from contextlib import contextmanager

from luckydonaldUtils.logger import logging

from .bench import CostModel, run_bench, write_bench_csv, DEFAULT_N_VALUES, DEFAULT_HEADS, DEFAULT_DIM_IN
from .bench import DEFAULT_DIM_HEAD, DEFAULT_REPEATS, DEFAULT_MAX_TIMED_N, MIN_REPEATS
from .bundle.io import load_bundle, write_bundle
from .bundle.synthetic import SyntheticSpec, generate_synthetic_bundle
from .evaluation import (
    evaluate, ablate, holdout_split, keyword_gallery, explain_frame, write_explanations_jsonl, write_ablation_csv,
    RECALL_KS,
)
from .exceptions import (
    TioError, TrainingError, NonFiniteGradient, InsufficientClasses, InvalidSupervision, EmptyBatch, IoFailure,
)
from .graph.knowledge_graph import export_triples, write_triples_jsonl
from .metrics import MetricRow, rank_gallery, recall_at_k, write_metrics_csv
from .model.attention import Scoring, attention, write_attention_jsonl
from .model.checkpoint import write_checkpoint, read_checkpoint, check_compatible
from .model.training import TrainConfig, train, write_history_csv
from .utilities import resolve_seed

__author__ = 'luckydonald'
__all__ = [
    'main', 'build_parser', 'exit_code_for', 'check_output_path', 'setup_logging', 'EXIT_OK', 'EXIT_ABORT', 'EXIT_USAGE',
]
logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_ABORT = 1
EXIT_USAGE = 2

STDOUT = '-'

_log_handlers = []
_handler_attached = False


def exit_code_for(error):
    """
    Maps an error to the exit code: 1 for aborted training runs, 2 for invalid input of any kind.

    :type error: Exception
    :rtype: int
    """
    if isinstance(error, NonFiniteGradient):
        return EXIT_ABORT
    # end if
    if isinstance(error, (InsufficientClasses, InvalidSupervision, EmptyBatch)):
        return EXIT_USAGE
    # end if
    if isinstance(error, TrainingError):
        return EXIT_ABORT
    # end if
    return EXIT_USAGE
# end def


# argparse types

def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not an integer".format(value))
    # end try
    if number < 1:
        raise argparse.ArgumentTypeError("{!r} must be >= 1".format(value))
    # end if
    return number
# end def


def non_negative_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not an integer".format(value))
    # end try
    if number < 0:
        raise argparse.ArgumentTypeError("{!r} must be >= 0".format(value))
    # end if
    return number
# end def


def positive_float(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not a number".format(value))
    # end try
    if not number > 0:
        raise argparse.ArgumentTypeError("{!r} must be > 0".format(value))
    # end if
    return number
# end def


def non_negative_float(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not a number".format(value))
    # end try
    if not number >= 0:
        raise argparse.ArgumentTypeError("{!r} must be >= 0".format(value))
    # end if
    return number
# end def


def unit_interval(value):
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not a number".format(value))
    # end try
    if not 0.0 <= number <= 1.0:
        raise argparse.ArgumentTypeError("{!r} must be in [0, 1]".format(value))
    # end if
    return number
# end def


def repeats_count(value):
    number = positive_int(value)
    if number < MIN_REPEATS:
        raise argparse.ArgumentTypeError("repeats must be >= {}".format(MIN_REPEATS))
    # end if
    return number
# end def


def n_list(value):
    try:
        numbers = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("{!r} is not a comma separated list of integers".format(value))
    # end try
    if not numbers or any(n < 1 for n in numbers) or numbers != sorted(numbers):
        raise argparse.ArgumentTypeError("{!r} must be positive integers in ascending order".format(value))
    # end if
    return numbers
# end def


def check_output_path(path):
    """
    Fails before any work is done if `path` can't be written to: its folder has to exist and be writable,
    and the path itself must not be a folder. `-` (stdout) is always fine.

    :param path: output file, or `-`.
    :raises IoFailure: the file could not be written.
    :return: the path, unchanged.
    """
    if path is None or path == STDOUT:
        return path
    # end if
    folder = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(folder):
        raise IoFailure("cannot write {path!r}: folder {folder!r} does not exist".format(path=path, folder=folder))
    # end if
    if os.path.isdir(path):
        raise IoFailure("cannot write {path!r}: it is a folder".format(path=path))
    # end if
    if not os.access(folder, os.W_OK) or (os.path.exists(path) and not os.access(path, os.W_OK)):
        raise IoFailure("cannot write {path!r}: permission denied".format(path=path))
    # end if
    return path
# end def


@contextmanager
def open_output(path):
    """ A text file opened for writing, or stdout for `-`. """
    if path == STDOUT:
        yield sys.stdout
        return
    # end if
    try:
        f = open(path, 'w', encoding='utf-8', newline='')
    except OSError as e:
        raise IoFailure("could not write {path!r}: {e}".format(path=path, e=e)) from e
    # end try
    with f:
        yield f
    # end with
# end def


def _add_train_overrides(parser):
    group = parser.add_argument_group('training overrides')
    group.add_argument('--epochs', type=non_negative_int, help='number of epochs (default 200)')
    group.add_argument('--lr0', type=positive_float, help='initial learning rate (default 5e-5)')
    group.add_argument('--decay', dest='decay_per_epoch', type=unit_interval, help='learning rate decay per epoch (default 0.95)')
    group.add_argument('--margin', dest='margin_alpha', type=non_negative_float, help='retrieval margin (default 0.9)')
    group.add_argument('--lambda-gat', type=non_negative_float, help='graph regularizer weight λ (default 1)')
    group.add_argument('--w-cls', type=non_negative_float, help='classification loss weight (default 1.4)')
    group.add_argument('--w-ret', type=non_negative_float, help='retrieval loss weight (default 1.3)')
    group.add_argument('--w-gat', type=non_negative_float, help='graph regularizer loss weight (default 1)')
    group.add_argument('--sigma-kernel', type=positive_float, help='attention kernel bandwidth (default 0.25)')
    group.add_argument('--sigma-time', type=positive_float, help='temporal decay (default 3)')
    group.add_argument('--relation-policy', choices=['all', 'nearest'], help='which keywords link a frame and its objects')
    group.add_argument('--frozen-projection', action='store_true', help='no learnable projection before the attention')
    group.add_argument('--no-gat', action='store_true', help='skip the graph attention stage')
    group.add_argument('--no-temporal', action='store_true', help='skip the temporal stage')
    group.add_argument(
        '--attention', choices=[scoring.value for scoring in Scoring],
        help='neighbor scoring of the graph stage (default kernel)',
    )
    group.add_argument('--attention-heads', type=positive_int, help='heads of the multihead scoring (default 2)')
    group.add_argument('--holdout', type=non_negative_int, default=0, help='hold out the last N videos')
# end def


def _config_from_args(args):
    overrides = {
        name: getattr(args, name) for name in (
            'epochs', 'lr0', 'decay_per_epoch', 'margin_alpha', 'lambda_gat', 'w_cls', 'w_ret', 'w_gat',
            'sigma_kernel', 'sigma_time', 'relation_policy', 'attention', 'attention_heads',
        )
    }
    if args.decay_per_epoch is not None and args.decay_per_epoch == 0:
        raise argparse.ArgumentTypeError("--decay must be in (0, 1]")
    # end if
    overrides['seed'] = resolve_seed(args.seed)
    if args.frozen_projection:
        overrides['train_projection'] = False
    # end if
    if args.no_gat:
        overrides['use_gat'] = False
    # end if
    if args.no_temporal:
        overrides['use_temporal'] = False
    # end if
    return TrainConfig().replace(**overrides)
# end def


def build_parser():
    parser = argparse.ArgumentParser(
        prog='tiograph',
        description='Knowledge graph attention, temporal encoding and metrics over precomputed video embeddings.',
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true', help='debug output')
    verbosity.add_argument('--quiet', '-q', action='store_true', help='warnings and errors only')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    def subcommand(name, func, help):
        sub = subparsers.add_parser(name, help=help, description=help)
        sub.set_defaults(func=func)
        sub.add_argument('--seed', type=int, default=None, help='random seed, falls back to $TIO_SEED, then 0')
        return sub
    # end def

    sub = subcommand('generate', cmd_generate, 'write a synthetic embedding bundle')
    sub.add_argument('--out', required=True, help='bundle directory to write')
    sub.add_argument('--videos', type=positive_int, default=SyntheticSpec.num_videos)
    sub.add_argument('--frames', type=positive_int, default=SyntheticSpec.frames_per_video)
    sub.add_argument('--dim', type=positive_int, default=SyntheticSpec.dim)
    sub.add_argument('--classes', type=positive_int, default=SyntheticSpec.num_classes)
    sub.add_argument('--separation', type=non_negative_float, default=SyntheticSpec.class_separation)
    sub.add_argument('--objects', type=positive_int, default=SyntheticSpec.objects_per_frame)
    sub.add_argument('--keywords-per-class', type=positive_int, default=SyntheticSpec.keywords_per_class)

    sub = subcommand('train', cmd_train, 'train a model on a bundle and write the checkpoint')
    sub.add_argument('--data', required=True, help='bundle directory')
    sub.add_argument('--out', required=True, help='checkpoint file to write')
    sub.add_argument('--history', default=None, help='loss history CSV, defaults to <out>.history.csv')
    _add_train_overrides(sub)

    sub = subcommand('detect', cmd_detect, 'frame and video level anomaly scores')
    sub.add_argument('--data', required=True, help='bundle directory')
    sub.add_argument('--checkpoint', required=True, help='checkpoint file')
    sub.add_argument('--out', default=STDOUT, help='CSV file, - for stdout')
    sub.add_argument('--theta', type=unit_interval, default=None, help='also emit binary decisions score >= theta')

    sub = subcommand('retrieve', cmd_retrieve, 'rank the class keywords for a video')
    sub.add_argument('--data', required=True, help='bundle directory')
    sub.add_argument('--checkpoint', required=True, help='checkpoint file')
    sub.add_argument('--video', required=True, help='id of the query video')
    sub.add_argument('--out', default=STDOUT, help='ranking CSV, - for stdout')
    sub.add_argument('--metrics', default=None, help='write R@1/R@5/R@10 to this CSV')

    sub = subcommand('explain', cmd_explain, 'the strongest triples of a frame as JSON lines')
    sub.add_argument('--data', required=True, help='bundle directory')
    sub.add_argument('--checkpoint', required=True, help='checkpoint file')
    sub.add_argument('--video', required=True, help='video id')
    sub.add_argument('--frame', type=positive_int, required=True, help='frame index t, counting from 1')
    sub.add_argument('--topk', type=positive_int, default=5)
    sub.add_argument('--out', default=STDOUT, help='JSON lines file, - for stdout')
    sub.add_argument('--triples', default=None, help='also write every triple of the video graph as JSON lines')
    sub.add_argument('--attention-out', default=None, help='also write the attention of every scored edge as JSON lines')

    sub = subcommand('evaluate', cmd_evaluate, 'AP, AUC and R@k of a trained model')
    sub.add_argument('--data', required=True, help='bundle directory')
    sub.add_argument('--checkpoint', required=True, help='checkpoint file')
    sub.add_argument('--holdout', type=non_negative_int, default=0, help='only evaluate the last N videos')
    sub.add_argument('--out', default=STDOUT, help='metrics CSV, - for stdout')

    sub = subcommand('ablate', cmd_ablate, 'train and evaluate with the graph and temporal stages and the neighbor scoring varied')
    sub.add_argument('--data', required=True, help='bundle directory')
    sub.add_argument('--out', default=STDOUT, help='ablation CSV, - for stdout')
    _add_train_overrides(sub)

    sub = subcommand('bench', cmd_bench, 'op counts and timings of multi-head vs. distance kernel scoring')
    sub.add_argument('--n-list', type=n_list, default=list(DEFAULT_N_VALUES), help='comma separated, ascending')
    sub.add_argument('--heads', type=positive_int, default=DEFAULT_HEADS, help='H')
    sub.add_argument('--dim-in', type=positive_int, default=DEFAULT_DIM_IN, help='D')
    sub.add_argument('--dim-head', type=positive_int, default=DEFAULT_DIM_HEAD, help='d')
    sub.add_argument('--repeats', type=repeats_count, default=DEFAULT_REPEATS)
    sub.add_argument(
        '--max-timed-n', type=non_negative_int, default=DEFAULT_MAX_TIMED_N,
        help='only time rows up to this n, the smallest and largest n are always timed',
    )
    sub.add_argument('--no-timing', action='store_true', help='only count ops, time nothing')
    sub.add_argument('--out', default=STDOUT, help='CSV file, - for stdout')
    return parser
# end def


def _load_model_and_bundle(args):
    bundle = load_bundle(args.data)
    model = check_compatible(read_checkpoint(args.checkpoint), bundle)
    model.eval()
    return bundle, model
# end def


def _video_index(bundle, video_id):
    try:
        return bundle.video_index(video_id)
    except KeyError:
        raise argparse.ArgumentTypeError("unknown video id {!r}".format(video_id))
    # end try
# end def


def cmd_generate(args):
    if os.path.exists(args.out) and not os.path.isdir(args.out):
        raise IoFailure("cannot write a bundle to {path!r}: it is a file".format(path=args.out))
    # end if
    spec = SyntheticSpec(
        num_videos=args.videos, frames_per_video=args.frames, dim=args.dim, num_classes=args.classes,
        class_separation=args.separation, objects_per_frame=args.objects, keywords_per_class=args.keywords_per_class,
    )
    write_bundle(generate_synthetic_bundle(resolve_seed(args.seed), spec), args.out)
    return EXIT_OK
# end def


def cmd_train(args):
    cfg = _config_from_args(args)
    history_path = check_output_path(args.history or "{}.history.csv".format(args.out))
    check_output_path(args.out)
    bundle = load_bundle(args.data)
    train_indices, held_out = holdout_split(len(bundle.videos), args.holdout) if args.holdout else (None, [])
    result = train(bundle, cfg, video_indices=train_indices)
    write_checkpoint(result.model, args.out)
    with open_output(history_path) as f:
        write_history_csv(result.history, f)
    # end with
    if cfg.epochs > 0:
        for split, indices in (("training", train_indices), ("held-out", held_out)):
            if indices is not None and len(indices) == 0:
                continue
            # end if
            rows = evaluate(bundle, result.model, indices)
            logger.info("{split} split: {metrics}".format(
                split=split, metrics=", ".join("{r.metric}/{r.name}={r.value:.4f}".format(r=row) for row in rows),
            ))
        # end for
    # end if
    return EXIT_OK
# end def


def cmd_detect(args):
    check_output_path(args.out)
    bundle, model = _load_model_and_bundle(args)
    with open_output(args.out) as f:
        writer = csv.writer(f, lineterminator="\n")
        header = ['video_id', 'level', 't', 'score']
        if args.theta is not None:
            header.append('decision')
        # end if
        writer.writerow(header)
        for v, video in enumerate(bundle.videos):
            frame_scores, video_score = model.scores(model.graph_for(bundle, v))
            rows = [('frame', t, score) for t, score in enumerate(frame_scores, start=1)]
            rows.append(('video', '', video_score))
            for level, t, score in rows:
                line = [video.id, level, t, "{:.12g}".format(score)]
                if args.theta is not None:
                    line.append(int(score >= args.theta))
                # end if
                writer.writerow(line)
            # end for
        # end for
    # end with
    return EXIT_OK
# end def


def cmd_retrieve(args):
    check_output_path(args.out)
    check_output_path(args.metrics)
    bundle, model = _load_model_and_bundle(args)
    v = _video_index(bundle, args.video)
    video = bundle.videos[v]
    relevance = [int(keyword.source_label_index == video.label_index) for keyword in bundle.keywords]
    ranking = rank_gallery(model.embed(model.graph_for(bundle, v)), keyword_gallery(bundle), relevance=relevance)
    with open_output(args.out) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(['rank', 'keyword_id', 'text', 'similarity', 'relevant'])
        for rank, index in enumerate(ranking.ranking, start=1):
            keyword = bundle.keywords[index]
            writer.writerow([
                rank, keyword.id, keyword.text, "{:.12g}".format(ranking.similarities[index]), relevance[index],
            ])
        # end for
    # end with
    if sum(relevance) == 0:
        logger.warning("no keyword of class {!r}, no recall reported".format(bundle.class_names[video.label_index]))
        return EXIT_OK
    # end if
    rows = [
        MetricRow('R@{}'.format(k), video.id, recall_at_k(ranking, min(k, len(bundle.keywords))))
        for k in RECALL_KS
    ]
    logger.info(", ".join("{r.metric}={r.value:.4f}".format(r=row) for row in rows))
    if args.metrics:
        with open_output(args.metrics) as f:
            write_metrics_csv(rows, f)
        # end with
    # end if
    return EXIT_OK
# end def


def cmd_explain(args):
    check_output_path(args.out)
    check_output_path(args.triples)
    check_output_path(args.attention_out)
    bundle, model = _load_model_and_bundle(args)
    v = _video_index(bundle, args.video)
    if args.frame > bundle.videos[v].num_frames:
        raise argparse.ArgumentTypeError("video {id!r} has no frame {t}".format(id=args.video, t=args.frame))
    # end if
    g = model.graph_for(bundle, v)
    report = attention(g, model.gat)
    explanations = explain_frame(bundle, model, v, args.frame, topk=args.topk, report=report)
    with open_output(args.out) as f:
        write_explanations_jsonl(explanations, f)
    # end with
    if args.triples:
        with open_output(args.triples) as f:
            write_triples_jsonl(export_triples(g, bundle), f)
        # end with
    # end if
    if args.attention_out:
        with open_output(args.attention_out) as f:
            write_attention_jsonl(report, f)
        # end with
    # end if
    return EXIT_OK
# end def


def cmd_evaluate(args):
    check_output_path(args.out)
    bundle, model = _load_model_and_bundle(args)
    indices = holdout_split(len(bundle.videos), args.holdout)[1] if args.holdout else None
    with open_output(args.out) as f:
        write_metrics_csv(evaluate(bundle, model, indices), f)
    # end with
    return EXIT_OK
# end def


def cmd_ablate(args):
    check_output_path(args.out)
    cfg = _config_from_args(args)
    bundle = load_bundle(args.data)
    if args.holdout:
        train_indices, eval_indices = holdout_split(len(bundle.videos), args.holdout)
    else:
        train_indices = eval_indices = list(range(len(bundle.videos)))
    # end if
    rows = ablate(bundle, cfg, train_indices, eval_indices)
    with open_output(args.out) as f:
        write_ablation_csv(rows, f)
    # end with
    return EXIT_OK
# end def


def cmd_bench(args):
    check_output_path(args.out)
    model = CostModel(n=1, dim_in=args.dim_in, num_heads=args.heads, dim_head=args.dim_head)
    result = run_bench(
        args.n_list, model=model, repeats=args.repeats, seed=resolve_seed(args.seed), max_timed_n=args.max_timed_n,
        timed=not args.no_timing,
    )
    with open_output(args.out) as f:
        write_bench_csv(result, f)
    # end with
    return EXIT_OK
# end def


def setup_logging(level):
    """
    Attaches the colored handler to the root logger on the first call.
    Later calls only change the level, so repeated `main()` calls don't duplicate log lines.
    """
    global _handler_attached
    root = logging.getLogger()
    if not _handler_attached:
        before = list(root.handlers)
        logging.add_colored_handler(level=level)
        _handler_attached = True
        _log_handlers.extend(handler for handler in root.handlers if handler not in before)
    # end if
    root.setLevel(level)
    for handler in _log_handlers:
        handler.setLevel(level)
    # end for
# end def


def main(argv=None):
    """
    :param argv: arguments without the program name, defaults to `sys.argv[1:]`.
    :return: the exit code.
    :rtype: int
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    # end try
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as e:
        parser.print_usage(sys.stderr)
        logger.error("{command}: {e}".format(command=args.command, e=e))
        return EXIT_USAGE
    except (TioError, ValueError) as e:
        code = exit_code_for(e) if isinstance(e, TioError) else EXIT_USAGE
        logger.error("{command} failed: {e}".format(command=args.command, e=e))
        return code
    # end try
# end def


if __name__ == '__main__':
    sys.exit(main())
# end if
