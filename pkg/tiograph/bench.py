#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Cost comparison of multi-head dot product scoring and distance kernel scoring.

Op counts are exact multiply counts with unit constants, over all n² ordered pairs for both methods.
Additions are not counted.

    ops_multihead = 2·H·n·D·d + H·n²·d
    ops_kernel    = n²·D + n²

So the kernel scorer is the cheaper one exactly while `n·(D + 1 − H·d) < 2·H·D·d`.
The scorers timed are :func:`tiograph.model.attention.multihead_baseline_attention`
and :func:`tiograph.model.attention.dense_kernel_attention`.
"""
import csv
import time
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, List

import numpy as np
import torch
from luckydonaldUtils.logger import logging

from .model.attention import MultiHeadBaseline, multihead_baseline_attention, dense_kernel_attention
from .utilities import DTYPE

__author__ = 'luckydonald'
__all__ = [
    'CostModel', 'BenchRow', 'BenchResult', 'ops_multihead', 'ops_kernel', 'analytic_crossover', 'timing_agrees',
    'run_bench', 'write_bench_csv', 'read_bench_csv', 'DEFAULT_N_VALUES', 'GRAY_ZONE',
]

logger = logging.getLogger(__name__)
if __name__ == '__main__':
    logging.add_colored_handler(level=logging.DEBUG)
# end if


DEFAULT_N_VALUES = (1, 8, 64, 256, 1024, 2048, 4096)
DEFAULT_HEADS = 8
DEFAULT_DIM_IN = 1024
DEFAULT_DIM_HEAD = 64
DEFAULT_REPEATS = 3
DEFAULT_MAX_TIMED_N = 1024
MIN_REPEATS = 3
GRAY_ZONE = 2.0


@dataclass(frozen=True)
class CostModel(object):
    n: int = 1
    dim_in: int = DEFAULT_DIM_IN  # D
    num_heads: int = DEFAULT_HEADS  # H
    dim_head: int = DEFAULT_DIM_HEAD  # d

    def __post_init__(self):
        for name in ('n', 'dim_in', 'num_heads', 'dim_head'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError("{name} must be a positive integer, got {value!r}".format(name=name, value=value))
            # end if
        # end for
    # end def

    def with_n(self, n):
        return replace(self, n=int(n))
    # end def
# end class


def ops_multihead(m):
    """ `2·H·n·D·d` for the query and key projections plus `H·n²·d` for the scores. """
    return 2 * m.num_heads * m.n * m.dim_in * m.dim_head + m.num_heads * m.n * m.n * m.dim_head
# end def


def ops_kernel(m):
    """ `n²·D` for the squared distances plus `n²` kernel evaluations. """
    return m.n * m.n * m.dim_in + m.n * m.n
# end def


def analytic_crossover(m):
    """
    The real valued n below which the kernel scorer needs fewer multiplies,
    or `None` if it needs fewer for every n (`H·d ≥ D + 1`).
    """
    slope = m.dim_in + 1 - m.num_heads * m.dim_head
    if slope <= 0:
        return None
    # end if
    return 2.0 * m.num_heads * m.dim_in * m.dim_head / slope
# end def


def timing_agrees(row, gray_zone=GRAY_ZONE):
    """
    Whether the scorer that ran faster is also the one with fewer multiplies.

    Near the crossover, where the two op counts are within a factor `gray_zone` of each other,
    either ordering of the times is accepted.

    :type row: BenchRow
    :return: `None` for a row without timings.
    :rtype: bool | None
    """
    if row.time_multihead is None or row.time_kernel is None:
        return None
    # end if
    low, high = sorted((row.ops_multihead, row.ops_kernel))
    if high <= gray_zone * low:
        return True
    # end if
    return (row.time_kernel < row.time_multihead) == (row.ops_kernel < row.ops_multihead)
# end def


class BenchRow(NamedTuple):
    n: int
    ops_multihead: int
    ops_kernel: int
    time_multihead: Optional[float] = None  # seconds, median
    time_kernel: Optional[float] = None
# end class


class BenchResult(NamedTuple):
    rows: List[BenchRow]
    crossover_n: Optional[int]  # smallest benchmarked n with ops_kernel < ops_multihead
    first_flip_n: Optional[int]  # first benchmarked n where the op count ordering differs from the first row's
    analytic_crossover: Optional[float]
    model: CostModel
    repeats: int
    seed: int
    agrees_smallest_n: Optional[bool] = None  # timing_agrees of the first row
    agrees_largest_n: Optional[bool] = None  # timing_agrees of the last row
# end class


def _median_time(func, repeats):
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        timings.append(time.perf_counter() - start)
    # end for
    return float(np.median(timings))
# end def


def run_bench(
    n_values=DEFAULT_N_VALUES, model=None, repeats=DEFAULT_REPEATS, seed=0, max_timed_n=DEFAULT_MAX_TIMED_N, timed=True,
):
    """
    Counts ops for every n and times both scorers on random data.

    Timed are the rows with `n ≤ max_timed_n`, and always the smallest and the largest n,
    whose wall-time ordering is then compared against the op count ordering (see :func:`timing_agrees`).

    :param n_values: ascending sequence lengths.
    :param model: H, D and d (its n is ignored), defaults to H=8, D=1024, d=64.
    :type  model: CostModel | None
    :param repeats: timing repeats per scorer, at least 3, the median is reported.
    :param seed: for the random inputs and projections.
    :param timed: `False` only counts ops.
    :rtype: BenchResult
    """
    model = CostModel() if model is None else model
    n_values = [int(n) for n in n_values]
    if not n_values:
        raise ValueError("need at least one n")
    # end if
    if any(n < 1 for n in n_values) or n_values != sorted(n_values):
        raise ValueError("n values must be positive and ascending, got {!r}".format(n_values))
    # end if
    if repeats < MIN_REPEATS:
        raise ValueError("repeats must be >= {min}, got {r}".format(min=MIN_REPEATS, r=repeats))
    # end if
    generator = torch.Generator().manual_seed(seed)
    baseline = MultiHeadBaseline.random(model.num_heads, model.dim_head, model.dim_in, generator=generator)
    extremes = (n_values[0], n_values[-1])

    rows = []
    for n in n_values:
        m = model.with_n(n)
        row = BenchRow(n=n, ops_multihead=ops_multihead(m), ops_kernel=ops_kernel(m))
        if timed and (n <= max_timed_n or n in extremes):
            x = torch.randn((n, model.dim_in), generator=generator, dtype=DTYPE)
            row = row._replace(
                time_multihead=_median_time(lambda: multihead_baseline_attention(x, baseline), repeats),
                time_kernel=_median_time(lambda: dense_kernel_attention(x), repeats),
            )
        # end if
        logger.debug("bench row: {}".format(row))
        rows.append(row)
    # end for

    crossover_n = next((row.n for row in rows if row.ops_kernel < row.ops_multihead), None)
    first_sign = np.sign(rows[0].ops_multihead - rows[0].ops_kernel)
    first_flip_n = next((row.n for row in rows if np.sign(row.ops_multihead - row.ops_kernel) != first_sign), None)
    agrees_smallest_n, agrees_largest_n = timing_agrees(rows[0]), timing_agrees(rows[-1])
    for row, agrees in ((rows[0], agrees_smallest_n), (rows[-1], agrees_largest_n)):
        if agrees is False:
            logger.warning("at n={n} the wall-times ({t_m:.3g}s multi-head, {t_k:.3g}s kernel) order the scorers "
                           "differently than the op counts".format(n=row.n, t_m=row.time_multihead, t_k=row.time_kernel))
        # end if
    # end for
    return BenchResult(
        rows=rows, crossover_n=crossover_n, first_flip_n=first_flip_n, analytic_crossover=analytic_crossover(model),
        model=model, repeats=repeats, seed=seed, agrees_smallest_n=agrees_smallest_n, agrees_largest_n=agrees_largest_n,
    )
# end def


BENCH_COLUMNS = ('n', 'ops_multihead', 'ops_kernel', 'time_multihead_s', 'time_kernel_s')


def _flag(value):
    return "" if value is None else int(value)
# end def


def write_bench_csv(result, f):
    """
    The table with a `#` comment header recording the settings.

    :type result: BenchResult
    """
    m = result.model
    f.write("# H={h} D={D} d={d} repeats={r} seed={s}\n".format(
        h=m.num_heads, D=m.dim_in, d=m.dim_head, r=result.repeats, s=result.seed,
    ))
    f.write("# ops count multiplies only, additions are not counted; empty times were not measured\n")
    f.write("# crossover_n={c} first_flip_n={f} analytic_crossover={a}\n".format(
        c="" if result.crossover_n is None else result.crossover_n,
        f="" if result.first_flip_n is None else result.first_flip_n,
        a="" if result.analytic_crossover is None else "{:.12g}".format(result.analytic_crossover),
    ))
    f.write("# timing_agrees_smallest_n={s} timing_agrees_largest_n={l}\n".format(
        s=_flag(result.agrees_smallest_n), l=_flag(result.agrees_largest_n),
    ))
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in result.rows:
        writer.writerow([
            row.n, row.ops_multihead, row.ops_kernel,
            "" if row.time_multihead is None else "{:.12g}".format(row.time_multihead),
            "" if row.time_kernel is None else "{:.12g}".format(row.time_kernel),
        ])
    # end for
# end def


def read_bench_csv(f):
    """
    :return: the rows and the settings of the comment header (as strings).
    :rtype: (list of BenchRow, dict)
    """
    settings = {}
    lines = []
    for line in f:
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, value = token.split("=", 1)
                    settings[key] = value
                # end if
            # end for
        elif line.strip():
            lines.append(line)
        # end if
    # end for
    rows = []
    for row in csv.DictReader(lines):
        rows.append(BenchRow(
            n=int(row['n']), ops_multihead=int(row['ops_multihead']), ops_kernel=int(row['ops_kernel']),
            time_multihead=float(row['time_multihead_s']) if row['time_multihead_s'] else None,
            time_kernel=float(row['time_kernel_s']) if row['time_kernel_s'] else None,
        ))
    # end for
    return rows, settings
# end def


if __name__ == '__main__':
    import sys
    write_bench_csv(run_bench(), sys.stdout)
# end if
