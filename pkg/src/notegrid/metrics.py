"""Framewise evaluation: counts, precision/recall/f-measure, resampling,
windowing, and disagreement statistics between two rasterizations.

Precision is TP/(TP+FP), recall TP/(TP+FN), f-measure their harmonic
mean, with counts summed over all frames and labels. Any 0/0 evaluates
to 0.0 and lowers the corresponding `defined` flag instead of raising,
so batch evaluation stays total.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .annotation import Annotation
from .errors import ContractError
from .quantize import (FrameGrid, LabelingFunction, LabelMatrix,
                       QuantizedInterval, rasterize, rasterize_with_records)


@dataclass(frozen=True)
class EvalCounts:
    """True/false positive and false negative totals over all (t, k) cells."""

    tp: int
    fp: int
    fn_: int


@dataclass(frozen=True)
class EvalResult:
    """Precision/recall/f-measure with their zero-denominator flags."""

    precision: float
    recall: float
    fmeasure: float
    counts: EvalCounts
    precision_defined: bool = True
    recall_defined: bool = True
    fmeasure_defined: bool = True


@dataclass(frozen=True)
class DisagreementStats:
    """How two label matrices of the same annotation differ.

    differing_frames counts (t, k) cells that disagree;
    frame_rate_of_disagreement is that count over T*K. The histograms map
    nonzero signed boundary shifts (second matrix minus first, in frames)
    to the number of events shifted by that amount; they are empty when
    the matrices agree event-for-event or when per-event indices cannot
    be attributed.
    """

    differing_frames: int
    frame_rate_of_disagreement: float
    onset_shift_histogram: dict[int, int] = field(default_factory=dict)
    offset_shift_histogram: dict[int, int] = field(default_factory=dict)


def _check_comparable(a: LabelMatrix, b: LabelMatrix) -> None:
    if a.frames.shape != b.frames.shape:
        raise ContractError(
            f"shape mismatch: {a.frames.shape} vs {b.frames.shape}")
    if a.grid.fps != b.grid.fps:
        raise ContractError(f"frame rate mismatch: {a.grid.fps} vs {b.grid.fps}")


def framewise_counts(pred: LabelMatrix, ref: LabelMatrix) -> EvalCounts:
    """Count TP/FP/FN cells between a prediction and a reference matrix."""
    _check_comparable(pred, ref)
    p = pred.frames.astype(bool)
    r = ref.frames.astype(bool)
    tp = int(np.count_nonzero(p & r))
    fp = int(np.count_nonzero(p & ~r))
    fn_ = int(np.count_nonzero(~p & r))
    return EvalCounts(tp=tp, fp=fp, fn_=fn_)


def prf(counts: EvalCounts) -> EvalResult:
    """Precision, recall and f-measure from cell counts."""
    p_denom = counts.tp + counts.fp
    r_denom = counts.tp + counts.fn_
    precision = counts.tp / p_denom if p_denom else 0.0
    recall = counts.tp / r_denom if r_denom else 0.0
    f_denom = precision + recall
    fmeasure = 2.0 * precision * recall / f_denom if f_denom else 0.0
    return EvalResult(
        precision=precision, recall=recall, fmeasure=fmeasure, counts=counts,
        precision_defined=p_denom > 0,
        recall_defined=r_denom > 0,
        fmeasure_defined=f_denom > 0,
    )


def resample(matrix: LabelMatrix, target: FrameGrid) -> LabelMatrix:
    """Change a label matrix's frame rate by sample-and-hold.

    Target row t' copies source row min(floor(t' * src_fps / target_fps),
    T_src - 1); works for both up- and downsampling and is the identity
    when the grids match. The result carries no labeling-function
    provenance since per-event indices are only meaningful at the source
    rate.
    """
    if matrix.frames.size == 0:
        raise ContractError("cannot resample an empty matrix")
    if matrix.grid.fps == target.fps and matrix.grid.num_frames == target.num_frames:
        return LabelMatrix(frames=matrix.frames, grid=matrix.grid)
    ratio = matrix.grid.fps / target.fps
    source_rows = np.floor(np.arange(target.num_frames) * ratio).astype(np.int64)
    np.minimum(source_rows, matrix.num_frames - 1, out=source_rows)
    return LabelMatrix(frames=matrix.frames[source_rows], grid=target)


def truncate(matrix: LabelMatrix, seconds: float) -> LabelMatrix:
    """Keep only the frames inside the first `seconds` of the matrix.

    Truncating at or past the end is the identity.
    """
    if seconds <= 0:
        raise ContractError(f"window must be positive, got {seconds}")
    keep = min(matrix.num_frames, math.floor(seconds * matrix.grid.fps))
    if keep >= matrix.num_frames:
        return matrix
    return LabelMatrix(
        frames=matrix.frames[:keep],
        grid=FrameGrid(fps=matrix.grid.fps, num_frames=keep),
        labeling_function=matrix.labeling_function,
        seed=matrix.seed,
    )


def _records_for(matrix: LabelMatrix, events: Annotation,
                 ) -> tuple[QuantizedInterval, ...] | None:
    fn = matrix.labeling_function
    if fn is None:
        return None
    if fn.is_random and matrix.seed is None:
        return None
    _, records = rasterize_with_records(events, matrix.grid, fn,
                                        matrix.seed if matrix.seed is not None else 0)
    return records


def disagreement(a: LabelMatrix, b: LabelMatrix, events: Annotation,
                 records_a: tuple[QuantizedInterval, ...] | None = None,
                 records_b: tuple[QuantizedInterval, ...] | None = None,
                 ) -> DisagreementStats:
    """Quantify how two rasterizations of the same annotation differ.

    Cellwise statistics come straight from the matrices. The per-event
    onset/offset shift histograms need the per-event quantized indices;
    these are re-derived from each matrix's recorded labeling function and
    seed, or taken from explicitly passed records (as returned by
    rasterize_with_records). Without either, the histograms stay empty.
    """
    _check_comparable(a, b)
    differing = int(np.count_nonzero(a.frames != b.frames))
    rate = differing / a.frames.size if a.frames.size else 0.0

    if records_a is None:
        records_a = _records_for(a, events)
    if records_b is None:
        records_b = _records_for(b, events)

    onset_hist: Counter[int] = Counter()
    offset_hist: Counter[int] = Counter()
    if records_a is not None and records_b is not None:
        if len(records_a) != len(events.events) or len(records_b) != len(events.events):
            raise ContractError("records do not match the annotation's event count")
        for qa, qb in zip(records_a, records_b):
            d_on = qb.t_s - qa.t_s
            d_off = qb.t_e - qa.t_e
            if d_on:
                onset_hist[d_on] += 1
            if d_off:
                offset_hist[d_off] += 1

    return DisagreementStats(
        differing_frames=differing,
        frame_rate_of_disagreement=rate,
        onset_shift_histogram=dict(sorted(onset_hist.items())),
        offset_shift_histogram=dict(sorted(offset_hist.items())),
    )


def evaluate_against_reference(pred: LabelMatrix, annotation: Annotation, *,
                               window_sec: float = 30.0, ref_fps: float = 100.0,
                               reference_fn: LabelingFunction = LabelingFunction.A,
                               reference_seed: int = 0) -> EvalResult:
    """Standard evaluation protocol for a prediction matrix.

    The reference is the round-both rasterization of the annotation at
    100 fps (both configurable); the prediction is resampled to the
    reference grid, both sides are truncated to the first `window_sec`
    seconds, and framewise precision/recall/f-measure are computed.
    """
    ref_grid = FrameGrid.covering(ref_fps, annotation.duration_sec)
    ref = rasterize(annotation, ref_grid, reference_fn, reference_seed)
    pred_windowed = truncate(resample(pred, ref_grid), window_sec)
    ref_windowed = truncate(ref, window_sec)
    return prf(framewise_counts(pred_windowed, ref_windowed))
