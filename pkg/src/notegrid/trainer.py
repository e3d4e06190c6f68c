"""Framewise multi-label classifier and the label-noise sensitivity
experiment.

The model is deliberately simple: a single linear layer with sigmoid
outputs over a flattened window of context frames, trained with
mini-batch SGD under Nesterov momentum (gradient evaluated at the
look-ahead point) and a step-wise learning-rate schedule. Being convex,
it isolates the effect of the labeling function from architecture
effects and trains in seconds per run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractError, DivergenceError
from .metrics import EvalCounts, framewise_counts, prf, resample, truncate
from .quantize import FrameGrid, LabelingFunction, LabelMatrix, rasterize
from .synth import FeatureMatrix, SynthConfig, generate_corpus, render_features
from .util import MASK64, derive_seed


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired example windows and binary targets, one row per frame."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.ascontiguousarray(self.inputs, dtype=np.float64)
        targets = np.ascontiguousarray(self.targets, dtype=np.float64)
        if inputs.ndim != 2 or targets.ndim != 2:
            raise ContractError("inputs and targets must be 2-D")
        if inputs.shape[0] != targets.shape[0]:
            raise ContractError(
                f"inputs has {inputs.shape[0]} rows, targets {targets.shape[0]}")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    @property
    def num_examples(self) -> int:
        return self.inputs.shape[0]

    @classmethod
    def concat(cls, parts: list["Dataset"]) -> "Dataset":
        if not parts:
            raise ContractError("cannot concatenate zero datasets")
        return cls(
            inputs=np.concatenate([p.inputs for p in parts]),
            targets=np.concatenate([p.targets for p in parts]),
        )


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Linear classifier parameters: weights (window_dim, K) and bias (K,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if weights.ndim != 2 or bias.ndim != 1 or weights.shape[1] != bias.shape[0]:
            raise ContractError(
                f"inconsistent parameter shapes {weights.shape} / {bias.shape}")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ContractError("parameters must be finite")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters.

    lr_schedule lists (epoch, multiplier) pairs applied at the start of
    the given epoch; None means the default step-wise schedule that
    halves the rate at 60% and 85% of the epochs. context_frames is the
    odd number of feature frames per example window.
    """

    batch_size: int = 8
    learning_rate: float = 1.0
    momentum: float = 0.9
    lr_schedule: tuple[tuple[int, float], ...] | None = None
    epochs: int = 12
    context_frames: int = 5
    threshold: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.context_frames < 1 or self.context_frames % 2 == 0:
            raise ContractError(f"context_frames must be odd, got {self.context_frames}")
        if not 0 < self.threshold < 1:
            raise ContractError(f"threshold must be in (0, 1), got {self.threshold}")
        if not 0 <= self.momentum < 1:
            raise ContractError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.learning_rate <= 0:
            raise ContractError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if self.lr_schedule is not None:
            object.__setattr__(self, "lr_schedule",
                               tuple((int(e), float(m)) for e, m in self.lr_schedule))

    def resolved_schedule(self) -> tuple[tuple[int, float], ...]:
        if self.lr_schedule is not None:
            return self.lr_schedule
        return ((math.floor(0.6 * self.epochs), 0.5),
                (math.floor(0.85 * self.epochs), 0.5))


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch full-pass losses and training f-measure at the threshold."""

    train_loss: tuple[float, ...]
    valid_loss: tuple[float, ...]
    train_fmeasure: tuple[float, ...]


def _windows(values: np.ndarray, context_frames: int) -> np.ndarray:
    """Flattened sliding windows over the rows of `values`, zero-padded at
    the edges so every frame yields one example."""
    if context_frames < 1 or context_frames % 2 == 0:
        raise ContractError(f"context_frames must be odd, got {context_frames}")
    num_frames, dim = values.shape
    pad = context_frames // 2
    if pad == 0:
        return values.copy()
    padded = np.zeros((num_frames + 2 * pad, dim))
    padded[pad:pad + num_frames] = values
    stacked = np.stack([padded[i:i + num_frames] for i in range(context_frames)], axis=1)
    return stacked.reshape(num_frames, context_frames * dim)


def make_examples(features: FeatureMatrix, labels: LabelMatrix,
                  context_frames: int) -> Dataset:
    """One example per frame: the flattened context window around frame t
    paired with label row t."""
    if features.num_frames != labels.num_frames:
        raise ContractError(
            f"features has {features.num_frames} frames, labels {labels.num_frames}")
    if features.grid.fps != labels.grid.fps:
        raise ContractError(
            f"frame rate mismatch: {features.grid.fps} vs {labels.grid.fps}")
    return Dataset(inputs=_windows(features.values, context_frames),
                   targets=labels.frames.astype(np.float64))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(params: ModelParams, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean per-label binary cross-entropy of sigmoid outputs.

    Computed from logits as softplus(z) - y*z, which is exact and stable
    for any magnitude of z.
    """
    z = inputs @ params.weights + params.bias
    return float(np.mean(np.logaddexp(0.0, z) - targets * z))


def bce_loss_and_gradient(params: ModelParams, inputs: np.ndarray,
                          targets: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus its analytic gradient with respect to weights and bias."""
    z = inputs @ params.weights + params.bias
    loss = float(np.mean(np.logaddexp(0.0, z) - targets * z))
    residual = (_sigmoid(z) - targets) / targets.size
    grad_w = inputs.T @ residual
    grad_b = residual.sum(axis=0)
    return loss, grad_w, grad_b


def _init_params(dim: int, num_labels: int, seed: int) -> ModelParams:
    rng = np.random.default_rng([seed & MASK64, 0])
    return ModelParams(weights=rng.normal(0.0, 0.01, size=(dim, num_labels)),
                       bias=np.zeros(num_labels))


def _fmeasure_at_threshold(weights, bias, inputs, targets, threshold) -> float:
    predicted = _sigmoid(inputs @ weights + bias) >= threshold
    actual = targets >= 0.5
    tp = int(np.count_nonzero(predicted & actual))
    fp = int(np.count_nonzero(predicted & ~actual))
    fn_ = int(np.count_nonzero(~predicted & actual))
    return prf(EvalCounts(tp=tp, fp=fp, fn_=fn_)).fmeasure


def train(train_set: Dataset, valid_set: Dataset,
          cfg: TrainConfig) -> tuple[ModelParams, TrainHistory]:
    """Train the linear classifier with Nesterov-momentum mini-batch SGD.

    Weights start from seeded N(0, 0.01), bias from zero. Each epoch
    shuffles the examples (stream seeded by cfg.seed), walks them in
    batches of cfg.batch_size, and evaluates the gradient at the momentum
    look-ahead point. The learning rate is multiplied per schedule entry
    at the start of the named epoch. History records full-pass train and
    validation losses and the training f-measure after each epoch.
    Everything is deterministic for a fixed cfg.

    Raises DivergenceError (with epoch and batch) if a batch loss goes
    non-finite.
    """
    if train_set.num_examples == 0 or valid_set.num_examples == 0:
        raise ContractError("train and valid sets must be non-empty")
    if train_set.inputs.shape[1] != valid_set.inputs.shape[1]:
        raise ContractError("train and valid input dimensions differ")

    dim = train_set.inputs.shape[1]
    num_labels = train_set.targets.shape[1]
    params = _init_params(dim, num_labels, cfg.seed)
    if cfg.epochs == 0:
        return params, TrainHistory((), (), ())

    weights = params.weights.copy()
    bias = params.bias.copy()
    velocity_w = np.zeros_like(weights)
    velocity_b = np.zeros_like(bias)
    shuffle_rng = np.random.default_rng([cfg.seed & MASK64, 1])
    schedule = cfg.resolved_schedule()

    lr = cfg.learning_rate
    mu = cfg.momentum
    n = train_set.num_examples
    train_losses, valid_losses, train_fs = [], [], []
    for epoch in range(cfg.epochs):
        for at_epoch, multiplier in schedule:
            if at_epoch == epoch:
                lr *= multiplier
        order = shuffle_rng.permutation(n)
        for batch_index, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            x = train_set.inputs[idx]
            y = train_set.targets[idx]
            look_w = weights + mu * velocity_w
            look_b = bias + mu * velocity_b
            z = x @ look_w + look_b
            batch_loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
            if not math.isfinite(batch_loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}",
                    epoch=epoch, batch=batch_index)
            residual = (_sigmoid(z) - y) / y.size
            velocity_w = mu * velocity_w - lr * (x.T @ residual)
            velocity_b = mu * velocity_b - lr * residual.sum(axis=0)
            weights = weights + velocity_w
            bias = bias + velocity_b

        epoch_params = ModelParams(weights=weights, bias=bias)
        train_losses.append(bce_loss(epoch_params, train_set.inputs, train_set.targets))
        valid_losses.append(bce_loss(epoch_params, valid_set.inputs, valid_set.targets))
        train_fs.append(_fmeasure_at_threshold(
            weights, bias, train_set.inputs, train_set.targets, cfg.threshold))

    return (ModelParams(weights=weights, bias=bias),
            TrainHistory(tuple(train_losses), tuple(valid_losses), tuple(train_fs)))


def predict(params: ModelParams, features: FeatureMatrix, context_frames: int,
            threshold: float = 0.5) -> LabelMatrix:
    """Thresholded sigmoid outputs per frame as a LabelMatrix.

    The decision rule is sigmoid(window @ W + b) >= threshold; with
    all-zero parameters and the default threshold every cell is active,
    since sigmoid(0) = 0.5.
    """
    windows = _windows(features.values, context_frames)
    if windows.shape[1] != params.weights.shape[0]:
        raise ContractError(
            f"window dimension {windows.shape[1]} does not match weights "
            f"{params.weights.shape[0]}")
    active = _sigmoid(windows @ params.weights + params.bias) >= threshold
    return LabelMatrix(frames=active.astype(np.uint8), grid=features.grid)


@dataclass(frozen=True)
class ExperimentRow:
    """Evaluation of one (labeling function, seed) cell on one split."""

    fn: LabelingFunction
    seed: int
    split: str
    precision: float
    recall: float
    fmeasure: float


@dataclass(frozen=True)
class ExperimentTable:
    """All rows of a sensitivity experiment plus per-function aggregates."""

    rows: tuple[ExperimentRow, ...]

    def per_seed_fmeasures(self, fn: LabelingFunction) -> list[float]:
        return [r.fmeasure for r in self.rows if r.fn is fn]

    def mean_fmeasure(self, fn: LabelingFunction) -> float:
        values = self.per_seed_fmeasures(fn)
        if not values:
            raise ContractError(f"no rows for labeling function {fn.letter}")
        return sum(values) / len(values)

    def summary(self) -> dict:
        ordered_fns = []
        for row in self.rows:
            if row.fn not in ordered_fns:
                ordered_fns.append(row.fn)
        return {
            fn.letter: {
                "mean_f": self.mean_fmeasure(fn),
                "per_seed_f": self.per_seed_fmeasures(fn),
            }
            for fn in ordered_fns
        }


def _split_indices(num_pieces: int) -> tuple[range, range, range]:
    """60/20/20 train/valid/test split by piece index."""
    n_train = math.floor(0.6 * num_pieces)
    n_valid = math.floor(0.2 * num_pieces)
    n_test = num_pieces - n_train - n_valid
    if n_train < 1 or n_valid < 1 or n_test < 1:
        raise ContractError(
            f"{num_pieces} pieces cannot be split 60/20/20 with one piece per split")
    return (range(0, n_train),
            range(n_train, n_train + n_valid),
            range(n_train + n_valid, num_pieces))


def run_sensitivity_experiment(synth_cfg: SynthConfig,
                               fns: list[LabelingFunction],
                               train_grid: FrameGrid,
                               eval_grid: FrameGrid,
                               train_cfg: TrainConfig,
                               seeds: list[int], *,
                               window_sec: float = 30.0,
                               reference_fn: LabelingFunction = LabelingFunction.A,
                               ) -> ExperimentTable:
    """Measure how the labeling function alone changes test f-measure.

    For each seed, one synthetic corpus is generated and split 60/20/20
    into train/valid/test by piece; features, splits, and model
    initialization are shared across labeling functions, so within a seed
    the only varying factor is how training targets were quantized. Each
    trained model predicts on the test pieces; predictions are resampled
    to eval_grid, truncated to the evaluation window, and scored against
    the reference rasterization (round-both on eval_grid).

    Returns one test row per (fn, seed). DivergenceError from training is
    re-raised annotated with the failing (fn, seed).
    """
    if not fns:
        raise ContractError("fns must be non-empty")
    if not seeds:
        raise ContractError("seeds must be non-empty")

    rows = []
    for seed in seeds:
        corpus_cfg = replace(synth_cfg, seed=derive_seed(synth_cfg.seed, seed))
        corpus = generate_corpus(corpus_cfg)
        train_idx, valid_idx, test_idx = _split_indices(len(corpus))
        features = [render_features(piece, train_grid, corpus_cfg, noise_seed=i)
                    for i, piece in enumerate(corpus)]
        window_inputs = [_windows(f.values, train_cfg.context_frames) for f in features]
        cfg_seeded = replace(train_cfg, seed=derive_seed(train_cfg.seed, seed))

        references = {
            i: truncate(rasterize(corpus[i], eval_grid, reference_fn, 0), window_sec)
            for i in test_idx
        }

        for fn in fns:
            def targets_for(i: int) -> np.ndarray:
                labels = rasterize(corpus[i], train_grid, fn, derive_seed(seed, i))
                return labels.frames.astype(np.float64)

            train_set = Dataset(
                inputs=np.concatenate([window_inputs[i] for i in train_idx]),
                targets=np.concatenate([targets_for(i) for i in train_idx]))
            valid_set = Dataset(
                inputs=np.concatenate([window_inputs[i] for i in valid_idx]),
                targets=np.concatenate([targets_for(i) for i in valid_idx]))
            try:
                params, _ = train(train_set, valid_set, cfg_seeded)
            except DivergenceError as exc:
                raise DivergenceError(
                    f"fn={fn.letter} seed={seed}: {exc}",
                    epoch=exc.epoch, batch=exc.batch) from exc

            tp = fp = fn_count = 0
            for i in test_idx:
                pred = predict(params, features[i], train_cfg.context_frames,
                               train_cfg.threshold)
                pred_windowed = truncate(resample(pred, eval_grid), window_sec)
                counts = framewise_counts(pred_windowed, references[i])
                tp += counts.tp
                fp += counts.fp
                fn_count += counts.fn_

            result = prf(EvalCounts(tp=tp, fp=fp, fn_=fn_count))
            rows.append(ExperimentRow(
                fn=fn, seed=seed, split="test",
                precision=result.precision, recall=result.recall,
                fmeasure=result.fmeasure))

    return ExperimentTable(rows=tuple(rows))
