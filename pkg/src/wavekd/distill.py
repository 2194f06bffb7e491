"""Distillation loss, exact gradients, Adam, and the training loop.

The loss compares per-frame-normalized squared magnitudes of student and
teacher; its gradient with respect to the student weights is computed in
closed form by backpropagating through the normalization, the squared
magnitude, and the (possibly parametric) strided convolution.  Gradients
never touch teacher phases: only the teacher's normalized magnitudes enter.
"""

import os
import time
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .data import corpus_hash, load_spectrogram, save_spectrogram
from .signal import Signal
from .students import ConvStudent, GaborStudent, MultiresStudent, StudentOutput
from .teachers import Spectrogram, normalize_frames, teacher_spectrogram


@dataclass(frozen=True)
class LossValue:
    """Total distillation loss plus its per-frame decomposition."""

    total: float
    per_frame: np.ndarray

    def __float__(self):
        return self.total


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    epoch_size: int = 8000
    excerpt_length: int = 4096
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    split_ratios: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split_ratios}")
        if self.epochs < 0 or self.epoch_size < 1 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0; epoch_size and batch_size >= 1")


class TrainingDiverged(RuntimeError):
    """Raised when the validation loss turns non-finite; carries the last
    finite weights and the history collected so far."""

    def __init__(self, message, weights, history):
        super().__init__(message)
        self.weights = weights
        self.history = history


def _normalize_power(power):
    norms = np.linalg.norm(power, axis=0)
    eps = 1e-12 * max(float(power.max()), np.finfo(np.float64).tiny)
    zero = norms <= eps
    safe = np.where(zero, 1.0, norms)
    return power / safe, safe, zero


def cosine_loss(student, teacher):
    """Half squared distance between frame-normalized squared magnitudes.

    Frames flagged as silent on either side contribute zero.
    """
    if isinstance(student, StudentOutput):
        power = np.abs(student.response) ** 2
    elif isinstance(student, Spectrogram):
        power = student.values
    else:
        power = np.asarray(student, dtype=float)
    teacher_norm = teacher if teacher.zero_frames is not None else normalize_frames(teacher)
    if power.shape != teacher_norm.values.shape:
        raise ValueError(
            f"shape mismatch: student {power.shape} vs teacher {teacher_norm.values.shape}"
        )
    p_norm, _, p_zero = _normalize_power(power)
    active = ~(p_zero | teacher_norm.zero_frames)
    diff = p_norm - teacher_norm.values
    per_frame = 0.5 * np.sum(diff * diff, axis=0) * active
    return LossValue(float(per_frame.sum()), per_frame)


def _loss_backward_to_response(response, teacher_norm):
    """Shared head of the backward pass: from the complex response to
    (loss, dL/dresponse) through |.|^2 and per-frame normalization."""
    power = np.abs(response) ** 2
    p_norm, safe_norms, p_zero = _normalize_power(power)
    active = ~(p_zero | teacher_norm.zero_frames)
    diff = p_norm - teacher_norm.values
    per_frame = 0.5 * np.sum(diff * diff, axis=0) * active
    g_norm = diff * active
    inner = np.sum(g_norm * p_norm, axis=0)
    g_power = (g_norm - inner * p_norm) / safe_norms * active
    g_response = 2.0 * g_power * response
    return LossValue(float(per_frame.sum()), per_frame), g_response


def _grad_conv(model, ctx, g_response):
    g_rev = g_response.real @ ctx["windows"]
    return g_rev[:, ::-1].ravel()


def _grad_gabor(model, ctx, g_response):
    windows = ctx["windows"]
    kernels = ctx["kernels"]
    # (F, 2L) complex in reversed-tap order; split into real matmuls
    g_rev = g_response.real @ windows + 1j * (g_response.imag @ windows)
    g_k = g_rev[:, ::-1]
    tau = np.arange(-model.half_length, model.half_length)
    s = g_k * np.conj(kernels)
    sigma = model.widths_[:, None]
    d_amp = np.sum(s.real, axis=1) / model.amplitudes_
    d_width = np.sum((tau[None, :] ** 2 / sigma**3 - 1.0 / sigma) * s.real, axis=1)
    d_center = np.sum(2.0 * np.pi * tau[None, :] * s.imag, axis=1)
    return np.concatenate([d_amp, d_width, d_center])


def _grad_multires(model, ctx, g_response):
    parts = []
    for j, kernels in enumerate(model.kernels_):
        if kernels.size == 0:
            continue
        rows = model._row_index[j]
        windows = ctx["windows"][j]
        g = g_response[rows]
        g_rev = g.real @ windows.real + g.imag @ windows.imag
        parts.append(g_rev[:, ::-1].ravel())
    return np.concatenate(parts)


_GRAD_DISPATCH = {
    ConvStudent: _grad_conv,
    GaborStudent: _grad_gabor,
    MultiresStudent: _grad_multires,
}


def loss_and_gradient(model, x, teacher, pyramid=None):
    """Loss value and its exact gradient with respect to the flat weights."""
    teacher_norm = teacher if teacher.zero_frames is not None else normalize_frames(teacher)
    if isinstance(model, MultiresStudent):
        response, ctx = model._forward(x, pyramid=pyramid)
    else:
        response, ctx = model._forward(x)
    if response.shape != teacher_norm.values.shape:
        raise ValueError(
            f"shape mismatch: student {response.shape} vs teacher {teacher_norm.values.shape}"
        )
    loss, g_response = _loss_backward_to_response(response, teacher_norm)
    grad = _GRAD_DISPATCH[type(model)](model, ctx, g_response)
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise FloatingPointError(f"non-finite gradient at parameter index {bad}")
    return loss, grad


def loss_gradient(model, x, teacher, pyramid=None):
    return loss_and_gradient(model, x, teacher, pyramid=pyramid)[1]


# ------------------------------------------------------------------ optimizer


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(weights, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns (new_weights, new_state)."""
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    new_w = weights - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_w, AdamState(m, v, t)


# ------------------------------------------------------------------- sampling


def split_dataset(items, ratios=(0.8, 0.1, 0.1), seed=0):
    """Disjoint, exhaustive, seed-reproducible train/val/test split.

    Validation and test sizes round to nearest; train absorbs the remainder.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1, got {ratios}")
    n = len(items)
    if n < 10:
        raise ValueError(f"need at least 10 items to split, got {n}")
    n_val = int(round(ratios[1] * n))
    n_test = int(round(ratios[2] * n))
    n_train = n - n_val - n_test
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"split of {n} items leaves an empty subset")
    order = np.random.default_rng(seed).permutation(n)
    train = [items[i] for i in order[:n_train]]
    val = [items[i] for i in order[n_train : n_train + n_val]]
    test = [items[i] for i in order[n_train + n_val :]]
    return train, val, test


def sample_excerpt(signal, length):
    """The centered window of exactly `length` samples."""
    x = signal.samples
    if len(x) < length:
        raise ValueError(f"signal has {len(x)} samples, needs {length}")
    offset = (len(x) - length) // 2
    return Signal(x[offset : offset + length], signal.sample_rate)


def excerpt_corpus(items, length):
    """Centered excerpts for every long-enough item; short ones are skipped
    with a warning."""
    out = []
    for item in items:
        try:
            out.append((item, sample_excerpt(item.signal, length)))
        except ValueError:
            warnings.warn(f"skipping {item.id}: shorter than {length} samples", stacklevel=2)
    return out


# ------------------------------------------------------------- teacher cache


class TeacherCache:
    """Normalized teacher spectrograms keyed by (teacher, excerpt) content.

    Entries live in memory; if a directory is given (or WKD_CACHE_DIR is
    set) they are mirrored to disk as WKDS containers, written once and
    content-addressed.
    """

    def __init__(self, directory=None):
        if directory is None:
            directory = os.environ.get("WKD_CACHE_DIR") or None
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory = {}

    def get(self, filterbank, item, excerpt, hop_exponent):
        key = (filterbank.content_hash(), corpus_hash(item, len(excerpt.samples)), hop_exponent)
        hit = self._memory.get(key)
        if hit is not None:
            return hit
        path = None
        if self.directory:
            path = self.directory / f"{key[0]}_{key[1]}_{key[2]}.wkds"
            if path.exists():
                norm = normalize_frames(load_spectrogram(path))
                self._memory[key] = norm
                return norm
        raw = teacher_spectrogram(filterbank, excerpt, hop_exponent)
        if path is not None and not path.exists():
            save_spectrogram(path, raw)
        norm = normalize_frames(raw)
        self._memory[key] = norm
        return norm


# -------------------------------------------------------------- training loop


def _model_hop_exponent(model):
    return model.hop_exponent


def _clamp_if_needed(model):
    if isinstance(model, GaborStudent):
        model.clamp_parameters()


def _mean_loss(model, pairs, cache, filterbank, pyramids):
    total = 0.0
    for item, excerpt in pairs:
        teacher = cache.get(filterbank, item, excerpt, model.hop_exponent)
        if isinstance(model, MultiresStudent):
            out = model.transform(excerpt.samples, pyramid=pyramids.get(item.id))
        else:
            out = model.transform(excerpt.samples)
        total += cosine_loss(out, teacher).total
    return total / len(pairs)


class Distiller(BaseEstimator):
    """Estimator facade over the training loop.

    ``fit`` splits the corpus, distills the teacher into the wrapped
    student, and records the history plus the held-out test loss;
    ``score`` returns the negative mean loss on given items (higher is
    better, sklearn-style).
    """

    def __init__(self, model=None, filterbank=None, config=None, cache_dir=None):
        self.model = model
        self.filterbank = filterbank
        self.config = config
        self.cache_dir = cache_dir

    def fit(self, items, y=None):
        if self.model is None or self.filterbank is None:
            raise ValueError("Distiller needs both a student model and a teacher filterbank")
        config = self.config or TrainConfig()
        cache = TeacherCache(self.cache_dir)
        train_items, val_items, test_items = split_dataset(
            items, config.split_ratios, config.seed
        )
        self.history_ = train(
            self.model, self.filterbank, train_items, val_items, config, cache=cache
        )
        self._cache = cache
        losses = [
            cosine_loss(
                self.model.transform(sample_excerpt(i.signal, config.excerpt_length).samples),
                cache.get(
                    self.filterbank, i,
                    sample_excerpt(i.signal, config.excerpt_length),
                    self.model.hop_exponent,
                ),
            ).total
            for i in test_items
        ]
        self.test_mean_ = float(np.mean(losses))
        self.test_std_ = float(np.std(losses))
        return self

    def transform(self, x):
        return self.model.transform(x)

    def score(self, items, y=None):
        config = self.config or TrainConfig()
        cache = getattr(self, "_cache", None) or TeacherCache(self.cache_dir)
        losses = []
        for item in items:
            excerpt = sample_excerpt(item.signal, config.excerpt_length)
            teacher = cache.get(self.filterbank, item, excerpt, self.model.hop_exponent)
            losses.append(cosine_loss(self.model.transform(excerpt.samples), teacher).total)
        return -float(np.mean(losses))


def train(model, filterbank, train_items, val_items, config, cache=None):
    """Distill the teacher into the student; returns the history list.

    The model is updated in place.  Epoch draws are uniform with
    replacement over the training excerpts; gradients are averaged per
    batch; validation loss is recorded once per epoch.  A non-finite
    validation loss restores the last finite weights and raises
    :class:`TrainingDiverged`.
    """
    cache = cache or TeacherCache()
    length = config.excerpt_length
    train_pairs = excerpt_corpus(train_items, length)
    val_pairs = excerpt_corpus(val_items, length)
    if not train_pairs:
        raise ValueError("no training item is long enough for the excerpt length")
    pyramids = {}
    if isinstance(model, MultiresStudent):
        for item, excerpt in train_pairs + val_pairs:
            pyramids[item.id] = model.pyramid(excerpt.samples)
    teachers = {
        item.id: cache.get(filterbank, item, excerpt, model.hop_exponent)
        for item, excerpt in train_pairs + val_pairs
    }

    rng = np.random.default_rng(config.seed)
    state = AdamState.zeros(model.weights.size)
    history = []
    last_finite = model.weights
    start = time.perf_counter()
    for epoch in range(config.epochs):
        draws = rng.integers(0, len(train_pairs), size=config.epoch_size)
        epoch_loss = 0.0
        for lo in range(0, config.epoch_size, config.batch_size):
            batch = draws[lo : lo + config.batch_size]
            grad = np.zeros(model.weights.size)
            batch_loss = 0.0
            try:
                for idx in batch:
                    item, excerpt = train_pairs[idx]
                    loss, g = loss_and_gradient(
                        model,
                        excerpt.samples,
                        teachers[item.id],
                        pyramid=pyramids.get(item.id),
                    )
                    grad += g
                    batch_loss += loss.total
            except FloatingPointError as exc:
                model.weights = last_finite
                raise TrainingDiverged(
                    f"training overflowed at epoch {epoch}: {exc}", last_finite, history
                ) from exc
            grad /= len(batch)
            epoch_loss += batch_loss
            new_w, state = adam_step(
                model.weights, grad, state, config.learning_rate,
                config.beta1, config.beta2, config.eps,
            )
            model.weights = new_w
            _clamp_if_needed(model)
        mean_train = epoch_loss / config.epoch_size
        mean_val = (
            _mean_loss(model, val_pairs, cache, filterbank, pyramids) if val_pairs else np.nan
        )
        if val_pairs and not np.isfinite(mean_val):
            model.weights = last_finite
            raise TrainingDiverged(
                f"validation loss became non-finite at epoch {epoch}", last_finite, history
            )
        last_finite = model.weights
        history.append(
            {
                "epoch": epoch,
                "mean_train_loss": float(mean_train),
                "mean_val_loss": float(mean_val),
                "wall_time_s": time.perf_counter() - start,
            }
        )
    return history
