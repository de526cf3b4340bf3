"""Stereo MRF and its Gibbs chain runner.

Energy of a disparity field ``f``::

    E(f) = sum_p min(|L(p) - R(p - f_p)|, kappa)
         + lam * sum_{p~q} min(|f_p - f_q|, tau)

over 4-connected neighbour pairs. Each sweep visits pixels in raster order
and redraws the label from ``exp(-E_p(d) / T)`` using either the exact
64-bit sampler or the simulated hardware sampler.
"""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .approx_hw import ApproxConfig, tap_mask
from .errors import InvalidInput, ShapeMismatch


@dataclass(frozen=True, eq=False)
class StereoMrf:
    left: np.ndarray
    right: np.ndarray
    disparity_levels: int = 16
    data_truncation: float = 20.0
    smoothness_weight: float = 2.0
    smoothness_truncation: float = 2.0

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.float64)
        right = np.asarray(self.right, dtype=np.float64)
        if left.ndim != 2 or left.shape != right.shape:
            raise ShapeMismatch(
                f"left {left.shape} and right {right.shape} must be equal 2-d shapes"
            )
        if not 2 <= self.disparity_levels <= min(left.shape[1], 256):
            raise InvalidInput(
                f"disparity_levels must be in [2, min(width, 256)], got {self.disparity_levels}"
            )
        if self.smoothness_weight < 0 or self.smoothness_truncation < 1:
            raise InvalidInput("need smoothness_weight >= 0 and smoothness_truncation >= 1")
        if not self.data_truncation >= 0:
            raise InvalidInput("data_truncation must be >= 0")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def shape(self):
        return self.left.shape

    def data_costs(self) -> np.ndarray:
        return _kernels.data_costs(
            self.left, self.right, self.disparity_levels, float(self.data_truncation)
        )

    def digest(self) -> dict:
        h = hashlib.sha256()
        h.update(self.left.tobytes())
        h.update(self.right.tobytes())
        return {
            "images_sha256": h.hexdigest(),
            "shape": list(self.shape),
            "disparity_levels": self.disparity_levels,
            "data_truncation": self.data_truncation,
            "smoothness_weight": self.smoothness_weight,
            "smoothness_truncation": self.smoothness_truncation,
        }


class Mode(str, enum.Enum):
    PURE = "pure"
    ANNEAL = "anneal"


@dataclass(frozen=True)
class ChainConfig:
    iterations: int
    record_window: int
    mode: Mode = Mode.PURE
    initial_temperature: float = 1.0
    cooling_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.iterations < 1:
            raise InvalidInput("iterations must be positive")
        if not 1 <= self.record_window <= self.iterations:
            raise InvalidInput("record_window must be in [1, iterations]")
        if not self.initial_temperature > 0:
            raise InvalidInput("initial_temperature must be positive")
        if not 0 < self.cooling_rate <= 1:
            raise InvalidInput("cooling_rate must be in (0, 1]")
        if self.seed < 0:
            raise InvalidInput("seed must be non-negative")

    def temperature(self, sweep: int) -> float:
        if self.mode is Mode.PURE:
            return 1.0
        return self.initial_temperature * self.cooling_rate**sweep

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "record_window": self.record_window,
            "mode": self.mode.value,
            "initial_temperature": self.initial_temperature,
            "cooling_rate": self.cooling_rate,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ExactSampler:
    kind = "exact"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class ApproxSampler:
    config: ApproxConfig = field(default_factory=ApproxConfig)
    kind = "approx"

    def to_dict(self):
        return {"kind": self.kind, **self.config.to_dict()}


@dataclass
class ChainTrace:
    """Labels of the recorded sweeps, shape ``(window, height, width)``."""

    samples: np.ndarray
    disparity_levels: int
    first_sweep: int
    seed: int
    sampler_kind: str
    config_hash: str
    degenerate_count: int = 0

    @property
    def window(self) -> int:
        return self.samples.shape[0]

    @property
    def shape(self):
        return self.samples.shape[1:]

    @property
    def iterations(self) -> int:
        return self.first_sweep + self.window

    def sweeps(self, start: int, stop: int) -> np.ndarray:
        """Recorded labels for absolute sweep indices ``[start, stop)``."""
        lo, hi = start - self.first_sweep, stop - self.first_sweep
        if lo < 0 or hi > self.window or lo >= hi:
            raise InvalidInput(
                f"sweeps [{start}, {stop}) not inside recorded "
                f"[{self.first_sweep}, {self.iterations})"
            )
        return self.samples[lo:hi]


def config_hash(model: StereoMrf, config: ChainConfig, sampler) -> str:
    blob = json.dumps(
        {"model": model.digest(), "chain": config.to_dict(), "sampler": sampler.to_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


def conditional_energies(model: StereoMrf, state, pixel) -> np.ndarray:
    """Energy of every label at ``pixel`` with all other labels held fixed."""
    state = np.asarray(state)
    if state.shape != model.shape:
        raise ShapeMismatch(f"state {state.shape} vs model {model.shape}")
    r, c = pixel
    h, w = model.shape
    if not (0 <= r < h and 0 <= c < w):
        raise InvalidInput(f"pixel {pixel} outside {h}x{w}")
    d = np.arange(model.disparity_levels)
    out = np.full(d.size, float(model.data_truncation))
    ok = c - d >= 0
    diff = np.abs(model.left[r, c] - model.right[r, c - d[ok]])
    out[ok] = np.minimum(diff, model.data_truncation)
    smooth = np.zeros(d.size)
    for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
        if 0 <= rr < h and 0 <= cc < w:
            smooth += np.minimum(np.abs(d - state[rr, cc]), model.smoothness_truncation)
    return out + model.smoothness_weight * smooth


def total_energy(model: StereoMrf, state) -> float:
    state = np.asarray(state, dtype=np.int64)
    costs = model.data_costs()
    rows, cols = np.indices(model.shape)
    e = costs[rows, cols, state].sum()
    tau = model.smoothness_truncation
    e += model.smoothness_weight * (
        np.minimum(np.abs(np.diff(state, axis=0)), tau).sum()
        + np.minimum(np.abs(np.diff(state, axis=1)), tau).sum()
    )
    return float(e)


def initial_state(model: StereoMrf, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, model.disparity_levels, size=model.shape, dtype=np.int64)


def run_chain(model: StereoMrf, config: ChainConfig, sampler=None, initial=None) -> ChainTrace:
    """Run ``config.iterations`` sweeps and keep the last ``record_window`` of them.

    The labels are initialized uniformly at random from ``config.seed``; the
    same generator then feeds the exact sampler one uniform per pixel visit.
    The hardware sampler instead draws from an LFSR whose start state is
    derived from ``(lfsr_seed, config.seed)``. A run of ``n`` sweeps is a
    prefix of any longer run with the same seed.
    """
    sampler = sampler if sampler is not None else ExactSampler()
    rng = np.random.default_rng(config.seed)
    labels = initial_state(model, rng)
    if initial is not None:
        labels = np.array(initial, dtype=np.int64)
        if labels.shape != model.shape:
            raise ShapeMismatch("initial state shape differs from model")
    costs = model.data_costs()
    lam = float(model.smoothness_weight)
    tau = float(model.smoothness_truncation)
    h, w = model.shape
    first = config.iterations - config.record_window
    samples = np.empty((config.record_window, h, w), dtype=np.uint8)
    degenerate = 0

    if isinstance(sampler, ApproxSampler):
        ac = sampler.config
        state = ac.lfsr(stream=config.seed).state
        mask = tap_mask(ac.lfsr_width, ac.lfsr_taps)
        step_args = (ac.lfsr_width, mask, ac.format.scale, ac.format.max_code, ac.threshold_code,
                     ac.steps_per_draw)
    elif not isinstance(sampler, ExactSampler):
        raise InvalidInput(f"unknown sampler {sampler!r}")

    for t in range(config.iterations):
        temp = config.temperature(t)
        if isinstance(sampler, ExactSampler):
            _kernels.sweep_exact(costs, labels, lam, tau, temp, rng.random(h * w))
        else:
            state, deg = _kernels.sweep_approx(costs, labels, lam, tau, temp, state, *step_args)
            degenerate += int(deg)
        if t >= first:
            samples[t - first] = labels

    return ChainTrace(
        samples=samples,
        disparity_levels=model.disparity_levels,
        first_sweep=first,
        seed=config.seed,
        sampler_kind=sampler.kind,
        config_hash=config_hash(model, config, sampler),
        degenerate_count=degenerate,
    )


def label_mode(stack: np.ndarray, n_labels: int) -> np.ndarray:
    """Per-pixel most frequent label along axis 0; ties go to the smaller label."""
    stack = np.asarray(stack)
    counts = np.stack([(stack == d).sum(axis=0) for d in range(n_labels)])
    return counts.argmax(axis=0)


def end_point(trace: ChainTrace) -> np.ndarray:
    if trace.window == 0:
        raise InvalidInput("trace has no recorded sweeps")
    return label_mode(trace.samples, trace.disparity_levels)


def bad_pixel_percentage(disparity, ground_truth, threshold: float = 1.0, valid_mask=None) -> float:
    disparity = np.asarray(disparity, dtype=np.float64)
    ground_truth = np.asarray(ground_truth, dtype=np.float64)
    if disparity.shape != ground_truth.shape:
        raise ShapeMismatch(f"{disparity.shape} vs {ground_truth.shape}")
    valid = np.ones(disparity.shape, bool) if valid_mask is None else np.asarray(valid_mask, bool)
    if valid.shape != disparity.shape:
        raise ShapeMismatch("valid_mask shape differs")
    n = int(valid.sum())
    if n == 0:
        raise InvalidInput("no valid pixels")
    bad = np.abs(disparity - ground_truth) > threshold
    return 100.0 * int((bad & valid).sum()) / n
