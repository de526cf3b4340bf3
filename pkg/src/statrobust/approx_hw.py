"""Bit-exact model of an approximate hardware sampler.

The simulated datapath normalizes Boltzmann weights so the largest is 1.0,
rounds them onto an unsigned fixed-point grid, zeroes anything under a
truncation threshold, and picks a label by comparing an LFSR-derived
uniform against the integer cumulative sums.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Pmf
from .errors import DegenerateDistribution, InvalidInput, InvalidState

# x^19 + x^18 + x^17 + x^14 + 1
TAPS_19 = (19, 18, 17, 14)

# one maximal-length tap set per width, used when only a width is given
MAXIMAL_TAPS = {
    2: (2, 1),
    3: (3, 2),
    4: (4, 3),
    5: (5, 3),
    6: (6, 5),
    7: (7, 6),
    8: (8, 6, 5, 4),
    9: (9, 5),
    10: (10, 7),
    11: (11, 9),
    12: (12, 6, 4, 1),
    13: (13, 4, 3, 1),
    14: (14, 5, 3, 1),
    15: (15, 14),
    16: (16, 15, 13, 4),
    17: (17, 14),
    18: (18, 11),
    19: TAPS_19,
    20: (20, 17),
}


@dataclass(frozen=True)
class FixedPointFormat:
    total_bits: int = 9
    fraction_bits: int = 8

    def __post_init__(self):
        if not 2 <= self.total_bits <= 32:
            raise InvalidInput(f"total_bits must be in [2, 32], got {self.total_bits}")
        if not 0 <= self.fraction_bits <= self.total_bits:
            raise InvalidInput(
                f"fraction_bits must be in [0, total_bits], got {self.fraction_bits}"
            )

    @property
    def scale(self) -> int:
        return 1 << self.fraction_bits

    @property
    def max_code(self) -> int:
        return (1 << self.total_bits) - 1


def tap_mask(width: int, taps) -> int:
    """Bit mask selecting the tapped stages; tap ``t`` reads bit ``width - t``."""
    mask = 0
    for t in taps:
        if not 1 <= t <= width:
            raise InvalidInput(f"tap {t} outside 1..{width}")
        mask |= 1 << (width - t)
    return mask


@dataclass(frozen=True)
class Lfsr:
    """Fibonacci LFSR: shift right, feedback parity enters at the top bit."""

    width: int = 19
    taps: tuple = TAPS_19
    state: int = 1

    def __post_init__(self):
        if not 2 <= self.width <= 32:
            raise InvalidInput(f"LFSR width must be in [2, 32], got {self.width}")
        object.__setattr__(self, "taps", tuple(sorted(set(self.taps), reverse=True)))
        tap_mask(self.width, self.taps)
        if not 0 <= self.state < (1 << self.width):
            raise InvalidState(f"state {self.state} does not fit in {self.width} bits")

    @property
    def period(self) -> int:
        return (1 << self.width) - 1


def lfsr_step_state(state: int, width: int, mask: int) -> int:
    fb = (state & mask).bit_count() & 1
    return (state >> 1) | (fb << (width - 1))


def lfsr_next(lfsr: Lfsr) -> tuple[Lfsr, float]:
    """Advance one step; the uniform is ``new_state / 2**width``."""
    if lfsr.state == 0:
        raise InvalidState("LFSR state is all zeros (absorbing)")
    new = lfsr_step_state(lfsr.state, lfsr.width, tap_mask(lfsr.width, lfsr.taps))
    return Lfsr(lfsr.width, lfsr.taps, new), new / (1 << lfsr.width)


def lfsr_period(lfsr: Lfsr) -> int:
    """Number of steps until the starting state recurs (walks the cycle)."""
    if lfsr.state == 0:
        raise InvalidState("LFSR state is all zeros (absorbing)")
    mask = tap_mask(lfsr.width, lfsr.taps)
    start = s = lfsr.state
    for n in range(1, 1 << lfsr.width):
        s = lfsr_step_state(s, lfsr.width, mask)
        if s == start:
            return n
    raise InvalidState("LFSR did not return to its start state")


def fresh_word_steps(width: int) -> int:
    """Fewest shifts (>= width) between draws that still walk the whole period.

    Successive draws then share no register bits; a single shift per draw
    would make each uniform roughly half the previous one plus a fresh bit.
    """
    period = (1 << width) - 1
    steps = width
    while math.gcd(steps, period) != 1:
        steps += 1
    return steps


@dataclass(frozen=True)
class ApproxConfig:
    format: FixedPointFormat = field(default_factory=FixedPointFormat)
    truncation_threshold: float = 2.0**-8
    lfsr_width: int = 19
    lfsr_taps: tuple = TAPS_19
    lfsr_seed: int = 1
    steps_per_draw: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "lfsr_taps", tuple(int(t) for t in self.lfsr_taps))
        period = (1 << self.lfsr_width) - 1
        if self.steps_per_draw is None:
            object.__setattr__(self, "steps_per_draw", fresh_word_steps(self.lfsr_width))
        if self.steps_per_draw < 1 or math.gcd(self.steps_per_draw, period) != 1:
            raise InvalidInput(
                f"steps_per_draw={self.steps_per_draw} must be >= 1 and coprime to "
                f"the LFSR period {period}, or draws would not cover every state"
            )
        if not self.truncation_threshold >= 0:
            raise InvalidInput("truncation_threshold must be >= 0")
        code = self.truncation_threshold * self.format.scale
        if code != math.floor(code):
            raise InvalidInput(
                f"truncation_threshold {self.truncation_threshold!r} is not "
                f"representable with {self.format.fraction_bits} fraction bits"
            )
        Lfsr(self.lfsr_width, self.lfsr_taps, 1)
        if not 0 < self.lfsr_seed:
            raise InvalidState("lfsr_seed must be a positive integer")

    @property
    def threshold_code(self) -> int:
        return int(self.truncation_threshold * self.format.scale)

    def lfsr(self, stream: int | None = None) -> Lfsr:
        """Initial LFSR; ``stream`` (e.g. a chain seed) selects a distinct start state."""
        period = (1 << self.lfsr_width) - 1
        if stream is None:
            state = (self.lfsr_seed - 1) % period + 1
        else:
            mixed = np.random.SeedSequence([self.lfsr_seed, int(stream)])
            state = int(mixed.generate_state(1, np.uint64)[0] % period) + 1
        return Lfsr(self.lfsr_width, self.lfsr_taps, state)

    def to_dict(self) -> dict:
        return {
            "total_bits": self.format.total_bits,
            "fraction_bits": self.format.fraction_bits,
            "truncation_threshold": self.truncation_threshold,
            "lfsr_width": self.lfsr_width,
            "lfsr_taps": list(self.lfsr_taps),
            "lfsr_seed": self.lfsr_seed,
            "steps_per_draw": self.steps_per_draw,
            "rounding": "nearest-even",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ApproxConfig":
        d = dict(d)
        d.pop("rounding", None)
        fmt = FixedPointFormat(
            int(d.pop("total_bits", 9)), int(d.pop("fraction_bits", 8))
        )
        width = int(d.pop("lfsr_width", 19))
        taps = d.pop("lfsr_taps", None)
        if taps is None:
            if width not in MAXIMAL_TAPS:
                raise InvalidInput(f"no default taps for width {width}; give lfsr_taps")
            taps = MAXIMAL_TAPS[width]
        thr = float(d.pop("truncation_threshold", 2.0**-8))
        seed = int(d.pop("lfsr_seed", 1))
        steps = d.pop("steps_per_draw", None)
        if d:
            raise InvalidInput(f"unknown approx config keys: {sorted(d)}")
        return cls(fmt, thr, width, tuple(taps), seed, None if steps is None else int(steps))


def boltzmann_weights(energies, temperature: float) -> np.ndarray:
    """Unnormalized weights scaled so the largest is exactly 1.0."""
    e = np.asarray(energies, dtype=np.float64)
    if e.ndim != 1 or e.size == 0:
        raise InvalidInput("energies must be a non-empty vector")
    if not np.all(np.isfinite(e)):
        raise InvalidInput("energies must be finite")
    if not temperature > 0:
        raise InvalidInput("temperature must be positive")
    emin = e.min()
    # scalar libm exp, so the compiled chain kernel reproduces it bit for bit
    return np.array([math.exp(-(x - emin) / temperature) for x in e])


def quantize_weights(weights, config: ApproxConfig) -> np.ndarray:
    """Integer fixed-point codes (value = code / 2**fraction_bits).

    Weights are rescaled so the largest maps to 1.0, rounded to nearest
    (ties to even), saturated at the format maximum, then codes below the
    truncation threshold are zeroed.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidInput("weights must be a non-empty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInput("weights must be finite and non-negative")
    wmax = w.max()
    if wmax == 0:
        raise DegenerateDistribution("all weights are zero")
    if wmax != 1.0:
        w = w / wmax
    fmt = config.format
    codes = np.minimum(np.rint(w * fmt.scale), fmt.max_code).astype(np.int64)
    codes[codes < config.threshold_code] = 0
    if not codes.any():
        raise DegenerateDistribution("every weight quantized or truncated to zero")
    return codes


def _select(codes: np.ndarray, state: int, width: int) -> int:
    cum = np.cumsum(codes)
    lhs = state * int(cum[-1])
    for i, c in enumerate(cum):
        if lhs <= int(c) << width:
            return i
    raise AssertionError("uniform fell past the last interval")


def sample_approx(energies, temperature: float, config: ApproxConfig, lfsr: Lfsr):
    """One hardware draw; returns ``(index, advanced_lfsr)``.

    The LFSR advances ``config.steps_per_draw`` times and its final state is
    the uniform numerator.
    """
    codes = quantize_weights(boltzmann_weights(energies, temperature), config)
    for _ in range(config.steps_per_draw):
        lfsr, _ = lfsr_next(lfsr)
    return _select(codes, lfsr.state, lfsr.width), lfsr


def effective_hw_counts(energies, temperature: float, config: ApproxConfig) -> np.ndarray:
    """How many of the ``2**width - 1`` LFSR states select each index."""
    codes = quantize_weights(boltzmann_weights(energies, temperature), config)
    width = config.lfsr_width
    top = (1 << width) - 1
    cum = np.cumsum(codes)
    total = int(cum[-1])
    # states s in [1, top] with s * total <= c * 2**width
    below = [min((int(c) << width) // total, top) for c in cum]
    return np.diff(np.array([0] + below, dtype=np.int64))


def effective_hw_pmf(energies, temperature: float, config: ApproxConfig) -> Pmf:
    counts = effective_hw_counts(energies, temperature, config)
    return Pmf(counts / ((1 << config.lfsr_width) - 1))
