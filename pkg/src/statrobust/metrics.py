"""Sampling quality, convergence and goodness-of-fit statistics.

Per-RV statistics treat disparity labels as real numbers. Batch variants
take samples with the iteration axis first and any number of trailing RV
axes, so a whole disparity field is handled in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    InsufficientChains,
    InsufficientData,
    InvalidInput,
    ShapeMismatch,
)
from .mrf import ChainTrace, label_mode

RHAT_THRESHOLD = 1.1
MIN_ESS_SAMPLES = 10


# --------------------------------------------------------------------------
# effective sample size


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Biased-normalization autocorrelation along axis 0 (lags ``0 .. N-1``)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    xc = x - x.mean(axis=0)
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, n=nfft, axis=0)
    acov = np.fft.irfft(f * np.conj(f), n=nfft, axis=0)[:n] / n
    with np.errstate(invalid="ignore", divide="ignore"):
        return acov / acov[0]


def ess_batch(samples) -> np.ndarray:
    """ESS for every RV of ``samples`` (shape ``(N, ...)``); NaN marks excluded RVs.

    The autocorrelation sum is cut at the initial positive sequence: lags
    are added in pairs ``(1, 2), (3, 4), ...`` while each pair sum stays
    positive.
    """
    x = np.asarray(samples, dtype=np.float64)
    n = x.shape[0]
    if n < MIN_ESS_SAMPLES:
        raise InsufficientData(f"ESS needs at least {MIN_ESS_SAMPLES} samples, got {n}")
    rest = x.shape[1:]
    x = x.reshape(n, -1)
    constant = np.ptp(x, axis=0) == 0
    out = np.full(x.shape[1], np.nan)
    live = ~constant
    if live.any():
        rho = autocorrelation(x[:, live])
        npairs = (n - 1) // 2
        pairs = rho[1 : 2 * npairs : 2] + rho[2 : 2 * npairs + 1 : 2]
        keep = np.cumprod(pairs > 0, axis=0).astype(bool)
        tau = 1.0 + 2.0 * np.where(keep, pairs, 0.0).sum(axis=0)
        out[live] = np.clip(n / tau, 1.0, n)
    return out.reshape(rest)


def ess(series):
    """ESS of one series, or ``None`` when the series has zero variance."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1:
        raise InvalidInput("ess expects a 1-d series")
    value = float(ess_batch(series[:, None])[0])
    return None if math.isnan(value) else value


@dataclass
class EssSummary:
    values: np.ndarray  # per RV, NaN where excluded
    active_mask: np.ndarray

    @property
    def excluded(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def mean_overall(self) -> float:
        v = self.values[~self.excluded]
        return float(v.mean()) if v.size else math.nan

    @property
    def mean_active(self) -> float:
        v = self.values[self.active_mask & ~self.excluded]
        return float(v.mean()) if v.size else math.nan


def ess_summary(samples, active_mask) -> EssSummary:
    samples = np.asarray(samples)
    active_mask = np.asarray(active_mask, dtype=bool)
    if samples.shape[1:] != active_mask.shape:
        raise ShapeMismatch(f"samples {samples.shape} vs mask {active_mask.shape}")
    return EssSummary(ess_batch(samples), active_mask)


def _window(item):
    return item.samples if isinstance(item, ChainTrace) else np.asarray(item)


def active_region(software_traces, hardware_traces) -> np.ndarray:
    """RVs that vary in every hardware run (software runs only fix the shape)."""
    sw = [_window(t) for t in software_traces]
    hw = [_window(t) for t in hardware_traces]
    if not hw:
        raise InvalidInput("need at least one hardware trace")
    shapes = {s.shape for s in sw + hw}
    if len(shapes) != 1:
        raise ShapeMismatch(f"traces disagree in shape: {sorted(shapes)}")
    active = np.ones(hw[0].shape[1:], dtype=bool)
    for s in hw:
        active &= np.ptp(s, axis=0) > 0
    return active


# --------------------------------------------------------------------------
# Gelman-Rubin


@dataclass(frozen=True)
class RhatRecord:
    between: float
    within: float
    rhat: float | None
    converged: bool


@dataclass
class RhatReport:
    """Per-RV B, W, R-hat (NaN when W = 0) and verdicts, flattened over RVs."""

    between: np.ndarray
    within: np.ndarray
    rhat: np.ndarray
    converged: np.ndarray

    def __len__(self):
        return self.converged.size

    def __getitem__(self, i) -> RhatRecord:
        r = float(self.rhat[i])
        return RhatRecord(
            float(self.between[i]),
            float(self.within[i]),
            None if math.isnan(r) else r,
            bool(self.converged[i]),
        )

    @property
    def convergence_percentage(self) -> float:
        return 100.0 * int(self.converged.sum()) / self.converged.size


def gelman_rubin_batch(chains) -> RhatReport:
    """Diagnose every RV of ``chains`` shaped ``(m, n, ...)``.

    Zero within-chain variance leaves R-hat undefined; such an RV counts as
    converged only when the chains also agree (B = 0).
    """
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim < 2 or x.shape[0] < 2:
        raise InsufficientChains("Gelman-Rubin needs at least 2 chains")
    m, n = x.shape[:2]
    if n < MIN_ESS_SAMPLES:
        raise InsufficientData(f"Gelman-Rubin needs at least {MIN_ESS_SAMPLES} draws per chain")
    x = x.reshape(m, n, -1)
    means = x.mean(axis=1)
    between = n * means.var(axis=0, ddof=1)
    within = x.var(axis=1, ddof=1).mean(axis=0)
    rhat = np.full(within.shape, np.nan)
    pos = within > 0
    rhat[pos] = np.sqrt(((n - 1) / n * within[pos] + between[pos] / n) / within[pos])
    converged = np.where(pos, rhat < RHAT_THRESHOLD, between == 0)
    return RhatReport(between, within, rhat, converged)


def gelman_rubin(chains) -> RhatRecord:
    """Single-RV diagnostic over ``m`` chains of length ``n``."""
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInput("expected an (m, n) array of chains")
    return gelman_rubin_batch(x)[0]


def convergence_percentage(chains) -> float:
    """Percent of RVs diagnosed converged; accepts samples or a ``RhatReport``."""
    report = chains if isinstance(chains, RhatReport) else gelman_rubin_batch(chains)
    if len(report) == 0:
        raise InvalidInput("no RVs")
    return report.convergence_percentage


# --------------------------------------------------------------------------
# goodness of fit


def reference_mode(end_points) -> np.ndarray:
    maps = [np.asarray(e, dtype=np.int64) for e in end_points]
    if not maps:
        raise InvalidInput("need at least one end-point map")
    if len({m.shape for m in maps}) != 1:
        raise ShapeMismatch("end-point maps differ in shape")
    stack = np.stack(maps)
    if stack.min() < 0:
        raise InvalidInput("labels must be non-negative")
    return label_mode(stack, int(stack.max()) + 1)


def r_squared(result, reference):
    """``1 - SSE / SST`` of ``result`` against ``reference``; ``None`` if SST = 0."""
    y = np.asarray(reference, dtype=np.float64)
    yhat = np.asarray(result, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ShapeMismatch(f"{yhat.shape} vs {y.shape}")
    sst = float(((y - y.mean()) ** 2).sum())
    if sst == 0:
        return None
    return 1.0 - float(((yhat - y) ** 2).sum()) / sst


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    permutations: int


def _ks_scaled(sorted_pool, labels, na, nb):
    """KS statistic times ``na * nb`` for each row of boolean ``labels`` (True = a)."""
    ends = np.flatnonzero(np.r_[sorted_pool[1:] != sorted_pool[:-1], True])
    ca = np.cumsum(labels, axis=-1)[..., ends]
    cb = (ends + 1) - ca
    return np.abs(ca * nb - cb * na).max(axis=-1)


def ks_statistic(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    pool = np.concatenate([a, b])
    order = np.argsort(pool, kind="stable")
    labels = (np.arange(pool.size) < a.size)[order]
    return int(_ks_scaled(pool[order], labels, a.size, b.size)) / (a.size * b.size)


def ks_permutation_test(a, b, permutations: int = 9999, seed=0, batch_size: int = 1000) -> KsResult:
    """Two-sample KS test with a permutation p-value ``(1 + #{D* >= D}) / (P + 1)``.

    Permutations are generated in fixed-size batches, each from its own
    child of ``SeedSequence(seed)``, so the p-value only depends on
    ``(a, b, permutations, seed, batch_size)``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise InsufficientData("each sample needs at least 2 values")
    if permutations < 100:
        raise InsufficientData("use at least 100 permutations")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInput("samples must be finite")
    na, nb = a.size, b.size
    pool = np.concatenate([a, b])
    order = np.argsort(pool, kind="stable")
    spool = pool[order]
    observed_labels = (np.arange(pool.size) < na)[order]
    observed = int(_ks_scaled(spool, observed_labels, na, nb))

    base = np.zeros(pool.size, dtype=bool)
    base[:na] = True
    n_batches = -(-permutations // batch_size)
    hits = 0
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        size = min(batch_size, permutations - i * batch_size)
        rng = np.random.default_rng(child)
        labels = rng.permuted(np.tile(base, (size, 1)), axis=1)
        hits += int((_ks_scaled(spool, labels, na, nb) >= observed).sum())
    return KsResult(observed / (na * nb), (1 + hits) / (permutations + 1), permutations)
