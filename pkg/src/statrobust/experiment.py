"""Software / software+noise / hardware chain ensembles and their reports.

``run_experiment`` only produces trace files; every number in the report
is then computed from those files by ``report_from_dir``, so a later
``report`` invocation reproduces the run-time outputs exactly.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .approx_hw import ApproxConfig, FixedPointFormat, effective_hw_pmf
from .config import ExperimentConfig, FileInput, config_from_dict
from .distributions import js_divergence, pmf_from_energies
from .errors import ConfigError, DegenerateDistribution, ParseError, StatRobustError
from .ingest import (
    GroundTruth,
    add_gaussian_noise,
    centered_region,
    load_ground_truth,
    load_pgm,
    make_random_dot_stereogram,
)
from .metrics import (
    active_region,
    ess_batch,
    gelman_rubin_batch,
    ks_permutation_test,
    r_squared,
    reference_mode,
)
from .mrf import (
    ApproxSampler,
    ChainConfig,
    ExactSampler,
    StereoMrf,
    bad_pixel_percentage,
    config_hash,
    label_mode,
    run_chain,
)
from .traces import read_trace, write_trace

log = logging.getLogger(__name__)

ARMS = ("software", "noise", "hardware")
CONFIG_ECHO = "config.json"


class TraceError(StatRobustError):
    pass


# --------------------------------------------------------------------------
# inputs and jobs


def build_inputs(cfg: ExperimentConfig):
    src = cfg.input
    D = cfg.model.disparity_levels
    if isinstance(src, FileInput):
        left, right = load_pgm(src.left), load_pgm(src.right)
        gt = load_ground_truth(src.ground_truth, src.gt_scale, D) if src.ground_truth else None
        return left, right, gt
    region = centered_region(src.width, src.height, src.region_disparity)
    return make_random_dot_stereogram(
        src.width, src.height, D, region, src.seed, levels=tuple(src.levels)
    )


def build_model(cfg: ExperimentConfig, left, right) -> StereoMrf:
    m = cfg.model
    return StereoMrf(
        left.pixels, right.pixels, m.disparity_levels,
        m.data_truncation, m.smoothness_weight, m.smoothness_truncation,
    )


def total_iterations(cfg: ExperimentConfig) -> int:
    return int(math.ceil(max(cfg.metrics.checkpoints) * cfg.chain.iterations))


def run_seed(cfg: ExperimentConfig, run: int, seed_offset: int) -> int:
    return cfg.chain.seed + seed_offset + run


def trace_name(arm: str, run: int, seed: int) -> str:
    return f"{arm}_run{run:03d}_seed{seed}.trace"


def _noise_seeds(seed: int):
    return [np.random.SeedSequence([seed, 0x6E6F6973, side]) for side in (0, 1)]


def arm_setup(cfg: ExperimentConfig, arm: str, run: int, seed_offset: int, inputs=None):
    """Model, chain config and sampler of one run; noise is redrawn per run."""
    left, right, _ = inputs if inputs is not None else build_inputs(cfg)
    seed = run_seed(cfg, run, seed_offset)
    if arm == "noise":
        ls, rs = _noise_seeds(seed)
        sigma = cfg.metrics.noise_sigma
        left, right = add_gaussian_noise(left, sigma, ls), add_gaussian_noise(right, sigma, rs)
    model = build_model(cfg, left, right)
    c = cfg.chain
    n = total_iterations(cfg)
    chain = ChainConfig(n, n, c.mode, c.initial_temperature, c.cooling_rate, seed)
    sampler = ApproxSampler(cfg.approx) if arm == "hardware" else ExactSampler()
    return model, chain, sampler


def _run_job(job):
    cfg_dict, arm, run, seed_offset, path = job
    cfg = config_from_dict(cfg_dict)
    model, chain, sampler = arm_setup(cfg, arm, run, seed_offset)
    trace = run_chain(model, chain, sampler)
    write_trace(trace, path)
    return path


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int | None = None,
                   seed_offset: int = 0) -> dict:
    out = Path(out_dir)
    tdir = out / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    echo = {"config": cfg.to_dict(), "seed_offset": seed_offset}
    (out / CONFIG_ECHO).write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    cfg_dict = cfg.to_dict()
    jobs = []
    for arm in ARMS:
        for run in range(cfg.runs):
            seed = run_seed(cfg, run, seed_offset)
            jobs.append((cfg_dict, arm, run, seed_offset, str(tdir / trace_name(arm, run, seed))))
    workers = workers or cfg.workers
    log.info("running %d chains of %d sweeps on %d worker(s)",
             len(jobs), total_iterations(cfg), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_job, jobs))
    else:
        for job in jobs:
            _run_job(job)
    return report_from_dir(out)


# --------------------------------------------------------------------------
# analysis


def load_experiment(trace_dir):
    """Config echo plus every expected trace, validated against the config."""
    d = Path(trace_dir)
    echo_path = d / CONFIG_ECHO
    if not echo_path.is_file():
        raise TraceError(f"{d}: no {CONFIG_ECHO}; not an experiment directory")
    try:
        echo = json.loads(echo_path.read_text())
        cfg = config_from_dict(echo["config"])
        seed_offset = int(echo.get("seed_offset", 0))
    except (json.JSONDecodeError, KeyError) as exc:
        raise TraceError(f"{echo_path}: corrupt config echo ({exc})") from None
    inputs = build_inputs(cfg)
    n = total_iterations(cfg)
    traces, files = {}, []
    for arm in ARMS:
        traces[arm] = []
        for run in range(cfg.runs):
            seed = run_seed(cfg, run, seed_offset)
            path = d / "traces" / trace_name(arm, run, seed)
            if not path.is_file():
                raise TraceError(f"missing {arm} trace for seed {seed}: {path}")
            data = path.read_bytes()
            try:
                trace = read_trace(path)
            except ParseError as exc:
                raise TraceError(f"corrupt trace {path}: {exc}") from None
            model, chain, sampler = arm_setup(cfg, arm, run, seed_offset, inputs)
            if (trace.iterations != n or trace.first_sweep != 0
                    or trace.shape != model.shape
                    or trace.config_hash != config_hash(model, chain, sampler)):
                raise TraceError(f"trace {path} does not match the experiment config")
            traces[arm].append(trace)
            files.append({"arm": arm, "run": run, "seed": seed, "file": path.name,
                          "sha256": hashlib.sha256(data).hexdigest()})
    return cfg, seed_offset, inputs, traces, files


def _mean(xs):
    xs = [x for x in xs if x is not None and not math.isnan(x)]
    return float(np.mean(xs)) if xs else None


def _std(xs):
    xs = [x for x in xs if x is not None and not math.isnan(x)]
    return float(np.std(xs, ddof=1)) if len(xs) > 1 else None


def _nanmean(a):
    a = a[~np.isnan(a)]
    return float(a.mean()) if a.size else math.nan


def analyze(cfg: ExperimentConfig, traces: dict, gt: GroundTruth | None):
    """Compute every report section; returns ``(report, per_rv_rows, r2_rows)``."""
    N, K = cfg.chain.iterations, cfg.chain.record_window
    D = cfg.model.disparity_levels
    windows = {arm: [t.sweeps(N - K, N) for t in ts] for arm, ts in traces.items()}
    shape = windows["software"][0].shape[1:]
    active = active_region(windows["software"], windows["hardware"])

    ess_section, per_rv_ess = {}, {}
    for arm in ARMS:
        per_run = np.stack([ess_batch(w) for w in windows[arm]])
        overall = [_nanmean(e) for e in per_run]
        act = [_nanmean(np.where(active, e, np.nan)) for e in per_run]
        ess_section[arm] = {
            "mean_overall": _mean(overall),
            "mean_active": _mean(act),
            "std_active_across_runs": _std(act),
            "per_run_mean_active": act,
            "per_run_mean_overall": overall,
        }
        with np.errstate(invalid="ignore"):
            counts = (~np.isnan(per_run)).sum(axis=0)
            per_rv_ess[arm] = (np.nansum(per_run, axis=0) / np.maximum(counts, 1),
                               cfg.runs - counts)
        per_rv_ess[arm][0][counts == 0] = np.nan
    sw_act, hw_act = ess_section["software"]["mean_active"], ess_section["hardware"]["mean_active"]
    ess_ratio = sw_act / hw_act if sw_act and hw_act else None

    curves, rhat_at_base = {}, {}
    for arm in ARMS:
        pts = []
        for mult in cfg.metrics.checkpoints:
            c = int(round(mult * N))
            chains = np.stack([t.sweeps(c - c // 2, c) for t in traces[arm]])
            rep = gelman_rubin_batch(chains)
            pts.append({
                "multiple": mult,
                "iterations": c,
                "normalized_to_software": c / N,
                "normalized_to_hardware": c / N,
                "convergence_percentage": rep.convergence_percentage,
            })
            if mult == 1.0:
                rhat_at_base[arm] = rep
        curves[arm] = pts
    sw_base = next(p["convergence_percentage"] for p in curves["software"] if p["multiple"] == 1.0)
    catch_up = next((p["multiple"] for p in curves["hardware"]
                     if p["convergence_percentage"] >= sw_base), None)

    end_points = {arm: [label_mode(w, D) for w in windows[arm]] for arm in ARMS}
    reference = reference_mode(end_points["software"])
    r2 = {arm: [r_squared(e, reference) for e in end_points[arm]] for arm in ARMS}
    bp = {}
    if gt is not None:
        for arm in ARMS:
            vals = [bad_pixel_percentage(e, gt.disparities, cfg.metrics.bp_threshold, gt.valid_mask)
                    for e in end_points[arm]]
            bp[arm] = {"mean": _mean(vals), "std": _std(vals), "per_run": vals}

    ks = {}
    for other in ("hardware", "noise"):
        a, b = r2["software"], r2[other]
        key = f"software_vs_{other}"
        if any(v is None for v in a + b):
            ks[key] = {"skipped": "R^2 undefined (constant reference map)"}
            continue
        res = ks_permutation_test(a, b, cfg.metrics.ks_permutations, cfg.metrics.ks_seed)
        ks[key] = {"statistic": res.statistic, "p_value": res.p_value,
                   "permutations": res.permutations}

    div_summary, _ = divergence_sweep(cfg.approx, cfg.divergence)

    report = {
        "tool": {"name": "statrobust", "version": __version__},
        "config": cfg.to_dict(),
        "base_iterations": N,
        "ess_window": K,
        "active_region": {"active": int(active.sum()), "total": int(active.size),
                          "fraction": float(active.mean())},
        "ess": ess_section,
        "ess_iteration_ratio_hardware_vs_software": ess_ratio,
        "convergence": {
            "curves": curves,
            "hardware_multiple_to_reach_software_base": catch_up,
        },
        "r_squared": {
            arm: {"values": r2[arm], "mean": _mean(r2[arm]),
                  "median": _median(r2[arm])} for arm in ARMS
        },
        "ks": ks,
        "bad_pixel_percentage": bp or None,
        "degenerate_conditionals": {arm: int(sum(t.degenerate_count for t in traces[arm]))
                                    for arm in ARMS},
        "divergence": div_summary,
    }

    per_rv_rows = []
    h, w = shape
    for arm in ARMS:
        rep = rhat_at_base[arm]
        ess_mean, excluded = per_rv_ess[arm]
        for i in range(h * w):
            r, c = divmod(i, w)
            rec = rep[i]
            per_rv_rows.append([
                arm, i, r, c, int(active[r, c]), ess_mean[r, c], int(excluded[r, c]),
                rec.between, rec.within, rec.rhat,
                "converged" if rec.converged else "not_converged",
            ])
    r2_rows = []
    for arm in ARMS:
        for run, t in enumerate(traces[arm]):
            r2_rows.append([arm, run, t.seed, r2[arm][run],
                            bp[arm]["per_run"][run] if bp else None])
    return report, per_rv_rows, r2_rows


def _median(xs):
    xs = [x for x in xs if x is not None]
    return float(np.median(xs)) if xs else None


# --------------------------------------------------------------------------
# output


PER_RV_HEADER = ["arm", "rv_id", "row", "col", "active", "ess", "ess_excluded_runs",
                 "B", "W", "rhat", "verdict"]
R2_HEADER = ["arm", "run", "seed", "r2", "bad_pixel_percentage"]


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else format(float(v), ".17g")
    return str(v)


def format_csv(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) or math.isinf(obj) else float(obj)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_from_dir(trace_dir, out_dir=None) -> dict:
    """Recompute all metrics from persisted traces and write the report files."""
    cfg, seed_offset, inputs, traces, files = load_experiment(trace_dir)
    report, per_rv, r2_rows = analyze(cfg, traces, inputs[2])
    report["seed_offset"] = seed_offset
    report["traces"] = files
    out = Path(out_dir or trace_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dump_json(report))
    (out / "per_rv_metrics.csv").write_text(format_csv(PER_RV_HEADER, per_rv))
    (out / "r2_values.csv").write_text(format_csv(R2_HEADER, r2_rows))
    return report


# --------------------------------------------------------------------------
# data-independent divergence


def divergence_sweep(approx: ApproxConfig, spec):
    """JSD between ideal and hardware-effective conditionals over random energies.

    Returns ``(summary, rows)`` with one row per energy vector; degenerate
    points (every weight truncated) are counted and carry no JSD.
    """
    rng = np.random.default_rng(spec.seed)
    energies = rng.uniform(spec.energy_low, spec.energy_high,
                           size=(spec.samples, spec.support_size))
    values = np.full(spec.samples, np.nan)
    for i, e in enumerate(energies):
        try:
            q = effective_hw_pmf(e, spec.temperature, approx)
        except DegenerateDistribution:
            continue
        values[i] = js_divergence(pmf_from_energies(e, spec.temperature), q)
    ok = ~np.isnan(values)
    summary = {"approx": approx.to_dict(), "points": int(spec.samples),
               "degenerate": int((~ok).sum())}
    if ok.any():
        worst = int(np.nanargmax(values))
        counts, edges = np.histogram(values[ok], bins=spec.bins)
        summary.update({
            "max_jsd": float(values[worst]),
            "mean_jsd": float(values[ok].mean()),
            "argmax_index": worst,
            "argmax_energies": energies[worst].tolist(),
            "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        })
    rows = [[i, values[i], *energies[i]] for i in range(spec.samples)]
    return summary, rows


def with_fraction_bits(approx: ApproxConfig, bits: int) -> ApproxConfig:
    fmt = FixedPointFormat(max(approx.format.total_bits, bits + 1), bits)
    try:
        return replace(approx, format=fmt)
    except StatRobustError as exc:
        raise ConfigError(f"fraction_bits={bits}: {exc}") from None


def run_divergence(cfg: ExperimentConfig, out_dir) -> dict:
    spec = cfg.divergence
    bits_list = spec.fraction_bits or (cfg.approx.format.fraction_bits,)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweeps, all_rows = [], []
    for bits in bits_list:
        approx = with_fraction_bits(cfg.approx, int(bits))
        summary, rows = divergence_sweep(approx, spec)
        sweeps.append(summary)
        all_rows += [[approx.format.fraction_bits, *r] for r in rows]
    header = ["fraction_bits", "point", "jsd"] + [f"e{k}" for k in range(spec.support_size)]
    (out / "divergence.csv").write_text(format_csv(header, all_rows))
    result = {"tool": {"name": "statrobust", "version": __version__},
              "sweep": _listify_spec(spec), "results": sweeps}
    (out / "divergence.json").write_text(dump_json(result))
    return result


def _listify_spec(spec):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()}
