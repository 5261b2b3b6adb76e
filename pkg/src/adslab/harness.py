"""Experiment orchestration: pools of (architecture x scenario x seed) runs,
calibration, scoring, correlation, and report emission.

An experiment directory is fully determined by its config: the pool
manifest, fitted parameter profiles, the run-record stream, and every
CSV/SVG report are pure functions of (config, seeds, dataset bytes).
Completed runs are keyed by (arch_id, scenario_id, seed) and skipped on
resume; records append in completion order but every aggregate is
computed from the key-sorted stream, so scheduling order never changes
a reported number.
"""

from __future__ import annotations

import configparser
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import stats
from .ads import compute_ads
from .archpool import PoolConfig, generate_pool, load_manifest, save_manifest, _category_counts
from .calib import CalibrationParams, calibrate_params, load_profile, save_profile
from .clrun import TrainConfig, append_records, read_records, run_scenario
from .datasets import Scenario, ScenarioSpec, load_cifar10, load_idx, make_scenario, sample_subset
from .synthdata import IDX_FILENAMES

ENV_DATA_ROOT = "ADSLAB_DATA_ROOT"
ENV_WORKERS = "ADSLAB_WORKERS"

CIFAR_TRAIN_BATCHES = [f"data_batch_{i}.bin" for i in range(1, 6)]
CIFAR_TEST_BATCH = "test_batch.bin"


@dataclass
class ExperimentConfig:
    scenarios: list = field(default_factory=list)     # ScenarioSpec entries
    pool: PoolConfig = field(default_factory=PoolConfig)
    seeds: tuple = (0, 1, 2)
    workers: int = 1
    out_dir: str = "experiment"
    data_root: str = "data"
    epochs_per_task: int = 1
    steps_per_task: int = 0          # > 0 overrides the epoch-derived count
    batch_size: int = 128
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 5e-4
    trace_every: int = 2
    path_segments: int = 12
    eval_cap: int = 2000
    min_task1_acc: float = 0.8
    n_calib_archs: int = 10
    calib_fractions: tuple = ()      # defaults to each scenario's calib_fraction
    transfer_profile: str = ""       # load this profile id instead of calibrating
    profiles_dir: str = ""           # defaults to <out_dir>/params
    n_perm: int = 999
    n_boot: int = 1000
    baseline_perms: int = 200

    def __post_init__(self):
        if not self.scenarios:
            raise ValueError("at least one scenario is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")

    def resolved_data_root(self) -> str:
        return os.environ.get(ENV_DATA_ROOT, self.data_root)

    def resolved_workers(self) -> int:
        return int(os.environ.get(ENV_WORKERS, self.workers))

    def resolved_profiles_dir(self) -> str:
        return self.profiles_dir or os.path.join(self.out_dir, "params")


# ---------------------------------------------------------------------------
# config file (INI with one [scenario <id>] section per scenario)
# ---------------------------------------------------------------------------

def _parse_int_tuple(s: str) -> tuple:
    return tuple(int(v) for v in s.replace(" ", "").split(",") if v)


def _parse_float_tuple(s: str) -> tuple:
    return tuple(float(v) for v in s.replace(" ", "").split(",") if v)


def scenario_from_section(sid: str, sec) -> ScenarioSpec:
    kind = sec.get("kind")
    common = dict(
        eval_fraction=float(sec.get("eval_fraction", 0.2)),
        calib_fraction=float(sec.get("calib_fraction", 0.3)),
    )
    if kind == "transfer":
        return ScenarioSpec(sid, "transfer", src=sec.get("src"), dst=sec.get("dst"), **common)
    if kind == "split":
        return ScenarioSpec(sid, "split", dataset=sec.get("dataset"),
                            classes_a=_parse_int_tuple(sec.get("classes_a")),
                            classes_b=_parse_int_tuple(sec.get("classes_b")), **common)
    if kind == "rotated":
        return ScenarioSpec(sid, "rotated", dataset=sec.get("dataset"),
                            angle_a=float(sec.get("angle_a", 0.0)),
                            angle_b=float(sec.get("angle_b", 0.0)), **common)
    raise ValueError(f"scenario {sid}: unknown kind {kind!r}")


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"config file not found: {path}")
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    train = cp["train"] if cp.has_section("train") else {}
    poolsec = cp["pool"] if cp.has_section("pool") else {}
    calib = cp["calib"] if cp.has_section("calib") else {}
    statsec = cp["stats"] if cp.has_section("stats") else {}

    scenarios = []
    for section in cp.sections():
        if section.startswith("scenario"):
            sid = section.split(None, 1)[1] if " " in section else section
            scenarios.append(scenario_from_section(sid, cp[section]))

    pool_kwargs = {}
    if "depths" in poolsec:
        pool_kwargs["depths"] = _parse_int_tuple(poolsec["depths"])
    if "widths" in poolsec:
        pool_kwargs["width_candidates"] = _parse_int_tuple(poolsec["widths"])
    tag_counts = {k[len("count_"):]: int(v) for k, v in dict(poolsec).items()
                  if k.startswith("count_")}
    if tag_counts:
        pool_kwargs["per_category_counts"] = tag_counts
    elif "per_category" in poolsec:
        pool_kwargs["per_category_counts"] = _category_counts(int(poolsec["per_category"]))
    pool_kwargs["seed"] = int(poolsec.get("seed", 0))
    if "input_dim" in poolsec:
        pool_kwargs["input_dim"] = int(poolsec["input_dim"])
    if "output_dim" in poolsec:
        pool_kwargs["output_dim"] = int(poolsec["output_dim"])
    pool = PoolConfig(**pool_kwargs)

    return ExperimentConfig(
        scenarios=scenarios,
        pool=pool,
        seeds=_parse_int_tuple(exp.get("seeds", "0,1,2")),
        workers=int(exp.get("workers", 1)),
        out_dir=exp.get("out", "experiment"),
        data_root=exp.get("data_root", "data"),
        epochs_per_task=int(train.get("epochs_per_task", 1)),
        steps_per_task=int(train.get("steps_per_task", 0)),
        batch_size=int(train.get("batch_size", 128)),
        lr=float(train.get("lr", 1e-3)),
        momentum=float(train.get("momentum", 0.9)),
        weight_decay=float(train.get("weight_decay", 5e-4)),
        trace_every=int(train.get("trace_every", 2)),
        path_segments=int(train.get("path_segments", 12)),
        eval_cap=int(exp.get("eval_cap", 2000)),
        min_task1_acc=float(exp.get("min_task1_acc", 0.8)),
        n_calib_archs=int(calib.get("n_archs", 10)),
        calib_fractions=_parse_float_tuple(calib.get("fractions", "")),
        transfer_profile=calib.get("profile", ""),
        profiles_dir=calib.get("profiles_dir", ""),
        n_perm=int(statsec.get("n_perm", 999)),
        n_boot=int(statsec.get("n_boot", 1000)),
    )


def save_config(cfg: ExperimentConfig, path) -> None:
    cp = configparser.ConfigParser()
    cp["experiment"] = {
        "out": cfg.out_dir,
        "seeds": ",".join(str(s) for s in cfg.seeds),
        "workers": str(cfg.workers),
        "data_root": cfg.data_root,
        "eval_cap": str(cfg.eval_cap),
        "min_task1_acc": repr(cfg.min_task1_acc),
    }
    cp["train"] = {
        "epochs_per_task": str(cfg.epochs_per_task),
        "steps_per_task": str(cfg.steps_per_task),
        "batch_size": str(cfg.batch_size),
        "lr": repr(cfg.lr),
        "momentum": repr(cfg.momentum),
        "weight_decay": repr(cfg.weight_decay),
        "trace_every": str(cfg.trace_every),
        "path_segments": str(cfg.path_segments),
    }
    cp["pool"] = {
        "depths": ",".join(str(d) for d in cfg.pool.depths),
        "widths": ",".join(str(w) for w in cfg.pool.width_candidates),
        "seed": str(cfg.pool.seed),
        "input_dim": str(cfg.pool.input_dim),
        "output_dim": str(cfg.pool.output_dim),
    } | {f"count_{tag}": str(n) for tag, n in cfg.pool.per_category_counts.items()}
    cp["calib"] = {
        "n_archs": str(cfg.n_calib_archs),
        "fractions": ",".join(repr(f) for f in cfg.calib_fractions),
        "profile": cfg.transfer_profile,
        "profiles_dir": cfg.profiles_dir,
    }
    cp["stats"] = {"n_perm": str(cfg.n_perm), "n_boot": str(cfg.n_boot)}
    for spec in cfg.scenarios:
        sec = f"scenario {spec.scenario_id}"
        d = {"kind": spec.kind,
             "eval_fraction": repr(spec.eval_fraction),
             "calib_fraction": repr(spec.calib_fraction)}
        if spec.kind == "transfer":
            d |= {"src": spec.src, "dst": spec.dst}
        elif spec.kind == "split":
            d |= {"dataset": spec.dataset,
                  "classes_a": ",".join(map(str, spec.classes_a)),
                  "classes_b": ",".join(map(str, spec.classes_b))}
        else:
            d |= {"dataset": spec.dataset,
                  "angle_a": repr(spec.angle_a), "angle_b": repr(spec.angle_b)}
        cp[sec] = d
    with open(path, "w") as fh:
        cp.write(fh)


# ---------------------------------------------------------------------------
# dataset resolution
# ---------------------------------------------------------------------------

def dataset_paths(root: str, name: str) -> dict:
    base = os.path.join(root, name)
    if name == "cifar10":
        return {"train": [os.path.join(base, b) for b in CIFAR_TRAIN_BATCHES],
                "test": [os.path.join(base, CIFAR_TEST_BATCH)]}
    return {
        "train": (os.path.join(base, IDX_FILENAMES[("train", "images")]),
                  os.path.join(base, IDX_FILENAMES[("train", "labels")])),
        "test": (os.path.join(base, IDX_FILENAMES[("test", "images")]),
                 os.path.join(base, IDX_FILENAMES[("test", "labels")])),
    }


def load_named_dataset(root: str, name: str) -> dict:
    paths = dataset_paths(root, name)
    missing = []
    for split_paths in paths.values():
        for p in (split_paths if isinstance(split_paths, list) else list(split_paths)):
            if not os.path.exists(p):
                missing.append(p)
    if missing:
        raise FileNotFoundError(
            f"dataset {name!r} is missing files under {root!r}:\n  "
            + "\n  ".join(missing)
            + "\nPoint data_root (or the ADSLAB_DATA_ROOT variable) at a directory "
            "with the canonical binary files, or create synthetic stand-ins with "
            "the make-data command."
        )
    if name == "cifar10":
        return {"train": load_cifar10(paths["train"], name, "train"),
                "test": load_cifar10(paths["test"], name, "test")}
    return {"train": load_idx(*paths["train"], name=name, split="train"),
            "test": load_idx(*paths["test"], name=name, split="test")}


def load_dataset_pool(cfg: ExperimentConfig) -> dict:
    root = cfg.resolved_data_root()
    names = set()
    for spec in cfg.scenarios:
        if spec.kind == "transfer":
            names.update((spec.src, spec.dst))
        else:
            names.add(spec.dataset)
    return {name: load_named_dataset(root, name) for name in sorted(names)}


# ---------------------------------------------------------------------------
# experiment phases
# ---------------------------------------------------------------------------

def steps_for(cfg: ExperimentConfig, n_samples: int) -> int:
    if cfg.steps_per_task > 0:
        return cfg.steps_per_task
    return max(1, math.ceil(n_samples / cfg.batch_size) * cfg.epochs_per_task)


def train_config(cfg: ExperimentConfig, steps: int, seed: int) -> TrainConfig:
    return TrainConfig(
        steps_per_task=steps, batch_size=cfg.batch_size, lr=cfg.lr,
        momentum=cfg.momentum, weight_decay=cfg.weight_decay,
        trace_every=cfg.trace_every, path_segments=cfg.path_segments, seed=seed,
    )


def calibration_scenario(scenario: Scenario, fraction: float) -> Scenario:
    """Shrink both task train sets to the calibration fraction.

    Task 1 reuses the scenario's carved calibration subset when the
    fraction matches; task 2 subsamples with a seed tied to the scenario.
    """
    if abs(fraction - scenario.spec.calib_fraction) < 1e-12:
        t1 = scenario.calib_subset
    else:
        t1 = sample_subset(scenario.task1_train, fraction, scenario.seed + 7001)
    if fraction >= 1.0:
        t2 = scenario.task2_train
    else:
        t2 = sample_subset(scenario.task2_train, fraction, scenario.seed + 7002)
    return Scenario(scenario.spec, t1, scenario.task1_eval, t2,
                    scenario.calib_subset, scenario.task2_eval,
                    scenario.n_classes, scenario.seed)


def pick_calibration_archs(pool: list, n: int) -> list:
    """Deterministic spread over the pool (covers all categories)."""
    if n >= len(pool):
        return list(pool)
    idx = np.unique(np.round(np.linspace(0, len(pool) - 1, n)).astype(int))
    return [pool[i] for i in idx]


def run_calibration(cfg: ExperimentConfig, scenario: Scenario,
                    pool_entries: list, fraction: float) -> CalibrationParams:
    """Train the calibration architectures on the data subset and fit params."""
    calib_sc = calibration_scenario(scenario, fraction)
    steps = steps_for(cfg, len(calib_sc.task1_train))
    entries = pick_calibration_archs(pool_entries, cfg.n_calib_archs)
    runs = []
    for arch_id, arch in entries:
        tc = train_config(cfg, steps, cfg.seeds[0])
        tc = replace(tc, trace_every=1)  # dense cosine sampling for the depth fit
        runs.append(run_scenario(arch, calib_sc, tc,
                                 arch_id=f"calib_{arch_id}", eval_cap=min(cfg.eval_cap, 512)))
    pid = f"{scenario.scenario_id}_f{int(round(fraction * 100)):03d}"
    return calibrate_params(runs, source=f"{scenario.scenario_id}@{fraction}", params_id=pid)


def experiment_run_keys(cfg: ExperimentConfig, pool_entries: list) -> list:
    keys = []
    for spec in cfg.scenarios:
        for arch_id, _ in pool_entries:
            for seed in cfg.seeds:
                keys.append((arch_id, spec.scenario_id, seed))
    return keys


def run_experiment(cfg: ExperimentConfig, progress=None) -> str:
    """Execute (or resume) the full experiment; returns the experiment directory."""
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(cfg.resolved_profiles_dir(), exist_ok=True)
    save_config(cfg, os.path.join(out, "experiment.ini"))

    datasets = load_dataset_pool(cfg)
    scenarios = {s.scenario_id: make_scenario(s, datasets, seed=cfg.seeds[0])
                 for s in cfg.scenarios}

    manifest_path = os.path.join(out, "pool.manifest")
    if os.path.exists(manifest_path):
        pool_entries = load_manifest(manifest_path)
    else:
        pool = generate_pool(cfg.pool)
        save_manifest(pool, manifest_path, seed=cfg.pool.seed)
        pool_entries = load_manifest(manifest_path)

    # calibration (or transfer-profile loading) per scenario
    params_by_scenario = {}
    for sid, scenario in scenarios.items():
        fractions = cfg.calib_fractions or (scenario.spec.calib_fraction,)
        if cfg.transfer_profile:
            path = os.path.join(cfg.resolved_profiles_dir(), f"{cfg.transfer_profile}.profile")
            params_by_scenario[sid] = load_profile(path)
            continue
        fitted = {}
        for fraction in fractions:
            pid = f"{sid}_f{int(round(fraction * 100)):03d}"
            path = os.path.join(cfg.resolved_profiles_dir(), f"{pid}.profile")
            if os.path.exists(path):
                fitted[fraction] = load_profile(path)
            else:
                fitted[fraction] = run_calibration(cfg, scenario, pool_entries, fraction)
                save_profile(fitted[fraction], path)
        params_by_scenario[sid] = fitted[fractions[0]]

    # full pool runs, resumable by key
    records_path = os.path.join(out, "records.jsonl")
    done = set()
    if os.path.exists(records_path):
        done = {tuple(r.key) for r in read_records(records_path)}

    jobs = []
    for arch_id, scenario_id, seed in experiment_run_keys(cfg, pool_entries):
        if (arch_id, scenario_id, seed) not in done:
            jobs.append((arch_id, scenario_id, seed))
    arch_by_id = dict(pool_entries)

    def execute(job):
        arch_id, scenario_id, seed = job
        scenario = scenarios[scenario_id]
        steps = steps_for(cfg, len(scenario.task1_train))
        tc = train_config(cfg, steps, seed)
        return run_scenario(arch_by_id[arch_id], scenario, tc,
                            arch_id=arch_id, eval_cap=cfg.eval_cap)

    workers = cfg.resolved_workers()
    if jobs:
        if workers == 1:
            for job in jobs:
                rec = execute(job)
                append_records(records_path, [rec])
                if progress:
                    progress(rec)
        else:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                for rec in ex.map(execute, jobs):
                    append_records(records_path, [rec])
                    if progress:
                        progress(rec)

    emit_report(out)
    return out


# ---------------------------------------------------------------------------
# aggregation and reporting
# ---------------------------------------------------------------------------

@dataclass
class ScenarioAggregate:
    scenario_id: str
    arch_ids: list
    ads: np.ndarray
    shift: np.ndarray
    ece_drift: np.ndarray
    n_runs: int
    n_excluded: int


def aggregate_scenario(records: list, sid: str, arch_by_id: dict,
                       params: CalibrationParams, min_task1_acc: float) -> ScenarioAggregate:
    by_arch: dict = {}
    n_excluded = 0
    n_runs = 0
    for rec in sorted((r for r in records if r.scenario_id == sid), key=lambda r: r.key):
        n_runs += 1
        if not rec.valid or not math.isfinite(rec.observed_shift):
            n_excluded += 1
            continue
        if rec.task1_eval_acc < min_task1_acc:
            n_excluded += 1  # underfit gate
            continue
        by_arch.setdefault(rec.arch_id, []).append(rec)
    arch_ids = sorted(a for a in by_arch if a in arch_by_id)
    ads_vals, shifts, drifts = [], [], []
    for arch_id in arch_ids:
        runs = by_arch[arch_id]
        ads_vals.append(compute_ads(arch_by_id[arch_id], params).value)
        shifts.append(float(np.mean([r.observed_shift for r in runs])))
        drifts.append(float(np.mean([r.ece_after - r.ece_before for r in runs])))
    return ScenarioAggregate(sid, arch_ids, np.array(ads_vals), np.array(shifts),
                             np.array(drifts), n_runs, n_excluded)


def selector_baseline(agg: ScenarioAggregate, n_perms: int = 200, seed: int = 0) -> float:
    """Mean AUC-PR of score-shuffled selectors (the random baseline)."""
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(n_perms):
        rep = stats.pr_analysis(rng.permutation(agg.ads), agg.ece_drift)
        if math.isfinite(rep.auc_pr):
            vals.append(rep.auc_pr)
    return float(np.mean(vals)) if vals else math.nan


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path, header: list, rows: list) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def emit_report(exp_dir: str) -> list:
    """Rebuild every CSV/SVG report from the persisted experiment state."""
    cfg = load_config(os.path.join(exp_dir, "experiment.ini"))
    records_path = os.path.join(exp_dir, "records.jsonl")
    manifest_path = os.path.join(exp_dir, "pool.manifest")
    for required in (records_path, manifest_path):
        if not os.path.exists(required):
            raise FileNotFoundError(f"incomplete experiment: missing {required}")
    records = read_records(records_path)
    pool_entries = load_manifest(manifest_path)
    arch_by_id = dict(pool_entries)

    expected = {k for k in experiment_run_keys(cfg, pool_entries)}
    have = {tuple(r.key) for r in records}
    missing = sorted(expected - have)
    if missing:
        preview = ", ".join(map(str, missing[:5]))
        raise FileNotFoundError(
            f"incomplete experiment: {len(missing)} runs missing (e.g. {preview})")

    reports_dir = os.path.join(exp_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    written = []

    corr_rows = []
    sel_rows = []
    summary_rows = []
    for spec in cfg.scenarios:
        sid = spec.scenario_id
        pid = f"{sid}_f{int(round((cfg.calib_fractions or (spec.calib_fraction,))[0] * 100)):03d}"
        if cfg.transfer_profile:
            pid = cfg.transfer_profile
        params = load_profile(os.path.join(cfg.resolved_profiles_dir(), f"{pid}.profile"))
        agg = aggregate_scenario(records, sid, arch_by_id, params, cfg.min_task1_acc)
        if len(agg.arch_ids) < 3:
            raise ValueError(
                f"insufficient sample: scenario {sid} has {len(agg.arch_ids)} "
                "architectures after exclusions (need >= 3)")
        rep = stats.correlation_report(agg.ads, agg.shift, n_perm=cfg.n_perm,
                                       n_boot=cfg.n_boot, seed=cfg.seeds[0])
        corr_rows.append([sid, len(agg.arch_ids), rep.spearman, rep.kendall,
                          rep.dc, rep.p_value, rep.ci_low, rep.ci_high])
        summary_rows.append([sid, agg.n_runs, agg.n_excluded, len(agg.arch_ids)])

        if len(agg.arch_ids) >= 4:
            sel = stats.pr_analysis(agg.ads, agg.ece_drift)
            baseline = selector_baseline(agg, cfg.baseline_perms, seed=cfg.seeds[0])
            sel_rows.append([sid, sel.auc_pr, sel.positive_rate, baseline, len(agg.arch_ids)])
            pr_path = os.path.join(reports_dir, f"selector_{sid}.csv")
            write_csv(pr_path, ["threshold", "precision", "recall"],
                      [[q, p, r] for q, p, r in zip(sel.thresholds, sel.precision, sel.recall)])
            written.append(pr_path)
            pr_svg = os.path.join(reports_dir, f"pr_{sid}.svg")
            svg_curve(sel.recall, sel.precision, "recall", "precision",
                      f"{sid}: selector PR (AUC-PR {sel.auc_pr:.3f})", pr_svg)
            written.append(pr_svg)
        else:
            sel_rows.append([sid, math.nan, math.nan, math.nan, len(agg.arch_ids)])

        scatter = os.path.join(reports_dir, f"scatter_{sid}.svg")
        svg_scatter(agg.ads, agg.shift, "architecture-driven shift (proxy)",
                    "observed logit shift", f"{sid}: proxy vs observed shift", scatter)
        written.append(scatter)

    corr_path = os.path.join(reports_dir, "correlation.csv")
    write_csv(corr_path, ["scenario", "n_arch", "spearman", "kendall", "dc",
                          "p_value", "ci_low", "ci_high"], corr_rows)
    written.append(corr_path)

    summary_path = os.path.join(reports_dir, "runs_summary.csv")
    write_csv(summary_path,
              ["scenario", "n_runs", "n_excluded", "n_arch_used"], summary_rows)
    written.append(summary_path)

    sel_sum_path = os.path.join(reports_dir, "selector_summary.csv")
    write_csv(sel_sum_path, ["scenario", "auc_pr", "positive_rate",
                             "random_baseline", "n_arch"], sel_rows)
    written.append(sel_sum_path)

    # calibration-transfer table across subset fractions, when a grid is set
    if len(cfg.calib_fractions) > 1:
        rows = []
        for spec in cfg.scenarios:
            sid = spec.scenario_id
            for fraction in cfg.calib_fractions:
                pid = f"{sid}_f{int(round(fraction * 100)):03d}"
                path = os.path.join(cfg.resolved_profiles_dir(), f"{pid}.profile")
                if not os.path.exists(path):
                    continue
                params = load_profile(path)
                agg = aggregate_scenario(records, sid, arch_by_id, params, cfg.min_task1_acc)
                rows.append([sid, fraction, stats.spearman(agg.ads, agg.shift),
                             stats.direction_consistency(agg.ads, agg.shift)])
        transfer_path = os.path.join(reports_dir, "transfer.csv")
        write_csv(transfer_path, ["scenario", "fraction", "spearman", "dc"], rows)
        written.append(transfer_path)

    return written


# ---------------------------------------------------------------------------
# static SVG plots
# ---------------------------------------------------------------------------

SVG_W, SVG_H = 640, 480
MARGIN = 60


def _axis_ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        hi = lo + 1.0
    return list(np.linspace(lo, hi, n))


def _svg_frame(title: str, xlabel: str, ylabel: str, xt, yt, xr, yr) -> list:
    def sx(v):
        return MARGIN + (v - xr[0]) / (xr[1] - xr[0]) * (SVG_W - 2 * MARGIN)

    def sy(v):
        return SVG_H - MARGIN - (v - yr[0]) / (yr[1] - yr[0]) * (SVG_H - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}">',
        f'<rect width="{SVG_W}" height="{SVG_H}" fill="white"/>',
        f'<text x="{SVG_W / 2:.1f}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{MARGIN}" y1="{SVG_H - MARGIN}" x2="{SVG_W - MARGIN}" '
        f'y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<text x="{SVG_W / 2:.1f}" y="{SVG_H - 14}" text-anchor="middle" '
        f'font-size="12">{xlabel}</text>',
        f'<text x="18" y="{SVG_H / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 18 {SVG_H / 2:.1f})">{ylabel}</text>',
    ]
    for v in xt:
        parts.append(f'<line x1="{sx(v):.1f}" y1="{SVG_H - MARGIN}" x2="{sx(v):.1f}" '
                     f'y2="{SVG_H - MARGIN + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(v):.1f}" y="{SVG_H - MARGIN + 18}" text-anchor="middle" '
                     f'font-size="10">{v:.3g}</text>')
    for v in yt:
        parts.append(f'<line x1="{MARGIN - 5}" y1="{sy(v):.1f}" x2="{MARGIN}" '
                     f'y2="{sy(v):.1f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN - 8}" y="{sy(v):.1f}" text-anchor="end" '
                     f'font-size="10">{v:.3g}</text>')
    return parts


def svg_scatter(x, y, xlabel: str, ylabel: str, title: str, path,
                annotate_ranks: bool = True) -> None:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xr = (float(x.min()), float(x.max()) if x.max() > x.min() else float(x.min()) + 1)
    yr = (float(y.min()), float(y.max()) if y.max() > y.min() else float(y.min()) + 1)
    parts = _svg_frame(title, xlabel, ylabel, _axis_ticks(*xr), _axis_ticks(*yr), xr, yr)

    def sx(v):
        return MARGIN + (v - xr[0]) / (xr[1] - xr[0]) * (SVG_W - 2 * MARGIN)

    def sy(v):
        return SVG_H - MARGIN - (v - yr[0]) / (yr[1] - yr[0]) * (SVG_H - 2 * MARGIN)

    ranks = stats.rankdata(x)
    for i in range(len(x)):
        parts.append(f'<circle cx="{sx(x[i]):.1f}" cy="{sy(y[i]):.1f}" r="3.5" '
                     f'fill="steelblue" fill-opacity="0.8"/>')
        if annotate_ranks:
            parts.append(f'<text x="{sx(x[i]) + 5:.1f}" y="{sy(y[i]) - 4:.1f}" '
                         f'font-size="8" fill="gray">{int(ranks[i])}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def svg_curve(x, y, xlabel: str, ylabel: str, title: str, path) -> None:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xr, yr = (0.0, 1.0), (0.0, 1.0)
    parts = _svg_frame(title, xlabel, ylabel, _axis_ticks(0, 1), _axis_ticks(0, 1), xr, yr)

    def sx(v):
        return MARGIN + v * (SVG_W - 2 * MARGIN)

    def sy(v):
        return SVG_H - MARGIN - v * (SVG_H - 2 * MARGIN)

    order = np.argsort(x, kind="stable")
    pts = " ".join(f"{sx(x[i]):.1f},{sy(y[i]):.1f}" for i in order)
    parts.append(f'<polyline points="{pts}" fill="none" stroke="firebrick" stroke-width="2"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
