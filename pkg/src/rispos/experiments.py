"""Seeded Monte Carlo sweeps and bound tables written as CSV."""
from __future__ import annotations

import csv
import io
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ExperimentConfig, resolve_output
from .estimator import SearchConfig, estimate_all
from .exceptions import EstimationWarning, RisPosError
from .fisher import fisher_info, path_angle_crb, path_angles, per_path_bounds
from .fusion import fuse_linear, fuse_multi_bs, fuse_multi_ue
from .pipeline import locate, per_path_positions
from .scenario import synthesize
from .signal import simulate_observations, simulate_raw

PARAM_NAMES = ("tau", "theta", "phi")
PARAM_UNITS = ("s", "rad", "rad")


def trial_rng(seed: int, sweep_index: int, trial: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, sweep_index, trial)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(sweep_index), int(trial)))
    return np.random.Generator(np.random.Philox(ss))


def _param_columns(n_reflections: int) -> list[str]:
    cols = []
    for path in ["d"] + [f"r{q + 1}" for q in range(n_reflections)]:
        for name, unit in zip(PARAM_NAMES, PARAM_UNITS):
            cols += [f"rmse_{name}_{path}_{unit}", f"crb_{name}_{path}_{unit}"]
    return cols


def csv_columns(n_reflections: int) -> list[str]:
    return (["sweep_value", "method", "rmse_position_m", "crb_rmse_m"] + _param_columns(n_reflections)
            + ["trials_used", "failures"])


@dataclass
class ExperimentResult:
    rows: list
    columns: list
    errors: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        return rows_to_csv(self.rows, self.columns)

    def row(self, sweep_value: float, method: str) -> dict:
        for r in self.rows:
            if r["sweep_value"] == sweep_value and r["method"] == method:
                return r
        raise KeyError((sweep_value, method))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "nan" if not np.isfinite(v) else format(float(v), ".10g")
    return str(v)


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def write_csv(text: str, path) -> str:
    out = resolve_output(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return str(out)


# ---------------------------------------------------------------------------
# single-BS trials


def _observe(eta, sc, rng, config: ExperimentConfig):
    if config.noiseless:
        return simulate_observations(eta, sc, rng, noiseless=True)
    if config.raw_slots is not None:
        return simulate_raw(eta, sc, config.raw_slots, rng)
    return simulate_observations(eta, sc, rng)


def _single_trial(config: ExperimentConfig, sweep_index: int, trial: int) -> dict:
    sc = config.scenario_at(config.sweep_values[sweep_index])
    rng = trial_rng(config.seed, sweep_index, trial)
    truth = synthesize(sc, rng)
    obs = _observe(truth.eta, sc, rng, config)
    true_angles = path_angles(truth.eta, sc.rotation)
    out = {}
    cache = {}
    for method in config.methods:
        matching = "delay" if method == "delay_based" else "energy"
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EstimationWarning)
                if matching not in cache:
                    cache[matching] = estimate_all(obs, sc, SearchConfig(matching=matching))
                est = cache[matching]
                pos = locate(est, sc, method)
            err = float(np.sum((pos.p_hat - truth.xi.position) ** 2))
            perr = (path_angles(est.eta, sc.rotation) - true_angles) ** 2
            if not np.isfinite(err):
                raise FloatingPointError("non-finite position")
            out[method] = (err, perr)
        except (RisPosError, np.linalg.LinAlgError, ValueError, FloatingPointError, ArithmeticError):
            out[method] = None
    return out


# ---------------------------------------------------------------------------
# multi-BS / multi-UE trials


def _frames(config: ExperimentConfig, value: float):
    """Per (BS, UE) scenarios in each BS frame, sharing the RIS phases designed for BS 1 and UE 1."""
    base = config.scenario_at(value)
    bs = [np.asarray(b, float) for b in config.bs_positions]
    ues = [np.asarray(u, float) for u in config.ue_positions]
    ref = base.translated(bs[0]).with_ue(ues[0] - bs[0])
    phases = ref.ris_phases()
    grid = [[base.translated(b).with_ue(u - b) for u in ues] for b in bs]
    return grid, bs, ues, phases


def _multi_trial(config: ExperimentConfig, sweep_index: int, trial: int) -> dict:
    grid, bs, ues, phases = _frames(config, config.sweep_values[sweep_index])
    rng = trial_rng(config.seed, sweep_index, trial)
    fused_bs = []
    single = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EstimationWarning)
            for i, row in enumerate(grid):
                per_ue = []
                for l, sc in enumerate(row):
                    truth = synthesize(sc, rng, ris_phases=phases)
                    obs = _observe(truth.eta, sc, rng, config)
                    est = estimate_all(obs, sc)
                    local = fuse_linear(per_path_positions(est, sc))
                    glob = replace(local, p_hat=local.p_hat + bs[i])
                    per_ue.append(glob)
                    if i == 0 and l == 0:
                        single = glob
                offsets = [u - ues[0] for u in ues]
                fused_bs.append(fuse_multi_ue(per_ue, offsets)[0])
            final = fuse_multi_bs(fused_bs)
    except (RisPosError, np.linalg.LinAlgError, ValueError, ArithmeticError):
        return {m: None for m in config.methods}
    nan = np.full((1 + len(phases), 3), np.nan)
    res = {"multi_bs_ue": (float(np.sum((final.p_hat - ues[0]) ** 2)), nan),
           "single": (float(np.sum((single.p_hat - ues[0]) ** 2)), nan)}
    return {m: res[m] for m in config.methods}


def _run_chunk(args):
    config, sweep_index, trials = args
    fn = _single_trial if config.kind == "single" else _multi_trial
    return [(t, fn(config, sweep_index, t)) for t in trials]


# ---------------------------------------------------------------------------
# bounds


def _bounds_single(sc):
    truth = synthesize(sc, None)
    fi = fisher_info(truth.xi, sc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimationWarning)
        pb = per_path_bounds(fi, sc.n_reflections)
        pcrb = np.sqrt(np.clip(path_angle_crb(fi.f_eta, truth.eta, sc.rotation), 0.0, None))
    return pb, pcrb


def _crb_multi(config: ExperimentConfig, value: float) -> float:
    grid, _, _, phases = _frames(config, value)
    info = np.zeros((3, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EstimationWarning)
        for row in grid:
            for sc in row:
                truth = synthesize(sc, None, ris_phases=phases)
                pb = per_path_bounds(fisher_info(truth.xi, sc), sc.n_reflections)
                info += np.linalg.inv(pb.crb_full)
    return float(np.sqrt(np.trace(np.linalg.inv(info))))


# ---------------------------------------------------------------------------
# drivers


def _collect(config: ExperimentConfig):
    jobs = []
    chunk = max(1, config.trials // (4 * config.workers)) if config.workers > 1 else config.trials
    for s in range(len(config.sweep_values)):
        idx = list(range(config.trials))
        for start in range(0, config.trials, chunk):
            jobs.append((config, s, idx[start:start + chunk]))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            parts = list(ex.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    per_sweep = {s: {} for s in range(len(config.sweep_values))}
    for job, part in zip(jobs, parts):
        for t, res in part:
            per_sweep[job[1]][t] = res
    return per_sweep


def run_experiment(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every (sweep value, method) cell and optionally write the CSV."""
    q = config.scenario.n_reflections
    columns = csv_columns(q)
    per_sweep = _collect(config)
    rows, errors = [], {}
    for s, value in enumerate(config.sweep_values):
        sc = config.scenario_at(value)
        pb, pcrb = _bounds_single(sc)
        crb_multi = _crb_multi(config, value) if config.kind == "multi_bs_ue" else None
        trials = [per_sweep[s][t] for t in sorted(per_sweep[s])]
        for method in config.methods:
            ok = [r[method] for r in trials if r[method] is not None]
            sq = np.array([o[0] for o in ok], dtype=float)
            errors[(value, method)] = sq
            row = {"sweep_value": value, "method": method,
                   "rmse_position_m": float(np.sqrt(np.mean(sq))) if sq.size else float("nan"),
                   "crb_rmse_m": crb_multi if method == "multi_bs_ue" else pb.crb_rmse,
                   "trials_used": int(sq.size), "failures": len(trials) - int(sq.size)}
            perr = np.array([o[1] for o in ok]) if ok else np.full((0, q + 1, 3), np.nan)
            for p, path in enumerate(["d"] + [f"r{i + 1}" for i in range(q)]):
                for k, (name, unit) in enumerate(zip(PARAM_NAMES, PARAM_UNITS)):
                    vals = perr[:, p, k] if perr.size else np.array([np.nan])
                    row[f"rmse_{name}_{path}_{unit}"] = float(np.sqrt(np.mean(vals)))
                    row[f"crb_{name}_{path}_{unit}"] = float(pcrb[p, k])
            rows.append(row)
    result = ExperimentResult(rows, columns, errors)
    if write and config.output_path:
        write_csv(result.to_csv(), config.output_path)
    return result


def crb_columns(n_reflections: int) -> list[str]:
    cols = ["sweep_value", "crb_rmse_m", "crb_rmse_direct_only_m", "bound_direct_m", "tight_direct_m"]
    for q in range(n_reflections):
        cols += [f"bound_reflect{q + 1}_m", f"tight_reflect{q + 1}_m"]
    for path in ["d"] + [f"r{q + 1}" for q in range(n_reflections)]:
        cols += [f"crb_{n}_{path}_{u}" for n, u in zip(PARAM_NAMES, PARAM_UNITS)]
    return cols


def run_crb_table(config: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Bounds across the sweep without Monte Carlo, one row per sweep value."""
    q = config.scenario.n_reflections
    rows = []
    for value in config.sweep_values:
        sc = config.scenario_at(value)
        pb, pcrb = _bounds_single(sc)
        sc0 = replace(sc, ris_positions=np.zeros((0, 3)))
        pb0, _ = _bounds_single(sc0)
        row = {"sweep_value": value, "crb_rmse_m": pb.crb_rmse, "crb_rmse_direct_only_m": pb0.crb_rmse,
               "bound_direct_m": float(np.sqrt(np.trace(pb.bound_direct))),
               "tight_direct_m": float(np.sqrt(np.trace(pb.tight_direct)))}
        for i in range(q):
            row[f"bound_reflect{i + 1}_m"] = float(np.sqrt(np.trace(pb.bound_reflect[i])))
            row[f"tight_reflect{i + 1}_m"] = float(np.sqrt(np.trace(pb.tight_reflect[i])))
        for p, path in enumerate(["d"] + [f"r{i + 1}" for i in range(q)]):
            for k, (name, unit) in enumerate(zip(PARAM_NAMES, PARAM_UNITS)):
                row[f"crb_{name}_{path}_{unit}"] = float(pcrb[p, k])
        rows.append(row)
    result = ExperimentResult(rows, crb_columns(q))
    if write and config.output_path:
        write_csv(result.to_csv(), config.output_path)
    return result


def bootstrap_ci(sq_errors, n_boot: int = 2000, level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap interval of the RMSE from per-trial squared errors."""
    sq = np.asarray(sq_errors, float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, sq.size, size=(n_boot, sq.size))
    stats = np.sqrt(sq[idx].mean(axis=1))
    a = (1.0 - level) / 2.0
    return float(np.quantile(stats, a)), float(np.quantile(stats, 1.0 - a))
