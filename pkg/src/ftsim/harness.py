"""Experiment orchestration and report emission."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import (ExactDeltaConfig, MCSweepConfig, S3BraidingConfig, TrotterPlanConfig)

OUT_ENV = "FTSIM_OUT"
NORM_NOTE = ("noise operators scaled to unit operator norm; the bracketed error term is bounded by "
             "bracket_bound rather than by 1")


@dataclass
class RunResult:
    kind: str
    records: list
    header: list
    rows: list
    summary: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)     # file name -> text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def table_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


# --------------------------------------------------------------------------
# experiments


def run_exact_delta(cfg: ExactDeltaConfig) -> RunResult:
    from .exact import fault_tolerance_experiment

    res = fault_tolerance_experiment(cfg.k, cfg.gamma, tuple(cfg.dts), cfg.T, cfg.sample_interval,
                                     cfg.dt_int, noise_kinds=cfg.noise_kinds)
    header = ["dt", "t", "delta_system", "delta_sim", "bound_rhs", "holds"]
    rows = [list(r) for r in res.rows]
    records = [dict(zip(header, r)) for r in rows]
    last = len(res.times) - 1
    per_obs = {"system": {j: float(v[last]) for j, v in sorted(res.per_observable_system.items())}}
    for dt, d in res.per_observable_sim.items():
        per_obs[f"sim_dt={dt!r}"] = {j: float(v[last]) for j, v in sorted(d.items())}
    summary = {"holds": res.holds, "c_fit": res.c_fit, "gamma": res.gamma, "gamma_sim": res.gamma_sim,
               "bracket_bound": res.bracket_bound, "expectations_at_T": per_obs, "normalization": NORM_NOTE}
    return RunResult(cfg.experiment, records, header, rows, summary)


def run_mc_sweep(cfg: MCSweepConfig) -> RunResult:
    from .anyon_mc import MCParams, logical_error_rate

    header = ["k", "bias_q", "bias_radius", "n_trials", "failures", "estimate", "ci_low", "ci_high",
              "mean_failure_time", "cleanups"]
    rows = []
    for q in cfg.bias_q:
        params = MCParams(cfg.p_create, cfg.p_hop, q, cfg.bias_radius, cfg.t_max, cfg.seed)
        for k in cfg.k:
            r = logical_error_rate(k, params, cfg.n_trials, workers=cfg.workers)
            rows.append([k, q, cfg.bias_radius, r.n_trials, r.failures, r.estimate, r.ci_low, r.ci_high,
                         r.mean_failure_time, r.cleanups])
    records = [dict(zip(header, r)) for r in rows]
    return RunResult(cfg.experiment, records, header, rows)


def run_s3_braiding(cfg: S3BraidingConfig) -> RunResult:
    from .quantum_double import memory_arm, memory_trial
    from .stats import intervals_overlap

    header = ["arm", "radius", "n_trials", "failures", "estimate", "ci_low", "ci_high", "timeouts", "wrong_pairs"]
    arms = [memory_arm(cfg.L, cfg.p_pair, None, cfg.n_trials, cfg.seed, cfg.class_weights, cfg.workers)]
    for r in cfg.radius:
        arms.append(memory_arm(cfg.L, cfg.p_pair, r, cfg.n_trials, cfg.seed, cfg.class_weights, cfg.workers))
    rows = [["unswept" if a.radius is None else "swept", a.radius, a.n_trials, a.failures, a.estimate,
             a.ci_low, a.ci_high, a.timeouts, a.wrong_pairs] for a in arms]
    records = [dict(zip(header, r)) for r in rows]
    un = arms[0]
    summary = {"comparisons": [
        {"radius": a.radius, "swept_le_unswept": a.estimate <= un.estimate,
         "ci_overlap": intervals_overlap((a.ci_low, a.ci_high), (un.ci_low, un.ci_high))} for a in arms[1:]]}
    extra = {}
    if cfg.log_trial is not None:
        from .rng import trial_seed

        trial, st = memory_trial(cfg.L, cfg.p_pair, cfg.radius[0], trial_seed(cfg.seed, cfg.log_trial),
                                 cfg.class_weights, log=True)
        extra["events.jsonl"] = st.event_lines()
        extra["final_state.json"] = st.dumps() + "\n"
        summary["logged_trial"] = {"index": cfg.log_trial, "failed": trial.failed, "steps": trial.steps}
    return RunResult(cfg.experiment, records, header, rows, summary, extra)


def run_trotter_plan(cfg: TrotterPlanConfig) -> RunResult:
    from .planner import OPERATOR_NORM_NOTE, ErrorBudget, optimal_dt, plan_report, toy_validation

    header = ["dt", "stroboscopic", "noise", "total", "measured"]
    summary = {"note": OPERATOR_NORM_NOTE}
    if cfg.toy:
        v = toy_validation(cfg.T, cfg.toy_eps)
        budget = v.budget
        rows = []
        for d in sorted(v.measured):
            rows.append([d, v.budget.a * d, v.budget.b / d, v.predicted[d], v.measured[d]])
        summary.update({"dt_star": v.dt_star, "ratio_to_grid_min": v.ratio, "c_strobe": v.c_strobe,
                        "eps_eff": v.eps_eff})
    else:
        budget = ErrorBudget(cfg.h_norm, cfg.T, cfg.eps_gate, cfg.gates_per_step, cfg.c_strobe, cfg.order)
        rep = plan_report(budget)
        rows = [[g["dt"], g["stroboscopic"], g["noise"], g["total"], None] for g in rep["grid"]]
        summary.update({"dt_star": rep["dt_star"], "f_star": rep["f_star"]})
    dt, f = optimal_dt(budget)
    summary.update({"budget": budget.as_dict(), "f_star": f, "dt_star_unsnapped": dt})
    records = [dict(zip(header, r)) for r in rows]
    return RunResult(cfg.experiment, records, header, rows, summary)


RUNNERS = {"exact-delta": run_exact_delta, "mc-sweep": run_mc_sweep,
           "s3-braiding": run_s3_braiding, "trotter-plan": run_trotter_plan}


# --------------------------------------------------------------------------
# output


def resolve_out(cli_out: str | None, cfg_out: str | None, kind: str) -> Path:
    """--out beats the FTSIM_OUT environment variable, which beats the config."""
    for cand in (cli_out, os.environ.get(OUT_ENV), cfg_out):
        if cand:
            return Path(cand)
    return Path("ftsim-out") / kind


def write_outputs(out_dir: Path, files: dict[str, str]) -> list[Path]:
    """Write all files or none: stage in a temp dir, then move into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".ftsim-", dir=out_dir))
    written = []
    try:
        for name, text in files.items():
            (stage / name).write_text(text)
        for name in files:
            os.replace(stage / name, out_dir / name)
            written.append(out_dir / name)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    finally:
        for p in stage.iterdir():
            p.unlink()
        stage.rmdir()
    return written


def run(cfg, out: str | None = None) -> tuple[RunResult, Path]:
    t0 = time.time()
    started = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t0))
    result = RUNNERS[cfg.experiment](cfg)
    elapsed = time.time() - t0
    report = {
        "experiment": cfg.experiment,
        "config": cfg.model_dump(mode="json"),
        "fingerprint": cfg.fingerprint(),
        "version": __version__,
        "records": result.records,
        "summary": result.summary,
        "wall_clock": {"started": started, "seconds": elapsed, "python": platform.python_version()},
    }
    files = {"report.json": json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n",
             "table.csv": table_text(result.header, result.rows)}
    files.update(result.extra)
    out_dir = resolve_out(out, cfg.out, cfg.experiment)
    write_outputs(out_dir, files)
    return result, out_dir


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def replay_file(path: str | Path):
    """Replay a line-delimited event log; malformed lines are reported by number."""
    from .quantum_double import DoubleError, replay

    events = []
    text = Path(path).read_text()
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            ev = json.loads(line)
        except json.JSONDecodeError as err:
            raise DoubleError(f"{path}:{n}: malformed record ({err.msg})") from None
        if not isinstance(ev, dict) or "ev" not in ev:
            raise DoubleError(f"{path}:{n}: record lacks an 'ev' field")
        events.append((n, ev))
    try:
        return replay([ev for _, ev in events])
    except DoubleError as err:
        msg = str(err)
        if msg.startswith("event "):
            idx = int(msg.split(":", 1)[0].split()[1])
            msg = f"{path}:{events[idx][0]}: {msg.split(':', 1)[1].strip()}"
        raise DoubleError(msg) from None
