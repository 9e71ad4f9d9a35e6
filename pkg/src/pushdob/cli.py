"""Command-line front end: synth | reconstruct | observe | identify | predict | compare."""

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .data import load_params, load_trajectory, save_trajectory
from .dynamics import ObjectParams
from .force_recon import PidGains, reconstruct
from .identify import CHANNELS, identify_channels
from .metrics import AXES, INF_SENTINEL, improvement_ratio
from .observer import DISCRETIZATIONS, QFilterParams, realize_filters, run as run_observer
from .predict import PipelineConfig, run_pipeline
from .synth import SynthScenario, generate, save_truth

OUTPUT_DIR_ENV = "PUSHDOB_OUTPUT_DIR"
PROG = "pushdob"


@dataclass(frozen=True)
class RunConfig:
    inputs: tuple = ()
    params: str = None
    output_dir: str = None
    omega_n: float = 300.0
    zeta: float = 1.0 / np.sqrt(2.0)
    discretization: str = "matched"
    kp: float = 46.6
    ki: float = 34.6
    kd: float = 15.4
    lp: float = 117.2
    li: float = 137.8
    ld: float = 24.5
    plan_rate: float = 10.0
    n_intervals: int = 4
    mu: float = 0.14
    seed: int = 0
    window: int = 125
    settle_time: float = 0.1
    jobs: int = 1

    @property
    def gains(self):
        return PidGains(self.kp, self.ki, self.kd, self.lp, self.li, self.ld)

    @property
    def pipeline(self):
        return PipelineConfig(
            omega_n=self.omega_n,
            zeta=self.zeta,
            discretization=self.discretization,
            plan_rate=self.plan_rate,
            n_intervals=self.n_intervals,
            mu=self.mu,
            window=self.window,
            settle_time=self.settle_time,
        )

    def out_dir(self):
        d = Path(self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or ".")
        d.mkdir(parents=True, exist_ok=True)
        return d


CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def resolve_config(args):
    """Flag > config file > built-in default."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(file_values)
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None and not (key == "inputs" and not v):
            values[key] = v
    if "inputs" in values:
        values["inputs"] = tuple(values["inputs"])
    cfg = replace(RunConfig(), **values)
    if cfg.discretization not in DISCRETIZATIONS:
        raise ValueError(f"discretization must be one of {DISCRETIZATIONS}")
    return cfg


def _fmt(v):
    return repr(float(v))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _load(path, cfg):
    params = load_params(cfg.params) if cfg.params else None
    return load_trajectory(path, params=params)


def _stem(path):
    return Path(path).stem


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and np.isinf(obj):
        return INF_SENTINEL
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _dump_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_safe(obj), fh, indent=2)


def _map(fn, cfg, items):
    """Apply ``fn(cfg, item)`` to each input, in parallel when asked to."""
    items = list(items)
    if cfg.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            return list(ex.map(fn, [cfg] * len(items), items))
    return [fn(cfg, item) for item in items]


def _need_inputs(cfg):
    if not cfg.inputs:
        raise ValueError("no input trajectories given")


# subcommands


def cmd_synth(args, cfg):
    if args.scenario == "rich":
        s = SynthScenario.rich_excitation(seed=cfg.seed)
    else:
        s = SynthScenario(seed=cfg.seed)
    overrides = {}
    if args.beta is not None:
        overrides["true_beta"] = tuple(args.beta)
    if args.eps is not None:
        overrides["true_epsilon"] = tuple(args.eps)
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.case_id is not None:
        overrides["case_id"] = args.case_id
    s = replace(s, **overrides)
    if args.noiseless:
        s = s.noiseless()
    p = load_params(cfg.params) if cfg.params else ObjectParams()
    traj = generate(s, p)
    out = cfg.out_dir()
    path = out / f"{s.case_id}.csv"
    save_trajectory(traj, path)
    save_truth(traj, out / f"{s.case_id}_truth.csv")
    print(path)
    return 0


def _reconstruct_one(cfg, path):
    traj = _load(path, cfg)
    r = reconstruct(traj, cfg.gains)
    out = cfg.out_dir() / f"{_stem(path)}_recon.csv"
    rows = (
        [t, *ft, tt, *ff, tf] for t, ft, tt, ff, tf in zip(traj.t, r.f_total, r.t_total, r.f_frt, r.t_frt)
    )
    _write_csv(out, ("t", "ftot_x", "ftot_y", "ttot", "ffrt_x", "ffrt_y", "tfrt"), rows)
    return str(out)


def _observe_series(cfg, traj):
    filters = realize_filters(QFilterParams(cfg.omega_n, cfg.zeta), traj.params, traj.dt, cfg.discretization)
    u = traj.applied_wrench()
    return u, run_observer(filters, u, traj.pose)


def _observe_one(cfg, path):
    traj = _load(path, cfg)
    _, d_hat = _observe_series(cfg, traj)
    out = cfg.out_dir() / f"{_stem(path)}_dhat.csv"
    _write_csv(out, ("t", "dhat_fx", "dhat_fy", "dhat_tau"), ([t, *d] for t, d in zip(traj.t, d_hat)))
    return str(out)


def _identify_one(cfg, path):
    traj = _load(path, cfg)
    u, d_hat = _observe_series(cfg, traj)
    skip = min(int(round(cfg.settle_time / traj.dt)), len(traj) - 2)
    models, _ = identify_channels(u[skip:], d_hat[skip:], window=cfg.window, t=traj.t[skip:])
    out = cfg.out_dir()
    stem = _stem(path)
    summary = {
        name: {"beta": m.beta, "eps": m.epsilon, "n": m.n_samples_absorbed, "degenerate": m.degenerate}
        for name, m in zip(CHANNELS, models)
    }
    _dump_json(out / f"{stem}_identify.json", summary)
    header = [f"{kind}_{c}" for c in CHANNELS for kind in ("u", "dhat")]
    rows = (np.column_stack([u[skip:, i // 2] if i % 2 == 0 else d_hat[skip:, i // 2] for i in range(6)]))
    _write_csv(out / f"{stem}_scatter.csv", header, rows.tolist())
    return str(out / f"{stem}_identify.json")


def _predict_one(cfg, path):
    traj = _load(path, cfg)
    result = run_pipeline(traj, cfg.pipeline)
    out = cfg.out_dir()
    stem = _stem(path)
    header = (
        "t", "pred_x", "pred_y", "pred_theta", "meas_x", "meas_y", "meas_theta", "err_x", "err_y", "err_theta", "algo"
    )
    for phase in sorted({tr.phase_index for tr in result.tracks}):
        rows = []
        for tr in result.tracks:
            if tr.phase_index != phase:
                continue
            meas = traj.pose[tr.start_index : tr.start_index + len(tr)]
            err = tr.pose - meas
            for k in range(len(tr)):
                rows.append([tr.t[k], *tr.pose[k], *meas[k], *err[k], tr.algorithm])
        _write_csv(out / f"{stem}_phase{phase}_predict.csv", header, rows)
    report = result.report
    report.series_to_csv(out / f"{stem}_growth.csv")
    summary = report.to_dict()
    summary["case_id"] = traj.case_id
    summary["models"] = {
        str(j): {name: m.to_dict() for name, m in zip(CHANNELS, models)} for j, models in result.models.items()
    }
    summary["config"] = asdict(cfg.pipeline)
    json_path = out / f"{stem}_predict.json"
    _dump_json(json_path, summary)
    return str(json_path)


def _summary_from(cfg, path):
    if str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    with open(_predict_one(cfg, path), encoding="utf-8") as fh:
        return json.load(fh)


def _ratio_value(v):
    return np.inf if v == INF_SENTINEL else float(v)


def cmd_compare(args, cfg):
    _need_inputs(cfg)
    summaries = _map(_summary_from, cfg, cfg.inputs)
    rows = []
    ratios = []
    for s in summaries:
        rows.extend(s["phases"])
        ratios.extend(s["improvement_ratio"])
    if not ratios:
        raise ValueError("inputs hold no phase with both algorithms")
    per_axis = {ax: [_ratio_value(r[ax]) for r in ratios] for ax in AXES}
    by_algo = {}
    for r in rows:
        by_algo.setdefault(r["algorithm"], []).append(r)
    means = {
        algo: {ax: float(np.mean([r[f"mean_abs_err_{ax}"] for r in rs])) for ax in AXES} for algo, rs in by_algo.items()
    }
    overall = {ax: float(means["simple"][ax] / means["proposed"][ax]) if means["proposed"][ax] > 0 else np.inf for ax in AXES}
    out = cfg.out_dir()
    result = {
        "cases": [s["case_id"] for s in summaries],
        "improvement_ratio": ratios,
        "min_improvement_ratio": {ax: float(min(v)) for ax, v in per_axis.items()},
        "mean_abs_err_by_algorithm": means,
        "overall_improvement_ratio": overall,
        "units": {"position": "m", "theta": "rad"},
    }
    _dump_json(out / "compare_summary.json", result)
    header = ["case_id", "phase", "algorithm", "mean_abs_err_x_m", "mean_abs_err_y_m", "mean_abs_err_theta_deg",
              "std_err_x_m", "std_err_y_m", "std_err_theta_deg", "horizon_length_s"]
    table = [
        [r["case_id"], r["phase"], r["algorithm"], r["mean_abs_err_x"], r["mean_abs_err_y"],
         float(np.degrees(r["mean_abs_err_theta"])), r["std_err_x"], r["std_err_y"],
         float(np.degrees(r["std_err_theta"])), r["horizon_length"]]
        for r in rows
    ]
    _write_csv(out / "compare_phases.csv", header, table)
    for ax in AXES:
        print(f"{ax}: overall simple/proposed = {overall[ax]:.3g}")
    return 0


def _batch(fn):
    def cmd(args, cfg):
        _need_inputs(cfg)
        for line in _map(fn, cfg, cfg.inputs):
            print(line)
        return 0

    return cmd


def build_parser():
    parser = argparse.ArgumentParser(prog=PROG, description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output-dir", dest="output_dir", help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")
    common.add_argument("--config", help="JSON file with RunConfig keys")
    common.add_argument("--params", help="ObjectParams JSON")
    common.add_argument("-j", "--jobs", type=int, help="parallel workers over input files")
    obs = argparse.ArgumentParser(add_help=False)
    obs.add_argument("--omega-n", dest="omega_n", type=float, help="Q-filter natural frequency, rad/s")
    obs.add_argument("--zeta", type=float, help="Q-filter damping ratio")
    obs.add_argument("--discretization", choices=DISCRETIZATIONS)
    obs.add_argument("--window", type=int, help="RLS window length in samples")
    obs.add_argument("--settle-time", dest="settle_time", type=float, help="observer transient trimmed, s")
    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("inputs", nargs="*", help="trajectory CSV files")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("synth", parents=[common], help="generate a synthetic push")
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario", choices=("friction", "rich"), default="friction")
    p.add_argument("--beta", type=float, nargs=3)
    p.add_argument("--eps", type=float, nargs=3)
    p.add_argument("--duration", type=float)
    p.add_argument("--case-id", dest="case_id")
    p.add_argument("--noiseless", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reconstruct", parents=[common, inputs], help="PID total/unknown wrench")
    for g in ("kp", "ki", "kd", "lp", "li", "ld"):
        p.add_argument(f"--{g}", type=float)
    p.set_defaults(func=_batch(_reconstruct_one))

    p = sub.add_parser("observe", parents=[common, obs, inputs], help="disturbance estimate")
    p.set_defaults(func=_batch(_observe_one))

    p = sub.add_parser("identify", parents=[common, obs, inputs], help="fit d = beta u + eps")
    p.set_defaults(func=_batch(_identify_one))

    pipeline = argparse.ArgumentParser(add_help=False)
    pipeline.add_argument("--plan-rate", dest="plan_rate", type=float, help="plan sample rate, Hz")
    pipeline.add_argument("--n-intervals", dest="n_intervals", type=int, help="schedule length")
    pipeline.add_argument("--mu", type=float, help="baseline friction coefficient")

    p = sub.add_parser("predict", parents=[common, obs, pipeline, inputs], help="identify/predict pipeline")
    p.set_defaults(func=_batch(_predict_one))

    p = sub.add_parser("compare", parents=[common, obs, pipeline, inputs], help="aggregate prediction summaries")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (ValueError, RuntimeError, OSError, FloatingPointError, KeyError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
