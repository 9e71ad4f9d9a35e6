"""Prediction error statistics per phase and algorithm."""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

AXES = ("x", "y", "theta")
#: Stand-in for an infinite improvement ratio in JSON output.
INF_SENTINEL = "inf"


class AlignmentError(ValueError):
    """A predicted track does not sit on the measurement time grid."""


@dataclass(frozen=True)
class PhaseErrorStats:
    case_id: str
    phase: int
    algorithm: str
    mean_abs_err_x: float
    mean_abs_err_y: float
    mean_abs_err_theta: float
    std_err_x: float
    std_err_y: float
    std_err_theta: float
    horizon_length: float
    n_samples: int

    @property
    def mean(self):
        return np.array([self.mean_abs_err_x, self.mean_abs_err_y, self.mean_abs_err_theta])

    @property
    def std(self):
        return np.array([self.std_err_x, self.std_err_y, self.std_err_theta])


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    case_id: str
    phase: int
    algorithm: str
    t: np.ndarray  # time since the phase started
    abs_err: np.ndarray  # (n, 3)


@dataclass(eq=False)
class PredictionReport:
    rows: list
    series: list

    def get(self, phase, algorithm, case_id=None):
        for r in self.rows:
            if r.phase == phase and r.algorithm == algorithm and (case_id is None or r.case_id == case_id):
                return r
        raise KeyError(f"no statistics for phase {phase}, algorithm {algorithm!r}")

    @property
    def algorithms(self):
        return sorted({r.algorithm for r in self.rows})

    @property
    def phases(self):
        return sorted({(r.case_id, r.phase) for r in self.rows})

    def aggregate(self):
        """Cross-phase statistics per (case, algorithm), pooled over samples."""
        out = {}
        keys = sorted({(s.case_id, s.algorithm) for s in self.series})
        for case_id, algo in keys:
            err = np.vstack([s.abs_err for s in self.series if s.case_id == case_id and s.algorithm == algo])
            out[(case_id, algo)] = (err.mean(axis=0), err.std(axis=0))
        return out

    def to_dict(self):
        agg = [
            {"case_id": c, "algorithm": a, "mean_abs_err": m.tolist(), "std_err": s.tolist()}
            for (c, a), (m, s) in self.aggregate().items()
        ]
        ratios = [
            {"case_id": c, "phase": j, **{ax: _json_ratio(v) for ax, v in zip(AXES, r)}}
            for (c, j), r in improvement_ratio(self).items()
        ] if _has_both(self) else []
        return {
            "units": {"position": "m", "theta": "rad", "horizon_length": "s"},
            "phases": [asdict(r) for r in self.rows],
            "aggregate": agg,
            "improvement_ratio": ratios,
        }

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path):
        """Per-phase bar-chart table; orientation in degrees for human reading."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(
                [
                    "case_id",
                    "phase",
                    "algorithm",
                    "mean_abs_err_x_m",
                    "mean_abs_err_y_m",
                    "mean_abs_err_theta_deg",
                    "std_err_x_m",
                    "std_err_y_m",
                    "std_err_theta_deg",
                    "horizon_length_s",
                ]
            )
            for r in self.rows:
                w.writerow(
                    [r.case_id, r.phase, r.algorithm]
                    + [repr(float(v)) for v in (r.mean_abs_err_x, r.mean_abs_err_y, np.degrees(r.mean_abs_err_theta))]
                    + [repr(float(v)) for v in (r.std_err_x, r.std_err_y, np.degrees(r.std_err_theta))]
                    + [repr(float(r.horizon_length))]
                )

    def series_to_csv(self, path):
        """Error growth over each prediction horizon."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["case_id", "phase", "algorithm", "t_since_start", "abs_err_x", "abs_err_y", "abs_err_theta"])
            for s in self.series:
                for tk, e in zip(s.t, s.abs_err):
                    w.writerow([s.case_id, s.phase, s.algorithm, repr(float(tk))] + [repr(float(v)) for v in e])


def _json_ratio(v):
    return INF_SENTINEL if np.isinf(v) else float(v)


def _has_both(report):
    from .predict import PROPOSED, SIMPLE

    algos = set(report.algorithms)
    return PROPOSED in algos and SIMPLE in algos


def pose_errors(pred, meas):
    """Pointwise absolute error; orientation compared on unwrapped angles."""
    pred = np.array(pred, dtype=float)
    meas = np.array(meas, dtype=float)
    pred[:, 2] = np.unwrap(pred[:, 2])
    meas[:, 2] = np.unwrap(meas[:, 2])
    return np.abs(pred - meas)


def summarize(tracks, measured, atol=1e-9):
    """Mean and standard deviation of ``|predicted - measured|`` per phase and algorithm."""
    rows = []
    series = []
    n = len(measured)
    for tr in tracks:
        i0 = tr.start_index
        i1 = i0 + len(tr)
        if i0 < 0 or i1 > n:
            raise AlignmentError(f"track of phase {tr.phase_index} runs outside the measurement ({i0}:{i1} of {n})")
        if not np.allclose(tr.t, measured.t[i0:i1], rtol=0.0, atol=atol):
            raise AlignmentError(f"track of phase {tr.phase_index} is not on the measurement time grid")
        err = pose_errors(tr.pose, measured.pose[i0:i1])
        mean = err.mean(axis=0)
        std = err.std(axis=0)
        rows.append(
            PhaseErrorStats(
                case_id=measured.case_id,
                phase=tr.phase_index,
                algorithm=tr.algorithm,
                mean_abs_err_x=float(mean[0]),
                mean_abs_err_y=float(mean[1]),
                mean_abs_err_theta=float(mean[2]),
                std_err_x=float(std[0]),
                std_err_y=float(std[1]),
                std_err_theta=float(std[2]),
                horizon_length=float(tr.t[-1] - tr.t[0]),
                n_samples=len(tr),
            )
        )
        series.append(
            ErrorSeries(
                case_id=measured.case_id, phase=tr.phase_index, algorithm=tr.algorithm, t=tr.t - tr.t[0], abs_err=err
            )
        )
    return PredictionReport(rows=rows, series=series)


def ratio(baseline, proposed):
    """``baseline / proposed`` elementwise; zero proposed error gives ``inf``."""
    baseline = np.asarray(baseline, dtype=float)
    proposed = np.asarray(proposed, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = baseline / proposed
    out = np.where(proposed == 0, np.inf, out)
    return out


def improvement_ratio(report, baseline="simple", proposed="proposed"):
    """Per (case, phase) array ``[x, y, theta]`` of baseline over proposed mean error."""
    out = {}
    for case_id, phase in report.phases:
        try:
            b = report.get(phase, baseline, case_id)
            p = report.get(phase, proposed, case_id)
        except KeyError as exc:
            raise ValueError(f"both algorithms are needed for phase {phase}: {exc}") from None
        out[(case_id, phase)] = ratio(b.mean, p.mean)
    if not out:
        raise ValueError("report holds no phases")
    return out


def merge_reports(reports):
    return PredictionReport(
        rows=[r for rep in reports for r in rep.rows], series=[s for rep in reports for s in rep.series]
    )
