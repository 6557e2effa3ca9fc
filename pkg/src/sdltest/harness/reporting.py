"""CSV/JSON serialization of reports and estimates."""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

HIST_EDGES = np.arange(-6.0, 6.0 + 0.25, 0.25)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def zscore_histogram(z, active, edges=HIST_EDGES):
    """Normalized histograms (densities) of active and inactive z-scores."""
    z = np.asarray(z)
    active = np.asarray(active, dtype=bool)
    rows = []
    dens = {}
    for label, mask in (("active", active), ("inactive", ~active)):
        counts, _ = np.histogram(np.clip(z[mask], edges[0], edges[-1]), bins=edges)
        total = counts.sum()
        dens[label] = counts / (total * np.diff(edges)) if total else np.zeros_like(counts, dtype=float)
    for k in range(len(edges) - 1):
        rows.append((edges[k], edges[k + 1], dens["active"][k], dens["inactive"][k]))
    return rows


def environment_info() -> dict:
    import numba
    import scipy

    from .. import __version__

    return {
        "sdltest": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def write_report(report, out_dir, include_environment: bool = True) -> dict:
    """Write ``report.csv``, ``replicates.csv``, ``zscores.csv``, ``histogram.csv``, ``config.json``.

    Returns the mapping of file role to path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: out / f"{name}.csv" for name in ("report", "replicates", "zscores", "histogram")}
    paths["config"] = out / "config.json"

    write_rows(
        paths["report"],
        ["alpha", "replicates_ok", "type_I_mean", "type_I_std", "power_mean", "power_std", "theory_mean", "theory_std"],
        [
            (a.alpha, a.replicates_ok, a.type_I_mean, a.type_I_std, a.power_mean, a.power_std, a.theory_mean, a.theory_std)
            for a in report.aggregates
        ],
    )

    rep_rows = []
    for r in report.replicates:
        if not r.ok:
            rep_rows.append((r.replicate, r.seed, r.status, r.error) + (None,) * 10)
            continue
        for lv in r.levels:
            rep_rows.append(
                (r.replicate, r.seed, r.status, "", lv.alpha, r.lam, r.d, r.tau, r.support_size, r.kkt_gap, r.ridge,
                 lv.type_I, lv.power, lv.theory)
            )
    write_rows(
        paths["replicates"],
        ["replicate", "seed", "status", "error", "alpha", "lambda", "d", "tau", "support_size", "kkt_gap", "ridge",
         "type_I", "power", "theory"],
        rep_rows,
    )

    z_rows = []
    all_z, all_active = [], []
    for r in report.replicates:
        if not r.ok:
            continue
        for i, (z, a) in enumerate(zip(r.z_scores, r.active)):
            z_rows.append((r.replicate, i, z, bool(a)))
        all_z.append(r.z_scores)
        all_active.append(r.active)
    write_rows(paths["zscores"], ["replicate", "index", "z", "active"], z_rows)
    if all_z:
        hist = zscore_histogram(np.concatenate(all_z), np.concatenate(all_active))
    else:
        hist = []
    write_rows(paths["histogram"], ["bin_left", "bin_right", "active_density", "inactive_density"], hist)

    meta = {"kind": report.kind, "config": report.config, "extra": report.extra}
    if include_environment:
        meta["environment"] = environment_info()
    paths["config"].write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return paths


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def write_test_report(path, theta0, est, report) -> None:
    """Per-coordinate table: index, theta0, theta_hat, theta_u, z, p_value, decision."""
    theta0 = np.zeros_like(est.theta_u) if theta0 is None else np.asarray(theta0)
    write_rows(
        path,
        ["index", "theta0", "theta_hat", "theta_u", "z", "p_value", "decision"],
        zip(range(len(est.theta_u)), theta0, est.theta_hat, est.theta_u, report.z_scores, report.p_values, report.decisions),
    )


def write_estimate(path, est) -> None:
    """Debiased estimate table: index, theta_hat, theta_u, z_score."""
    z = est.theta_u / est.tau
    write_rows(path, ["index", "theta_hat", "theta_u", "z_score"], zip(range(len(z)), est.theta_hat, est.theta_u, z))


def write_fit(path, fit) -> None:
    """Nonzero Lasso coefficients as ``index,value``."""
    idx = np.flatnonzero(fit.theta_hat)
    write_rows(path, ["index", "value"], zip(idx, fit.theta_hat[idx]))


def write_power_curve(path_or_file, rows) -> None:
    header = ["alpha", "power", "degenerate"]
    if hasattr(path_or_file, "write"):
        writer = csv.writer(path_or_file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    else:
        write_rows(path_or_file, header, rows)
