"""CSV output for trial records.

Columns of the trial table, for a system with ``n`` states::

    trial, k, gamma_u, gamma_e, k0_flag,
    user_mmse_i, eav_mmse_i, open_loop_mmse_i, bound_mmse_i   for i = 1..n
    log1p_user_mmse_i, ..., log1p_bound_mmse_i                for i = 1..n

``k0_flag`` is 1 on the first critical step.  ``bound_mmse_i`` and its log
column are empty before the first critical step (and when no bound exists).
Numbers are written with 12 significant digits.
"""

import csv
import math

import numpy as np

QUANTITIES = ("user_mmse", "eav_mmse", "open_loop_mmse", "bound_mmse")


def trial_columns(n):
    cols = ["trial", "k", "gamma_u", "gamma_e", "k0_flag"]
    for i in range(1, n + 1):
        cols.extend(f"{q}_{i}" for q in QUANTITIES)
    for i in range(1, n + 1):
        cols.extend(f"log1p_{q}_{i}" for q in QUANTITIES)
    return cols


def fmt(v):
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.12g}"


def _write(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return len(rows)


def trial_rows(record):
    n = record.states.shape[1]
    cols = {q: getattr(record, q) for q in QUANTITIES}
    rows = []
    for k in range(record.horizon + 1):
        vals = [cols[q][k, i] for i in range(n) for q in QUANTITIES]
        row = [record.trial, k, int(record.gamma_u[k]), int(record.gamma_e[k]),
               int(record.k0 == k)]
        row.extend(fmt(v) for v in vals)
        row.extend(fmt(np.log1p(v)) for v in vals)
        rows.append(row)
    return rows


def emit_csv(records, path):
    """Write every record (sorted by trial id) and return the data row count."""
    records = sorted(records, key=lambda r: r.trial)
    if not records:
        raise ValueError("no records to write")
    n = records[0].states.shape[1]
    rows = [row for r in records for row in trial_rows(r)]
    return _write(path, trial_columns(n), rows)


def read_csv(path):
    """Parse a trial table back into a list of dicts with float/None values."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append({k: (float(v) if v != "" else None) for k, v in row.items()})
    return out


def emit_bound_csv(traj, P_op, path):
    """Bound trajectory table: ``k``, per-state bound variance, bound information
    diagonal and open-loop variance."""
    n = traj.Pbar_seq.shape[1]
    header = ["k"]
    header += [f"bound_mmse_{i}" for i in range(1, n + 1)]
    header += [f"bound_info_{i}" for i in range(1, n + 1)]
    header += [f"open_loop_mmse_{i}" for i in range(1, n + 1)]
    rows = []
    for j, k in enumerate(traj.steps):
        row = [int(k)]
        row += [fmt(traj.Pbar_seq[j, i, i]) for i in range(n)]
        row += [fmt(traj.Ybar_seq[j, i, i]) for i in range(n)]
        row += [fmt(P_op[k, i, i]) for i in range(n)]
        rows.append(row)
    return _write(path, header, rows)


def emit_compare_csv(full, baseline, path):
    """Side-by-side eavesdropper variances for two codes run on the same trial."""
    n = full.states.shape[1]
    header = ["trial", "k", "gamma_u", "gamma_e", "k0_flag"]
    for i in range(1, n + 1):
        header += [f"full_eav_mmse_{i}", f"diagonal_eav_mmse_{i}", f"open_loop_mmse_{i}"]
    rows = []
    for k in range(full.horizon + 1):
        row = [full.trial, k, int(full.gamma_u[k]), int(full.gamma_e[k]), int(full.k0 == k)]
        for i in range(n):
            row += [fmt(full.eav_mmse[k, i]), fmt(baseline.eav_mmse[k, i]),
                    fmt(full.open_loop_mmse[k, i])]
        rows.append(row)
    return _write(path, header, rows)
