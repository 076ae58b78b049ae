"""Delimited report tables and rendered figures.

The analyze path turns a trial log into CSV tables plus PNG figures written
side by side in one output directory; rewriting from the same inputs yields
byte-identical CSVs. Figures render through the Agg backend so reports work
headless.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import bomi  # noqa: E402
from .iohmm import extract_stm, order_states  # noqa: E402
from .metrics import trials_to_threshold  # noqa: E402
from .persist import TrialRecord, load_iohmm, read_records  # noqa: E402
from .policy import N_ACTIONS, OrderedModel  # noqa: E402
from .simulator import RolloutResult, mastery_trial  # noqa: E402


def rollout_to_records(rollout: RolloutResult, session: str):
    """Convert one simulated episode to log records (1-based trial numbers).

    Simulated trials have no trajectories or wall-clock times; those fields
    stay None so replayed analyses are byte-reproducible.
    """
    recs = []
    for k in range(rollout.n_trials):
        recs.append(TrialRecord(
            session=session, trial=k + 1,
            prev_target=int(rollout.prev_targets[k]),
            cur_target=int(rollout.cur_targets[k]),
            nudge=int(rollout.nudges[k]),
            slope=float(rollout.slopes[k]),
            re=float(rollout.observations[k, 0]),
            sot=float(rollout.observations[k, 1]),
            state=int(rollout.states[k]),
            cost=float(rollout.costs[k]),
            belief=[float(v) for v in rollout.beliefs[k]],
            expected_state=float(rollout.expected_states[k]),
        ))
    return recs


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return Path(path)


def _trailing_mean(series, window: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.shape[0] < window:
        return np.array([])
    return np.lib.stride_tricks.sliding_window_view(x, window).sum(axis=1) / window


@dataclass(frozen=True)
class AnalyzeResult:
    n_records: int
    n_skipped: int
    tables: tuple
    figures: tuple


TRIAL_COLUMNS = ("session", "trial", "prev_target", "cur_target", "nudge",
                 "slope", "re", "sot", "expected_state", "captured")


def _metric_figure(records, window, path):
    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    trials = np.arange(1, len(records) + 1)
    for ax, name, series in ((axes[0], "reaching error",
                              [r.re for r in records]),
                             (axes[1], "smoothness",
                              [r.sot for r in records])):
        vals = np.array([np.nan if v is None else v for v in series], dtype=float)
        ax.plot(trials, vals, lw=0.8, alpha=0.5, label="per trial")
        tm = _trailing_mean(np.nan_to_num(vals), window)
        if tm.size:
            ax.plot(trials[window - 1:], tm, lw=1.8,
                    label=f"trailing mean ({window})")
        ax.set_ylabel(name)
        ax.legend(loc="upper right", fontsize=8)
    axes[1].set_xlabel("trial")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def _expected_state_figure(records, path):
    vals = np.array([np.nan if r.expected_state is None else r.expected_state
                     for r in records], dtype=float)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.plot(np.arange(1, vals.shape[0] + 1), vals, lw=1.2)
    ax.set_xlabel("trial")
    ax.set_ylabel("expected skill state")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def _stm_reports(model_path, out_dir):
    model = load_iohmm(model_path)
    ordering = order_states(model)
    om = OrderedModel(model, ordering)
    N = om.n_states
    pairs = sorted(bomi.TARGET_PAIRS.items())

    rows = []
    for pair_id, (a, b) in pairs:
        slope = bomi.slope_angle(a, b)
        for nudge in range(N_ACTIONS):
            stm = extract_stm(model, slope, nudge, ordering)
            for src in range(N):
                rows.append([pair_id, f"{a}-{b}", slope, nudge, src]
                            + [stm[src, dst] for dst in range(N)])
    stm_csv = _write_csv(
        out_dir / "stm_report.csv",
        ["pair", "targets", "slope", "nudge", "from_rank"]
        + [f"p_to_{j}" for j in range(N)],
        rows)

    grid = np.stack([om.emission_mean(r, np.zeros(model.input_dim))
                     for r in range(N)])
    cost_rows = [[r, int(ordering[r]), grid[r, 0], grid[r, 1],
                  grid[r, 0] + grid[r, 1]] for r in range(N)]
    costs_csv = _write_csv(out_dir / "state_costs.csv",
                           ["rank", "model_state", "intercept_re",
                            "intercept_sot", "intercept_cost"],
                           cost_rows)

    fig, axes = plt.subplots(len(pairs), N_ACTIONS,
                             figsize=(2.0 * N_ACTIONS, 1.8 * len(pairs)),
                             squeeze=False)
    for i, (pair_id, (a, b)) in enumerate(pairs):
        slope = bomi.slope_angle(a, b)
        for nudge in range(N_ACTIONS):
            ax = axes[i][nudge]
            stm = extract_stm(model, slope, nudge, ordering)
            ax.imshow(stm, vmin=0.0, vmax=1.0, cmap="viridis")
            ax.set_xticks([])
            ax.set_yticks([])
            if i == 0:
                ax.set_title(f"nudge {nudge}", fontsize=8)
            if nudge == 0:
                ax.set_ylabel(f"{a}-{b}", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_dir / "stm.png", dpi=110)
    plt.close(fig)
    return [stm_csv, costs_csv], [Path(out_dir / "stm.png")]


def analyze_log(log_path, out_dir, model_path=None, window: int = 10,
                thresholds=(0.5,), mastery_threshold: float = 3.0) -> AnalyzeResult:
    """Build metric tables and figures from one trial log.

    Writes trials.csv (per-trial metrics) and summary.csv (aggregates plus
    the skipped-line count) into out_dir; metric_curves.png alongside, an
    expected-state figure when beliefs were logged, and transition-matrix
    reports when a learner model artifact is supplied.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, skipped = read_records(log_path)

    tables = [_write_csv(
        out_dir / "trials.csv", TRIAL_COLUMNS,
        [[r.session, r.trial, r.prev_target, r.cur_target, r.nudge, r.slope,
          r.re, r.sot, r.expected_state, r.captured] for r in records])]
    figures = []

    res = [r.re for r in records if r.re is not None]
    sots = [r.sot for r in records if r.sot is not None]
    summary_rows = [
        ["records", len(records)],
        ["skipped_lines", len(skipped)],
        ["sessions", len({r.session for r in records})],
        ["mean_re", float(np.mean(res)) if res else ""],
        ["mean_sot", float(np.mean(sots)) if sots else ""],
    ]
    captures = [r.captured for r in records if r.captured is not None]
    if captures:
        summary_rows.append(["capture_rate", float(np.mean(captures))])
    re_series = np.array([np.nan if r.re is None else r.re for r in records])
    if records and not np.isnan(re_series).any():
        for th in thresholds:
            summary_rows.append(
                [f"trials_to_re_{th}",
                 _cell(trials_to_threshold(re_series, th, window))])
    exp_series = [r.expected_state for r in records]
    if records and all(v is not None for v in exp_series):
        summary_rows.append(
            ["mastery_trial",
             _cell(mastery_trial(np.array(exp_series), mastery_threshold,
                                 window))])
        figures.append(_expected_state_figure(records,
                                              out_dir / "expected_state.png"))
    tables.append(_write_csv(out_dir / "summary.csv", ["key", "value"],
                             summary_rows))

    if records:
        figures.append(_metric_figure(records, window,
                                      out_dir / "metric_curves.png"))
    if model_path is not None:
        t, f = _stm_reports(model_path, out_dir)
        tables.extend(t)
        figures.extend(f)
    return AnalyzeResult(n_records=len(records), n_skipped=len(skipped),
                         tables=tuple(tables), figures=tuple(figures))


def write_simulation_reports(summaries: dict, out_dir):
    """Write per-arm benchmark tables and figures for simulated arms.

    arm_curves.csv holds per-trial means with confidence half-widths;
    arm_episodes.csv one row per (arm, episode) with cumulative cost,
    threshold hits, and mastery trials.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = list(summaries)
    n = summaries[kinds[0]].re_mean.shape[0]

    header = ["trial"]
    for kind in kinds:
        header += [f"{kind}_re_mean", f"{kind}_re_ci", f"{kind}_sot_mean",
                   f"{kind}_sot_ci", f"{kind}_expected_state"]
    rows = []
    for k in range(n):
        row = [k + 1]
        for kind in kinds:
            s = summaries[kind]
            row += [s.re_mean[k], s.re_halfwidth[k], s.sot_mean[k],
                    s.sot_halfwidth[k], s.expected_state_mean[k]]
        rows.append(row)
    paths = [_write_csv(out_dir / "arm_curves.csv", header, rows)]

    thresholds = sorted(summaries[kinds[0]].trials_to_threshold)
    ep_header = (["arm", "episode", "cumulative_cost"]
                 + [f"trials_to_re_{th}" for th in thresholds]
                 + ["mastery_trial"])
    ep_rows = []
    for kind in kinds:
        s = summaries[kind]
        for e in range(s.n_episodes):
            row = [kind, e, s.cumulative_costs[e]]
            for th in thresholds:
                v = s.trials_to_threshold[th][e]
                row.append("" if np.isnan(v) else int(v))
            m = s.mastery_trials[e]
            row.append("" if np.isnan(m) else int(m))
            ep_rows.append(row)
    paths.append(_write_csv(out_dir / "arm_episodes.csv", ep_header, ep_rows))

    fig, axes = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    trials = np.arange(1, n + 1)
    for kind in kinds:
        s = summaries[kind]
        for ax, mean, half in ((axes[0], s.re_mean, s.re_halfwidth),
                               (axes[1], s.sot_mean, s.sot_halfwidth)):
            ax.plot(trials, mean, lw=1.2, label=kind)
            ax.fill_between(trials, mean - half, mean + half, alpha=0.2)
    axes[0].set_ylabel("reaching error")
    axes[1].set_ylabel("smoothness")
    axes[1].set_xlabel("trial")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_dir / "arm_curves.png", dpi=110)
    plt.close(fig)
    paths.append(Path(out_dir / "arm_curves.png"))

    fig, ax = plt.subplots(figsize=(7, 3.2))
    for kind in kinds:
        ax.plot(trials, summaries[kind].expected_state_mean, lw=1.4, label=kind)
    ax.set_xlabel("trial")
    ax.set_ylabel("mean expected skill state")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_dir / "arm_expected_state.png", dpi=110)
    plt.close(fig)
    paths.append(Path(out_dir / "arm_expected_state.png"))
    return paths
