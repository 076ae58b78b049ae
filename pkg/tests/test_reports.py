"""Report generation: delimited tables plus rendered figures."""

import csv

import numpy as np

from hapticnudge import persist, reports, simulator
from hapticnudge.reports import analyze_log, rollout_to_records, write_simulation_reports
from hapticnudge.simulator import ExperimentConfig, compare_policies, ladder_learner


def small_rollout(policy_kind="random", seed=0, trials=40):
    cfg = ExperimentConfig(learner_model=ladder_learner(3),
                           policy_kind=policy_kind, blocks=1,
                           trials_per_block=trials, seed=seed)
    return simulator.run_episode(cfg)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestRolloutRecords:
    def test_field_mapping(self):
        res = small_rollout()
        recs = rollout_to_records(res, session="sim-0")
        assert len(recs) == 40
        assert [r.trial for r in recs] == list(range(1, 41))
        k = 7
        assert recs[k].session == "sim-0"
        assert recs[k].prev_target == int(res.prev_targets[k])
        assert recs[k].cur_target == int(res.cur_targets[k])
        assert recs[k].nudge == int(res.nudges[k])
        assert recs[k].re == float(res.observations[k, 0])
        assert recs[k].sot == float(res.observations[k, 1])
        assert recs[k].state == int(res.states[k])
        assert recs[k].belief == list(res.beliefs[k])
        assert recs[k].t_start is None and recs[k].trajectory is None

    def test_records_serialize(self, tmp_path):
        recs = rollout_to_records(small_rollout(), session="sim-0")
        path = tmp_path / "log.jsonl"
        persist.write_records(path, recs)
        loaded, skipped = persist.read_records(path)
        assert skipped == []
        assert len(loaded) == 40


class TestAnalyzeLog:
    def _write_log(self, tmp_path, trials=40):
        recs = rollout_to_records(small_rollout(trials=trials), session="sim-0")
        log = tmp_path / "log.jsonl"
        persist.write_records(log, recs)
        return log

    def test_outputs_exist_and_replay_identically(self, tmp_path):
        log = self._write_log(tmp_path)
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        res1 = analyze_log(log, out1)
        res2 = analyze_log(log, out2)
        assert res1.n_records == 40 and res1.n_skipped == 0
        trials1, trials2 = out1 / "trials.csv", out2 / "trials.csv"
        assert trials1.exists()
        assert trials1.read_bytes() == trials2.read_bytes()
        assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()
        rows = read_csv(trials1)
        assert len(rows) == 41   # header + one row per trial
        figs = list(out1.glob("*.png"))
        assert figs and all(p.stat().st_size > 0 for p in figs)

    def test_skip_count_reported(self, tmp_path):
        log = self._write_log(tmp_path)
        lines = log.read_text().splitlines()
        lines[3] = lines[3][:20]
        log.write_text("\n".join(lines) + "\n")
        out = tmp_path / "r"
        res = analyze_log(log, out)
        assert res.n_records == 39 and res.n_skipped == 1
        summary = dict(r[:2] for r in read_csv(out / "summary.csv")[1:])
        assert summary["skipped_lines"] == "1"

    def test_empty_log_succeeds(self, tmp_path):
        log = tmp_path / "log.jsonl"
        log.write_text("")
        out = tmp_path / "r"
        res = analyze_log(log, out)
        assert res.n_records == 0
        rows = read_csv(out / "trials.csv")
        assert len(rows) == 1    # header only

    def test_model_reports(self, tmp_path):
        log = self._write_log(tmp_path)
        model_path = tmp_path / "model.json"
        persist.save_iohmm(ladder_learner(3), model_path)
        out = tmp_path / "r"
        analyze_log(log, out, model_path=model_path)
        stm = read_csv(out / "stm_report.csv")
        # header + 6 pairs x 6 nudges x 3 source ranks
        assert len(stm) == 1 + 6 * 6 * 3
        probs = np.array([[float(v) for v in row[-3:]] for row in stm[1:]])
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        costs = read_csv(out / "state_costs.csv")
        assert len(costs) == 1 + 3
        assert (out / "stm.png").stat().st_size > 0


class TestSimulationReports:
    def test_tables_and_figures(self, tmp_path):
        cfg = ExperimentConfig(learner_model=ladder_learner(3),
                               policy_kind="control", blocks=1,
                               trials_per_block=30, seed=1)
        out = compare_policies(cfg, ("control", "qmdp"), n_episodes=2)
        d1, d2 = tmp_path / "s1", tmp_path / "s2"
        paths1 = write_simulation_reports(out, d1)
        write_simulation_reports(out, d2)
        curves = read_csv(d1 / "arm_curves.csv")
        assert len(curves) == 31
        assert curves[0][0] == "trial"
        episodes = read_csv(d1 / "arm_episodes.csv")
        assert len(episodes) == 1 + 2 * 2   # two arms x two episodes
        assert (d1 / "arm_curves.csv").read_bytes() == (d2 / "arm_curves.csv").read_bytes()
        assert (d1 / "arm_episodes.csv").read_bytes() == (d2 / "arm_episodes.csv").read_bytes()
        pngs = list(d1.glob("*.png"))
        assert pngs and all(p.stat().st_size > 0 for p in pngs)
        assert all(p.exists() for p in paths1)
