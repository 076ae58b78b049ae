"""Live-session service: drive the target-capture protocol for a human player.

A session walks through calibration (skipped when a posture map artifact is
preloaded), a short familiarization period, and the training trials. Per
trial the server assigns a target, prescribes a nudge cue, streams in pose
samples, detects the trial end online with the same rules the offline
metrics use, computes RE/SoT, advances the skill belief, appends a log
record, and checkpoints so a dropped connection can resume mid-session.

Transport is a websocket carrying JSON envelopes
{kind, session, seq, payload}; client kinds are hello, calibration-sample,
calibration-done, pose-sample; server kinds are hello, calibration-done,
target-assigned, nudge-cue, trial-result, session-summary, warning, error.
Client sequence numbers are per-connection and must increase; server
sequence numbers are per-session and persist across reconnects. The hello
and calibration-done replies carry the active posture map (weights, center,
window) so a client can render the cursor with the exact map the server
scores against; all analytics (RE, SoT, belief) still come only from
server messages.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import bomi
from .bomi import MIN_CALIBRATION_POSES, CalibrationError, calibrate
from .iohmm import N_NUDGE_LEVELS, encode_input
from .metrics import (
    CAP_SECONDS,
    MOVEMENT_SPEED_EPS,
    STABILITY_EPS,
    STABILITY_SAMPLES,
    CursorTrajectory,
    TrialEnd,
    UndefinedSmoothnessError,
    compute_re,
    compute_sot,
    is_captured,
)
from .persist import (
    TrialRecord,
    append_record,
    load_bomi_map,
    load_iohmm,
    load_policy,
    save_bomi_map,
)
from .policy import (
    BeliefState,
    DegenerateObservationError,
    HeuristicConfig,
    OrderedModel,
    belief_predict,
    belief_update,
    expected_latent_state,
    heuristic_nudge,
    initial_belief,
    select_nudge,
)
from .simulator import CENTER_TARGET, POLICY_KINDS, movement_slope

# two-burst vibrotactile cue timing, delivered to the client as metadata
CUE_BURST_MS = 150.0
CUE_GAP_MS = 2000.0
CUE_BURSTS = 2

# relative deviation of the mean sample interval that triggers a warning
DRIFT_TOLERANCE = 0.2

_ENV_KEYS = {
    "HAPTICNUDGE_MAP": "map_path",
    "HAPTICNUDGE_MODEL": "model_path",
    "HAPTICNUDGE_POLICY": "policy_path",
    "HAPTICNUDGE_LOG_DIR": "log_dir",
    "HAPTICNUDGE_STATE_DIR": "state_dir",
    "HAPTICNUDGE_SEED": "seed",
}

_BELIEF_ORDERS = ("correct-then-predict", "predict-then-correct")


@dataclass(frozen=True)
class ServiceSettings:
    """Everything the serve path needs: artifact paths, protocol, policy."""

    log_dir: str = "logs"
    state_dir: str = "state"
    map_path: str | None = None
    model_path: str | None = None
    policy_path: str | None = None
    policy_kind: str = "qmdp"
    blocks: int = 8
    trials_per_block: int = 60
    targets: tuple = (1, 2, 3, 4)
    seed: int = 0
    familiarization_seconds: float = 6.0
    sample_rate_hz: float = 100.0
    nudge_delay_ms: float = 0.0
    heuristic_tau: float = 1.0
    max_trial_seconds: float = 30.0
    belief_order: str = "correct-then-predict"
    host: str = "127.0.0.1"
    port: int = 8766

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if not self.log_dir or not self.state_dir:
            raise ValueError("log_dir and state_dir must be set")
        if self.policy_kind not in POLICY_KINDS:
            raise ValueError(
                f"policy_kind must be one of {POLICY_KINDS}, got {self.policy_kind!r}")
        if self.blocks < 1 or self.trials_per_block < 1:
            raise ValueError("blocks and trials_per_block must be positive")
        if len(self.targets) < 2:
            raise ValueError("need at least 2 targets")
        for t in self.targets:
            bomi.target_position(t)
        if self.familiarization_seconds < 0:
            raise ValueError("familiarization_seconds must be nonnegative")
        if self.sample_rate_hz <= 0 or self.max_trial_seconds <= 0:
            raise ValueError("sample_rate_hz and max_trial_seconds must be positive")
        if self.heuristic_tau <= 0:
            raise ValueError("heuristic_tau must be positive")
        if self.belief_order not in _BELIEF_ORDERS:
            raise ValueError(f"belief_order must be one of {_BELIEF_ORDERS}")

    @property
    def n_trials(self) -> int:
        return self.blocks * self.trials_per_block


def load_settings(config_path=None, env=None, overrides=None) -> ServiceSettings:
    """Merge settings: defaults, then config file, then environment, then
    explicit overrides."""
    known = {f.name for f in fields(ServiceSettings)}
    merged: dict = {}

    def take(source: dict, origin: str):
        for key, value in source.items():
            if key not in known:
                raise ValueError(f"unknown setting {key!r} (from {origin})")
            merged[key] = value

    if config_path is not None:
        doc = json.loads(Path(config_path).read_text())
        if not isinstance(doc, dict):
            raise ValueError("config file must hold a JSON object")
        take(doc, str(config_path))
    env = os.environ if env is None else env
    for env_key, name in _ENV_KEYS.items():
        if env_key in env:
            value = env[env_key]
            merged[name] = int(value) if name == "seed" else value
    if overrides:
        take({k: v for k, v in overrides.items() if v is not None}, "overrides")
    return ServiceSettings(**merged)


def session_log_path(settings: ServiceSettings, session_id: str) -> Path:
    return Path(settings.log_dir) / f"session-{session_id}.jsonl"


def session_state_path(settings: ServiceSettings, session_id: str) -> Path:
    return Path(settings.state_dir) / f"session-{session_id}.json"


def session_map_path(settings: ServiceSettings, session_id: str) -> Path:
    return Path(settings.state_dir) / f"map-{session_id}.json"


@dataclass(frozen=True)
class SessionArtifacts:
    """Shared read-only artifacts loaded once per server process."""

    bmap: object = None      # BomiMap, when a global map artifact is configured
    planner: object = None   # OrderedModel, when a learner model is configured
    qf: object = None        # QFunction, when a solved policy is configured
    lookup: object = None    # StateLookup matching qf
    bundle: object = None    # the persisted policy bundle itself


def load_artifacts(settings: ServiceSettings) -> SessionArtifacts:
    bmap = load_bomi_map(settings.map_path) if settings.map_path else None
    model = load_iohmm(settings.model_path) if settings.model_path else None
    bundle = load_policy(settings.policy_path) if settings.policy_path else None

    if settings.policy_kind == "qmdp" and (model is None or bundle is None):
        raise ValueError("qmdp policy requires both model_path and policy_path")
    planner = qf = lookup = None
    if bundle is not None:
        if model is None:
            raise ValueError("a policy artifact requires its model artifact")
        if bundle.n_skill != model.n_states:
            raise ValueError(
                f"policy solved for {bundle.n_skill} states, model has {model.n_states}")
        if set(bundle.targets) != set(settings.targets):
            raise ValueError(
                f"policy solved for targets {bundle.targets}, configured {settings.targets}")
        planner = OrderedModel(model=model, ordering=bundle.ordering)
        qf = bundle.qfunction()
        lookup = bundle.lookup()
    elif model is not None:
        planner = OrderedModel.from_model(model)
    return SessionArtifacts(bmap=bmap, planner=planner, qf=qf,
                            lookup=lookup, bundle=bundle)


class _TrialBuffer:
    """Streaming cursor buffer with online trial-end detection.

    Mirrors metrics.detect_trial_end exactly: stability fires on the sample
    completing the first run of calm displacements; the 2 s cap picks the
    recorded sample nearest movement start + 2 s (ties to the earlier one);
    whichever index is smaller wins. A hard max-duration guard truncates
    runaway trials.
    """

    def __init__(self):
        self.times: list = []
        self.xs: list = []
        self.ys: list = []
        self.calm_run = 0
        self.movement_start_t = None

    def __len__(self):
        return len(self.times)

    def add(self, t: float, x: float, y: float, max_seconds: float):
        if self.times:
            if t <= self.times[-1]:
                raise ValueError(
                    f"timestamps must increase, got {t} after {self.times[-1]}")
            d = math.hypot(x - self.xs[-1], y - self.ys[-1])
            if self.movement_start_t is None and d > MOVEMENT_SPEED_EPS:
                self.movement_start_t = t
            self.calm_run = self.calm_run + 1 if d < STABILITY_EPS else 0
        self.times.append(t)
        self.xs.append(x)
        self.ys.append(y)

        n = len(self.times)
        stable_idx = n - 1 if self.calm_run >= STABILITY_SAMPLES - 1 else None
        cap_idx = None
        if self.movement_start_t is not None:
            cap_time = self.movement_start_t + CAP_SECONDS
            if t >= cap_time and n >= 2:
                before, here = self.times[n - 2], t
                cap_idx = n - 2 if abs(before - cap_time) <= abs(here - cap_time) \
                    else n - 1
        candidates = [i for i in (stable_idx, cap_idx) if i is not None]
        if candidates:
            end = min(candidates)
            return TrialEnd(index=end, truncated=False, stable=(end == stable_idx))
        if t - self.times[0] >= max_seconds:
            return TrialEnd(index=n - 1, truncated=True, stable=False)
        return None

    def trajectory(self) -> CursorTrajectory:
        return CursorTrajectory(times=np.asarray(self.times, dtype=float),
                                positions=np.column_stack([self.xs, self.ys]))


class LiveSession:
    """One player's protocol state machine, independent of the transport.

    handle(message) consumes a client envelope and returns the server
    envelopes to send back. Trial completion builds its replies first, then
    checkpoints (so restored sequence numbers cover them), then appends the
    log record; a crash in between leaves a log gap, never a duplicate or a
    torn trial index.
    """

    def __init__(self, session_id: str, settings: ServiceSettings,
                 artifacts: SessionArtifacts):
        self.sid = session_id
        self.st = settings
        self.bmap = artifacts.bmap
        self.planner = artifacts.planner
        self.qf = artifacts.qf
        self.lookup = artifacts.lookup
        self.phase = "calibration" if self.bmap is None else "familiarization"
        self.calib: list = []
        self.rng_targets = np.random.default_rng(
            np.random.SeedSequence(settings.seed, spawn_key=(0,)))
        self.rng_policy = np.random.default_rng(
            np.random.SeedSequence(settings.seed, spawn_key=(1,)))
        self.server_seq = 0
        self.last_client_seq = None
        self.trial = 0
        self.prev_target = None
        self.cur_target = None
        self.pending_nudge = None
        self.belief = None
        self.buffer = None
        self.onset_pose = None
        self.famil_t0 = None
        self.n_done = 0
        self.captures = 0
        self.truncated_count = 0
        self.re_sum = 0.0
        self.sot_sum = 0.0
        self.sot_count = 0
        self.finished = False
        Path(settings.log_dir).mkdir(parents=True, exist_ok=True)
        Path(settings.state_dir).mkdir(parents=True, exist_ok=True)

    @classmethod
    def open(cls, session_id: str, settings: ServiceSettings,
             artifacts: SessionArtifacts) -> "LiveSession":
        sess = cls(session_id, settings, artifacts)
        state_path = session_state_path(settings, session_id)
        if state_path.exists():
            sess._restore(json.loads(state_path.read_text()))
        return sess

    # --- envelope helpers ------------------------------------------------

    def _msg(self, kind: str, payload: dict) -> dict:
        self.server_seq += 1
        return {"kind": kind, "session": self.sid, "seq": self.server_seq,
                "payload": payload}

    def _map_json(self):
        if self.bmap is None:
            return None
        return {
            "weights": [[float(v) for v in row] for row in self.bmap.weights],
            "center": [float(v) for v in self.bmap.center],
            "window": float(self.bmap.window),
            "window_center": [float(v) for v in bomi.WINDOW_CENTER],
        }

    def _error(self, code: str, detail: str) -> dict:
        return self._msg("error", {"code": code, "detail": detail})

    def _warning(self, code: str, detail: str) -> dict:
        return self._msg("warning", {"code": code, "detail": detail})

    def _assign_msg(self) -> dict:
        pos = bomi.target_position(self.cur_target)
        return self._msg("target-assigned", {
            "trial": self.trial,
            "prev_target": int(self.prev_target),
            "cur_target": int(self.cur_target),
            "position": [float(pos[0]), float(pos[1])],
            "phase": "training",
        })

    def _cue_msg(self) -> dict:
        return self._msg("nudge-cue", {
            "trial": self.trial,
            "finger": int(self.pending_nudge),
            "delay_ms": float(self.st.nudge_delay_ms),
            "schedule": {"burst_ms": CUE_BURST_MS, "gap_ms": CUE_GAP_MS,
                         "bursts": CUE_BURSTS},
        })

    def _summary_msg(self) -> dict:
        return self._msg("session-summary", {
            "trials": self.n_done,
            "captures": self.captures,
            "truncated_count": self.truncated_count,
            "mean_re": self.re_sum / self.n_done if self.n_done else None,
            "mean_sot": self.sot_sum / self.sot_count if self.sot_count else None,
        })

    # --- message dispatch ------------------------------------------------

    def handle(self, msg: dict) -> list:
        kind = msg.get("kind")
        seq = msg.get("seq")
        payload = msg.get("payload")
        if not isinstance(seq, int) or isinstance(seq, bool):
            return [self._error("malformed", "seq must be an integer")]
        if not isinstance(payload, dict):
            return [self._error("malformed", "payload must be an object")]
        if kind == "hello":
            self.last_client_seq = seq
            return self._hello_replies()
        if self.last_client_seq is not None and seq <= self.last_client_seq:
            return [self._error(
                "seq-regression",
                f"seq {seq} does not follow {self.last_client_seq}")]
        self.last_client_seq = seq
        if kind == "calibration-sample":
            return self._on_calibration_sample(payload)
        if kind == "calibration-done":
            return self._on_calibration_done()
        if kind == "pose-sample":
            return self._on_pose_sample(payload)
        return [self._error("unknown-kind", f"unsupported message kind {kind!r}")]

    def _hello_replies(self) -> list:
        out = [self._msg("hello", {
            "phase": self.phase,
            "trial": self.trial,
            "n_trials": self.st.n_trials,
            "policy": self.st.policy_kind,
            "targets": list(self.st.targets),
            "familiarization_seconds": self.st.familiarization_seconds,
            "sample_rate_hz": self.st.sample_rate_hz,
            "map": self._map_json(),
        })]
        if self.finished:
            out.append(self._summary_msg())
        elif self.phase == "training":
            # re-announce the in-flight trial; its pose stream starts over
            self.buffer = _TrialBuffer()
            self.onset_pose = None
            out.append(self._assign_msg())
            if self.pending_nudge is not None:
                out.append(self._cue_msg())
        return out

    # --- calibration -----------------------------------------------------

    def _on_calibration_sample(self, payload: dict) -> list:
        if self.phase != "calibration":
            return [self._error("bad-phase", f"cannot calibrate during {self.phase}")]
        try:
            pose = bomi.as_pose(payload.get("pose"))
        except (ValueError, TypeError) as exc:
            return [self._error("bad-pose", str(exc))]
        self.calib.append(pose)
        return []

    def _on_calibration_done(self) -> list:
        if self.phase != "calibration":
            return [self._error("bad-phase", f"cannot calibrate during {self.phase}")]
        if len(self.calib) < MIN_CALIBRATION_POSES:
            return [self._error(
                "calibration-underflow",
                f"need at least {MIN_CALIBRATION_POSES} poses, got {len(self.calib)}")]
        try:
            self.bmap = calibrate(np.asarray(self.calib))
        except CalibrationError as exc:
            return [self._error("calibration-degenerate", str(exc))]
        save_bomi_map(self.bmap, session_map_path(self.st, self.sid))
        self.phase = "familiarization"
        self._checkpoint()
        return [self._msg("calibration-done",
                          {"poses": len(self.calib), "phase": self.phase,
                           "map": self._map_json()})]

    # --- pose stream -----------------------------------------------------

    def _on_pose_sample(self, payload: dict) -> list:
        if self.phase == "calibration":
            return [self._error("bad-phase", "session is still calibrating")]
        if self.finished:
            return []
        trial = payload.get("trial")
        t = payload.get("t")
        if not isinstance(trial, int) or isinstance(trial, bool):
            return [self._error("malformed", "pose-sample trial must be an integer")]
        if not isinstance(t, (int, float)) or not math.isfinite(t):
            return [self._error("malformed", "pose-sample t must be a finite number")]
        try:
            pose = bomi.as_pose(payload.get("pose"))
        except (ValueError, TypeError) as exc:
            return [self._error("bad-pose", str(exc))]

        if self.phase == "familiarization":
            if self.famil_t0 is None:
                self.famil_t0 = float(t)
            if t - self.famil_t0 >= self.st.familiarization_seconds:
                return self._start_training()
            return []

        if trial < self.trial:
            return []   # stale sample from an already-finished trial
        if trial > self.trial:
            return [self._error("bad-trial",
                                f"trial {trial} not started (current {self.trial})")]

        out = []
        if self.onset_pose is None:
            self.onset_pose = [float(v) for v in pose]
            if self.pending_nudge is None:   # heuristic: decide from the onset pose
                finger, _ = heuristic_nudge(
                    pose, self.bmap.optimal_posture(self.cur_target),
                    HeuristicConfig(tau=self.st.heuristic_tau), self.rng_policy)
                self.pending_nudge = int(finger)
                out.append(self._cue_msg())
                self._checkpoint()
        cursor = self.bmap.cursor_position(pose)
        try:
            end = self.buffer.add(float(t), float(cursor[0]), float(cursor[1]),
                                  self.st.max_trial_seconds)
        except ValueError as exc:
            return out + [self._error("bad-sample", str(exc))]
        if end is not None:
            out.extend(self._end_trial(end))
        return out

    # --- trial lifecycle -------------------------------------------------

    def _start_training(self) -> list:
        self.phase = "training"
        self.trial = 1
        ids = list(self.st.targets)
        self.prev_target = CENTER_TARGET
        self.cur_target = ids[int(self.rng_targets.integers(len(ids)))]
        if self.planner is not None:
            x0 = encode_input(movement_slope(self.prev_target, self.cur_target), 0)
            self.belief = initial_belief(self.planner, x0,
                                         self.prev_target, self.cur_target)
        self.pending_nudge = self._decide_nudge()
        self.buffer = _TrialBuffer()
        self.onset_pose = None
        out = [self._assign_msg()]
        if self.pending_nudge is not None:
            out.append(self._cue_msg())
        self._checkpoint()
        return out

    def _decide_nudge(self):
        kind = self.st.policy_kind
        if kind == "control":
            return 0
        if kind == "random":
            return int(self.rng_policy.integers(1, N_NUDGE_LEVELS))
        if kind == "heuristic":
            return None   # needs the trial's onset pose
        if self.trial == 1:
            return 0      # qmdp: no evidence yet, hold back the first nudge
        action, _ = select_nudge(self.belief, self.qf, self.lookup,
                                 self.rng_policy)
        return int(action)

    def _draw_next_target(self) -> int:
        ids = list(self.st.targets)
        idx = ids.index(self.cur_target)
        j = int(self.rng_targets.integers(len(ids) - 1))
        if j >= idx:
            j += 1
        return ids[j]

    def _end_trial(self, end: TrialEnd) -> list:
        traj = self.buffer.trajectory()
        target_pos = bomi.target_position(self.cur_target)
        re = compute_re(traj, target_pos, end.index)
        try:
            sot = compute_sot(traj, end.index)
        except UndefinedSmoothnessError:
            sot = None
        captured = is_captured(traj, end, target_pos)

        warnings = []
        if sot is None:
            warnings.append(("smoothness-undefined",
                             f"trial {self.trial}: start and end coincide"))
        mean_dt = (traj.times[-1] - traj.times[0]) / (len(traj) - 1)
        expected_dt = 1.0 / self.st.sample_rate_hz
        if abs(mean_dt - expected_dt) > DRIFT_TOLERANCE * expected_dt:
            warnings.append((
                "sample-rate-drift",
                f"trial {self.trial}: observed {1.0 / mean_dt:.1f} Hz, "
                f"expected {self.st.sample_rate_hz:.1f} Hz"))

        slope = movement_slope(self.prev_target, self.cur_target)
        nudge = int(self.pending_nudge)
        pre_belief = self.belief
        last = self.trial >= self.st.n_trials
        next_target = None if last else self._draw_next_target()

        if self.planner is not None and not last:
            x = encode_input(slope, nudge)
            next_pair = (self.cur_target, next_target)
            if sot is None:
                self.belief = belief_predict(self.planner, self.belief, x, next_pair)
            else:
                try:
                    self.belief = belief_update(
                        self.planner, self.belief, x, np.array([re, sot]),
                        next_pair, order=self.st.belief_order)
                except DegenerateObservationError as exc:
                    warnings.append(("degenerate-observation", str(exc)))
                    self.belief = belief_predict(self.planner, self.belief,
                                                 x, next_pair)

        self.n_done += 1
        self.captures += int(captured)
        self.truncated_count += int(end.truncated)
        self.re_sum += re
        if sot is not None:
            self.sot_sum += sot
            self.sot_count += 1

        record = TrialRecord(
            session=self.sid,
            trial=self.trial,
            prev_target=int(self.prev_target),
            cur_target=int(self.cur_target),
            nudge=nudge,
            slope=float(slope),
            re=float(re),
            sot=None if sot is None else float(sot),
            belief=None if pre_belief is None else
                [float(v) for v in pre_belief.skill],
            expected_state=None if pre_belief is None else
                expected_latent_state(pre_belief),
            captured=bool(captured),
            truncated=bool(end.truncated),
            end_index=int(end.index),
            onset_pose=self.onset_pose,
            trajectory={"t": [float(v) for v in self.buffer.times],
                        "x": [float(v) for v in self.buffer.xs],
                        "y": [float(v) for v in self.buffer.ys]},
            t_start=float(traj.times[0]),
            t_end=float(traj.times[end.index]),
        )

        out = [self._warning(code, detail) for code, detail in warnings]
        out.append(self._msg("trial-result", {
            "trial": self.trial,
            "re": record.re,
            "sot": record.sot,
            "captured": record.captured,
            "truncated": record.truncated,
            "end_index": record.end_index,
            "belief": record.belief,
            "expected_state": record.expected_state,
        }))
        if last:
            self.finished = True
            self.pending_nudge = None
            self.buffer = None
            out.append(self._summary_msg())
        else:
            self.trial += 1
            self.prev_target = self.cur_target
            self.cur_target = next_target
            self.pending_nudge = self._decide_nudge()
            self.buffer = _TrialBuffer()
            self.onset_pose = None
            out.append(self._assign_msg())
            if self.pending_nudge is not None:
                out.append(self._cue_msg())
        self._checkpoint()
        append_record(session_log_path(self.st, self.sid), record)
        return out

    # --- checkpointing ---------------------------------------------------

    def _checkpoint(self):
        state = {
            "kind": "session-checkpoint",
            "version": 1,
            "session": self.sid,
            "phase": self.phase,
            "trial": self.trial,
            "prev_target": self.prev_target,
            "cur_target": self.cur_target,
            "pending_nudge": self.pending_nudge,
            "belief": None if self.belief is None else
                [float(v) for v in self.belief.skill],
            "finished": self.finished,
            "server_seq": self.server_seq,
            "n_done": self.n_done,
            "captures": self.captures,
            "truncated_count": self.truncated_count,
            "re_sum": self.re_sum,
            "sot_sum": self.sot_sum,
            "sot_count": self.sot_count,
            "rng_targets": self.rng_targets.bit_generator.state,
            "rng_policy": self.rng_policy.bit_generator.state,
            "map_file": None if self.st.map_path else
                str(session_map_path(self.st, self.sid)),
        }
        path = session_state_path(self.st, self.sid)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(state, sort_keys=True))
        os.replace(tmp, path)

    def _restore(self, state: dict):
        if state.get("kind") != "session-checkpoint" or state.get("version") != 1:
            raise ValueError("unrecognized session checkpoint")
        if state.get("session") != self.sid:
            raise ValueError("checkpoint belongs to a different session")
        self.phase = state["phase"]
        self.trial = state["trial"]
        self.prev_target = state["prev_target"]
        self.cur_target = state["cur_target"]
        self.pending_nudge = state["pending_nudge"]
        self.finished = state["finished"]
        self.server_seq = state["server_seq"]
        self.n_done = state["n_done"]
        self.captures = state["captures"]
        self.truncated_count = state["truncated_count"]
        self.re_sum = state["re_sum"]
        self.sot_sum = state["sot_sum"]
        self.sot_count = state["sot_count"]
        self.rng_targets.bit_generator.state = state["rng_targets"]
        self.rng_policy.bit_generator.state = state["rng_policy"]
        if self.bmap is None and state.get("map_file"):
            self.bmap = load_bomi_map(state["map_file"])
        if self.planner is not None and state.get("belief") is not None:
            self.belief = BeliefState(skill=np.asarray(state["belief"]),
                                      prev_target=self.prev_target,
                                      cur_target=self.cur_target)
        if self.phase == "training" and not self.finished:
            self.buffer = _TrialBuffer()
            self.onset_pose = None


def _bare_error(session_id: str, code: str, detail: str) -> dict:
    return {"kind": "error", "session": session_id, "seq": 0,
            "payload": {"code": code, "detail": detail}}


def _dispatch(text: str, settings: ServiceSettings,
              artifacts: SessionArtifacts, sessions: dict) -> list:
    try:
        msg = json.loads(text)
    except json.JSONDecodeError:
        return [_bare_error("", "malformed", "message is not valid JSON")]
    if not isinstance(msg, dict) or not isinstance(msg.get("kind"), str):
        return [_bare_error("", "malformed",
                            "expected an object with kind/session/seq/payload")]
    sid = msg.get("session")
    if not isinstance(sid, str) or not sid:
        return [_bare_error("", "malformed", "missing session id")]
    if msg["kind"] == "hello" and sid not in sessions:
        sessions[sid] = LiveSession.open(sid, settings, artifacts)
    if sid not in sessions:
        return [_bare_error(sid, "no-session", "say hello first")]
    return sessions[sid].handle(msg)


def create_app(settings: ServiceSettings):
    """Build the websocket application serving live sessions at /session."""
    artifacts = load_artifacts(settings)
    app = FastAPI(title="hapticnudge session service")
    sessions: dict = {}
    app.state.settings = settings
    app.state.sessions = sessions

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                text = await ws.receive_text()
                for reply in _dispatch(text, settings, artifacts, sessions):
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            return

    return app
