"""Record the scripted-input replay fixture.

Authors a deterministic input script (slider/key actions on the 10 ms
sample grid), runs it through the real client pipeline
(dist/tools/record_poses.js) to get the pose tape, plays that tape into a
live session over the websocket protocol, and freezes three files under
tests/fixtures/:

  script.json      the input script (the only ground truth the replay needs)
  server_map.json  the posture map payload the server sent at calibration-done
  trajectory.json  the per-trial cursor trajectories the server logged

The replay test re-runs script.json through the TypeScript pipeline and must
reproduce trajectory.json bit for bit via server_map.json.

Rerun from frontend/ after `npm run build`:
    python3 tools/record_fixture.py
"""

import json
import subprocess
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from hapticnudge.persist import read_records
from hapticnudge.service import ServiceSettings, create_app, session_log_path

HERE = Path(__file__).resolve().parent
FRONT = HERE.parent
FIXTURES = FRONT / "tests" / "fixtures"
RECORDER = FRONT / "dist" / "tools" / "record_poses.js"

SESSION = "replay-fixture"
SEED = 20
N_TRIALS = 6
REST = 0.8
CALIB_POSES = 32
CALIB_STRIDE = 10          # calibration samples go out at 10 Hz
FAMIL_SECONDS = 0.25
LEAD = 2                   # stationary slots at the start of each trial batch
GLIDE = 12                 # slots spent sliding toward the goal posture
HOLD = 22                  # stationary slots; the 15-sample stability rule fires inside

JOINT_LO, JOINT_HI = 0.05, 1.55   # keep authored values clear of the hand's clamp


def calibration_actions():
    """Slider actions for 32 calibration poses with dense rank-4 variation."""
    rng = np.random.default_rng(614)
    patterns = rng.uniform(-1.0, 1.0, size=(4, 20))
    phases = np.linspace(0.0, 2.0 * np.pi, CALIB_POSES, endpoint=False)
    coefs = np.column_stack([np.cos(phases * k) for k in (1, 2, 3, 5)])
    coefs = coefs * np.array([0.30, 0.20, 0.12, 0.08])
    actions, slots = [], []
    for n in range(CALIB_POSES):
        at = n * CALIB_STRIDE
        slots.append(at)
        pose = REST + coefs[n] @ patterns
        assert np.all((pose > JOINT_LO) & (pose < JOINT_HI))
        for j, v in enumerate(pose):
            actions.append({"at": at, "set": {"joint": j, "value": round(float(v), 4)}})
    return actions, slots


def run_tape(script: dict, workdir: Path) -> list:
    spath = workdir / "script.json"
    ppath = workdir / "poses.json"
    spath.write_text(json.dumps(script))
    subprocess.run(["node", str(RECORDER), str(spath), str(ppath)], check=True)
    return json.loads(ppath.read_text())


def main() -> None:
    if not RECORDER.exists():
        raise SystemExit("build the frontend first: npm run build")
    actions, calib_slots = calibration_actions()
    famil_start = calib_slots[-1] + 1
    # a few key presses during familiarization exercise the key-binding path
    # (famil samples are never buffered, so they cannot disturb any trial)
    for offset, key in enumerate(["2", "w", "w", "s"]):
        actions.append({"at": famil_start + 1 + offset, "key": key})
    script = {
        "rest": REST,
        "slots": famil_start + 40,
        "calibration_slots": calib_slots,
        "actions": actions,
    }

    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        tape = run_tape(script, workdir)
        st = ServiceSettings(
            log_dir=str(workdir / "logs"),
            state_dir=str(workdir / "state"),
            policy_kind="random",
            blocks=1,
            trials_per_block=N_TRIALS,
            seed=SEED,
            familiarization_seconds=FAMIL_SECONDS,
        )
        app = create_app(st)
        cues = []
        with TestClient(app) as tc, tc.websocket_connect("/session") as ws:
            seq = 0

            def send(kind, payload):
                nonlocal seq
                seq += 1
                ws.send_json({"kind": kind, "session": SESSION, "seq": seq,
                              "payload": payload})

            def send_pose(trial, entry):
                send("pose-sample", {"trial": trial, "t": entry["t"],
                                     "pose": entry["pose"]})

            def read_until(kind):
                got = []
                while True:
                    msg = ws.receive_json()
                    assert msg["kind"] != "error", msg
                    got.append(msg)
                    if msg["kind"] == kind:
                        return got

            send("hello", {})
            hello = ws.receive_json()
            assert hello["payload"]["phase"] == "calibration"

            for s in calib_slots:
                send("calibration-sample", {"pose": tape[s]["pose"]})
            send("calibration-done", {})
            ack = ws.receive_json()
            assert ack["kind"] == "calibration-done", ack
            map_payload = ack["payload"]["map"]
            weights = np.array(map_payload["weights"])
            center = np.array(map_payload["center"])
            wc = np.array(map_payload["window_center"])

            # familiarization: the server flips to training on the first
            # sample at least FAMIL_SECONDS after the first one it saw
            cursor = famil_start
            t0 = tape[cursor]["t"]
            while tape[cursor]["t"] - t0 < FAMIL_SECONDS:
                send_pose(0, tape[cursor])
                cursor += 1
            send_pose(0, tape[cursor])   # trigger slot, consumed not buffered
            cursor += 1
            msgs = read_until("nudge-cue")
            assign = [m for m in msgs if m["kind"] == "target-assigned"][0]
            cues.append([m for m in msgs if m["kind"] == "nudge-cue"][0])

            for trial in range(1, N_TRIALS + 1):
                assert assign["payload"]["trial"] == trial
                pos = np.array(assign["payload"]["position"])
                goal = np.linalg.pinv(weights) @ (pos - wc) + center
                goal = [round(float(v), 4) for v in goal]
                assert all(JOINT_LO < v < JOINT_HI for v in goal), goal

                glide_start = cursor + LEAD
                batch_end = glide_start + GLIDE + HOLD   # exclusive
                script["slots"] = batch_end
                start = tape[-1]["pose"] if glide_start - 1 >= len(tape) \
                    else tape[glide_start - 1]["pose"]
                for s in range(GLIDE):
                    frac = (s + 1) / GLIDE
                    for j in range(20):
                        v = round(start[j] + frac * (goal[j] - start[j]), 4)
                        script["actions"].append(
                            {"at": glide_start + s, "set": {"joint": j, "value": v}})
                tape = run_tape(script, workdir)

                for s in range(cursor, batch_end):
                    send_pose(trial, tape[s])
                cursor = batch_end
                msgs = read_until("trial-result")
                assert all(m["kind"] == "trial-result" for m in msgs), msgs
                if trial < N_TRIALS:
                    msgs = read_until("nudge-cue")
                    assign = [m for m in msgs if m["kind"] == "target-assigned"][0]
                    cues.append([m for m in msgs if m["kind"] == "nudge-cue"][0])
                else:
                    read_until("session-summary")

        records, skipped = read_records(session_log_path(st, SESSION))
        assert skipped == [] and len(records) == N_TRIALS
        trajectories = [
            {"trial": r.trial, "captured": r.captured,
             "t": r.trajectory["t"], "x": r.trajectory["x"], "y": r.trajectory["y"]}
            for r in records
        ]

    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "script.json").write_text(json.dumps(script))
    (FIXTURES / "server_map.json").write_text(json.dumps(map_payload))
    (FIXTURES / "trajectory.json").write_text(json.dumps(trajectories))
    n_samples = sum(len(tr["t"]) for tr in trajectories)
    captured = sum(tr["captured"] for tr in trajectories)
    print(f"recorded {len(trajectories)} trials, {n_samples} trajectory samples, "
          f"{captured} captured; {len(script['actions'])} script actions, "
          f"{script['slots']} slots")
    for cue in cues:
        sched = cue["payload"]["schedule"]
        assert sched == {"burst_ms": 150.0, "gap_ms": 2000.0, "bursts": 2}


if __name__ == "__main__":
    main()
