"""Command-line interface.

Verbs cover the full workflow: calibrate a posture-to-cursor map, fit a
learner model from trial logs, solve it into a nudge policy, benchmark
policy arms in simulation, analyze logs into tables and figures, and serve
live sessions. Results go to stdout as tab-delimited lines; diagnostics and
errors go to stderr; failures exit with status 2. Artifacts embed no
timestamps, so repeating a command reproduces its outputs byte for byte.
"""

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bomi
from .iohmm import FitConfig, Sequence, cross_validate, mc_train, order_states
from .persist import (FormatError, PolicyBundle, file_sha256, load_iohmm,
                      read_records, save_bomi_map, save_iohmm, save_policy,
                      write_records)
from .policy import (DEFAULT_ALPHA, DEFAULT_GAMMA, DEFAULT_W_G, DEFAULT_W_SOT,
                     OrderedModel, build_pomdp, soft_value_iteration)
from .reports import analyze_log, rollout_to_records, write_simulation_reports
from .simulator import POLICY_KINDS, ExperimentConfig, compare_policies


def _say(*fields):
    print("\t".join(str(f) for f in fields))


def _warn_skipped(path, skipped):
    for lineno, reason in skipped:
        print(f"{path}:{lineno}: skipped line ({reason})", file=sys.stderr)


def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(tok) for tok in str(text).split(","))
    except ValueError:
        raise ValueError(f"expected comma-separated integers, got {text!r}")


def _source_stamp(path) -> dict:
    return {"path": str(path), "sha256": file_sha256(path)}


# --- calibrate --------------------------------------------------------------

def cmd_calibrate(args) -> int:
    path = Path(args.poses)
    with open(path) as fh:
        first = fh.readline()
    delimiter = "," if "," in first else None
    poses = np.loadtxt(path, delimiter=delimiter, ndmin=2)
    bmap = bomi.calibrate(poses)
    provenance = {"command": "calibrate", "poses": int(poses.shape[0]),
                  "source": _source_stamp(path)}
    save_bomi_map(bmap, args.out, provenance=provenance)
    _say("map", args.out, "poses", poses.shape[0])
    return 0


# --- fit --------------------------------------------------------------------

def _load_sequences(log_paths):
    """Trial logs -> per-session Sequences, preserving trial order.

    Trials without both metric values (undefined smoothness, truncated
    captures) cannot enter the likelihood and are dropped with a note.
    """
    sequences, data_stamps = [], []
    for path in log_paths:
        records, skipped = read_records(path)
        _warn_skipped(path, skipped)
        sessions: dict = {}
        dropped = 0
        for rec in records:
            if rec.re is None or rec.sot is None:
                dropped += 1
                continue
            sessions.setdefault(rec.session, []).append(rec)
        if dropped:
            print(f"{path}: dropped {dropped} trials without both metrics",
                  file=sys.stderr)
        for sid, recs in sessions.items():
            recs = sorted(recs, key=lambda r: r.trial)
            sequences.append(Sequence.from_trials(
                [r.slope for r in recs], [r.nudge for r in recs],
                [[r.re, r.sot] for r in recs]))
        data_stamps.append(dict(_source_stamp(path), records=len(records),
                                sessions=len(sessions)))
    if not sequences:
        raise ValueError("no usable trial sequences in the given logs")
    return sequences, data_stamps


def cmd_fit(args) -> int:
    state_grid = _parse_ints(args.states)
    sequences, data_stamps = _load_sequences(args.log)

    def config_for(n_states: int) -> FitConfig:
        return FitConfig(n_states=n_states, l2_transition=args.l2,
                         elastic_net_alpha=args.elastic_net,
                         l1_ratio=args.l1_ratio, max_iterations=args.max_iter,
                         tolerance=args.tol, n_permutations=args.restarts,
                         seed=args.seed)

    cv_doc = None
    if len(state_grid) == 1:
        cfg = config_for(state_grid[0])
    else:
        cv = cross_validate(sequences, [config_for(s) for s in state_grid],
                            k=args.folds, seed=args.seed)
        for s, mean in zip(state_grid, cv.means):
            _say("cv", f"states={s}", f"mean_heldout={mean:.6f}")
        cfg = cv.best_config
        cv_doc = {"states": list(state_grid), "folds": args.folds,
                  "mean_heldout": [float(v) for v in cv.means]}

    fit = mc_train(sequences, cfg)
    for i, ll in enumerate(fit.restart_logliks):
        _say("restart", i, "loglik", f"{ll:.6f}")
    for i, ll in enumerate(fit.loglik_trace):
        _say("iter", i, "loglik", f"{ll:.6f}")
    _say("selected", f"states={cfg.n_states}",
         f"l2_transition={cfg.l2_transition}",
         f"elastic_net_alpha={cfg.elastic_net_alpha}",
         f"l1_ratio={cfg.l1_ratio}", f"restarts={cfg.n_permutations}",
         f"seed={cfg.seed}")

    provenance = {"command": "fit", "config": asdict(cfg), "data": data_stamps,
                  "loglik": fit.loglik, "iterations": fit.n_iter,
                  "converged": fit.converged,
                  "restart_logliks": [float(v) for v in fit.restart_logliks]}
    if cv_doc is not None:
        provenance["cross_validation"] = cv_doc
    save_iohmm(fit.model, args.out, provenance=provenance)
    _say("model", args.out, "loglik", f"{fit.loglik:.6f}",
         "iterations", fit.n_iter, "converged", fit.converged)
    return 0


# --- solve ------------------------------------------------------------------

def cmd_solve(args) -> int:
    model = load_iohmm(args.model)
    targets = tuple(sorted(_parse_ints(args.targets)))
    ordering = order_states(model)
    spec = build_pomdp(OrderedModel(model=model, ordering=ordering),
                       targets=targets, w_sot=args.w_sot, w_g=args.w_g,
                       gamma=args.gamma)
    res = soft_value_iteration(spec, alpha=args.alpha, tol=args.tol)
    _say("solved", "iterations", res.iterations,
         "residual", f"{res.residual:.3e}")

    bundle = PolicyBundle(q=res.qfunction.q, alpha=args.alpha,
                          gamma=args.gamma, n_skill=model.n_states,
                          targets=targets, ordering=ordering)
    provenance = {"command": "solve", "model": _source_stamp(args.model),
                  "config": {"alpha": args.alpha, "gamma": args.gamma,
                             "w_sot": args.w_sot, "w_g": args.w_g,
                             "tol": args.tol, "targets": list(targets)},
                  "iterations": res.iterations, "residual": res.residual}
    save_policy(bundle, args.out, provenance=provenance)
    _say("policy", args.out, "states", bundle.q.shape[0],
         "actions", bundle.q.shape[1])
    return 0


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    model = load_iohmm(args.model)
    kinds = [tok.strip() for tok in args.arms.split(",") if tok.strip()]
    if not kinds:
        raise ValueError("no policy arms given")
    cfg = ExperimentConfig(learner_model=model, policy_kind=kinds[0],
                           blocks=args.blocks,
                           trials_per_block=args.trials_per_block,
                           targets=tuple(sorted(_parse_ints(args.targets))),
                           seed=args.seed, alpha=args.alpha, gamma=args.gamma,
                           w_sot=args.w_sot, w_g=args.w_g)
    thresholds = tuple(args.threshold or (0.5,))
    summaries = compare_policies(cfg, kinds, n_episodes=args.episodes,
                                 thresholds=thresholds,
                                 threshold_window=args.window,
                                 mastery_threshold=args.mastery_threshold,
                                 mastery_window=args.window)

    out_dir = Path(args.out_dir)
    rollout_dir = out_dir / "rollouts"
    rollout_dir.mkdir(parents=True, exist_ok=True)
    for kind in kinds:
        summary = summaries[kind]
        for ep, roll in enumerate(summary.episodes):
            session = f"{kind}-ep{ep}"
            write_records(rollout_dir / f"{session}.jsonl",
                          rollout_to_records(roll, session=session))
        _say("arm", kind, "episodes", summary.n_episodes,
             "mean_cumulative_cost", f"{summary.mean_cumulative_cost:.6f}")
    for path in write_simulation_reports(summaries, out_dir):
        _say("report", path)
    _say("rollouts", rollout_dir)
    return 0


# --- analyze ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    _, skipped = read_records(args.log)
    _warn_skipped(args.log, skipped)
    result = analyze_log(args.log, args.out_dir, model_path=args.model,
                         window=args.window,
                         thresholds=tuple(args.threshold or (0.5,)),
                         mastery_threshold=args.mastery_threshold)
    _say("records", result.n_records)
    _say("skipped", result.n_skipped)
    for path in result.tables:
        _say("table", path)
    for path in result.figures:
        _say("figure", path)
    return 0


# --- serve ------------------------------------------------------------------

def cmd_serve(args) -> int:
    from .service import create_app, load_artifacts, load_settings

    overrides = {name: getattr(args, attr)
                 for name, attr in (("map_path", "map"),
                                    ("model_path", "model"),
                                    ("policy_path", "policy"),
                                    ("log_dir", "log_dir"),
                                    ("state_dir", "state_dir"),
                                    ("policy_kind", "policy_kind"),
                                    ("blocks", "blocks"),
                                    ("trials_per_block", "trials_per_block"),
                                    ("seed", "seed"),
                                    ("host", "host"),
                                    ("port", "port"))
                 if getattr(args, attr) is not None}
    settings = load_settings(config_path=args.config, overrides=overrides)
    load_artifacts(settings)
    if args.check:
        _say("serve-ready", "host", settings.host, "port", settings.port,
             "policy", settings.policy_kind, "seed", settings.seed,
             "n_trials", settings.n_trials)
        return 0
    import uvicorn

    _say("serving", "host", settings.host, "port", settings.port,
         "policy", settings.policy_kind)
    uvicorn.run(create_app(settings), host=settings.host, port=settings.port)
    return 0


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hapticnudge",
        description="Skill-aware haptic nudging for body-machine interfaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate",
                       help="build a posture-to-cursor map from a pose table")
    p.add_argument("--poses", required=True,
                   help="delimited table, one 20-joint pose per row")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fit", help="fit a learner model from trial logs")
    p.add_argument("--log", action="append", required=True,
                   help="trial log (repeatable); sessions become sequences")
    p.add_argument("--states", required=True,
                   help="state count, or a comma list to cross-validate")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--elastic-net", type=float, default=1e-4)
    p.add_argument("--l1-ratio", type=float, default=0.725)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("solve", help="solve a learner model into a nudge policy")
    p.add_argument("--model", required=True)
    p.add_argument("--targets", default="1,2,3,4")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--w-sot", type=float, default=DEFAULT_W_SOT)
    p.add_argument("--w-g", type=float, default=DEFAULT_W_G)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="benchmark policy arms on a model")
    p.add_argument("--model", required=True,
                   help="learner model; also the planner's model")
    p.add_argument("--arms", default=",".join(POLICY_KINDS),
                   help="comma list of policy kinds")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--blocks", type=int, default=8)
    p.add_argument("--trials-per-block", type=int, default=60)
    p.add_argument("--targets", default="1,2,3,4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--w-sot", type=float, default=DEFAULT_W_SOT)
    p.add_argument("--w-g", type=float, default=DEFAULT_W_G)
    p.add_argument("--threshold", type=float, action="append",
                   help="reaching-error learning threshold (repeatable)")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--mastery-threshold", type=float, default=3.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="turn a trial log into tables and figures")
    p.add_argument("--log", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model", default=None,
                   help="optional learner model for transition reports")
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--threshold", type=float, action="append")
    p.add_argument("--mastery-threshold", type=float, default=3.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--config", default=None, help="JSON settings file")
    p.add_argument("--map", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--policy", default=None)
    p.add_argument("--log-dir", default=None)
    p.add_argument("--state-dir", default=None)
    p.add_argument("--policy-kind", default=None, choices=POLICY_KINDS)
    p.add_argument("--blocks", type=int, default=None)
    p.add_argument("--trials-per-block", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--check", action="store_true",
                   help="resolve settings and artifacts, then exit")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
