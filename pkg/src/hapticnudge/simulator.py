"""Episode simulation and policy benchmarking.

Runs the 8-block target-capture protocol against a generative learner model,
with the nudge chosen per trial by one of four arms: control (never nudge),
random (uniform finger), heuristic (alias of random here, since simulated
learners have no hand posture for the pose-distance rule), or qmdp (belief
planner). A skill belief is tracked in every arm so expected-latent-state
trajectories are comparable across arms; only the qmdp arm acts on it.
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import bomi
from .iohmm import IohmmModel, encode_input, order_states, sample_step
from .metrics import trailing_mean_first_hit, trials_to_threshold
from .policy import (
    DEFAULT_ALPHA,
    DEFAULT_GAMMA,
    DEFAULT_W_G,
    DEFAULT_W_SOT,
    DegenerateObservationError,
    OrderedModel,
    PomdpSpec,
    QFunction,
    belief_predict,
    belief_update,
    build_pomdp,
    initial_belief,
    select_nudge,
    soft_value_iteration,
)

# pseudo-id for the pre-trial-1 start position (the workspace center)
CENTER_TARGET = 0

POLICY_KINDS = ("control", "random", "heuristic", "qmdp")

# RNG stream ids under SeedSequence(seed, spawn_key=(episode, stream))
_STREAM_TARGETS = 0
_STREAM_LEARNER = 1
_STREAM_POLICY = 2


@dataclass(frozen=True)
class ExperimentConfig:
    """One arm's protocol settings: 8 blocks of 60 trials by default."""

    learner_model: IohmmModel
    planner_model: IohmmModel | None = None
    policy_kind: str = "control"
    blocks: int = 8
    trials_per_block: int = 60
    targets: tuple = (1, 2, 3, 4)
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    gamma: float = DEFAULT_GAMMA
    w_sot: float = DEFAULT_W_SOT
    w_g: float = DEFAULT_W_G
    vi_tol: float = 1e-8
    belief_order: str = "correct-then-predict"

    def __post_init__(self):
        if self.policy_kind not in POLICY_KINDS:
            raise ValueError(
                f"policy_kind must be one of {POLICY_KINDS}, got {self.policy_kind!r}")
        if self.blocks < 1 or self.trials_per_block < 1:
            raise ValueError("blocks and trials_per_block must be positive")
        if len(self.targets) < 2:
            raise ValueError("need at least 2 targets")
        if not (0 < self.gamma < 1):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def n_trials(self) -> int:
        return self.blocks * self.trials_per_block


@dataclass(frozen=True)
class PolicyRuntime:
    """Solved planner shared across the episodes of one arm."""

    planner: OrderedModel
    spec: PomdpSpec
    qfunction: QFunction
    learner_rank: np.ndarray     # original learner label -> skill rank


def prepare_runtime(cfg: ExperimentConfig) -> PolicyRuntime:
    planner_model = cfg.planner_model if cfg.planner_model is not None \
        else cfg.learner_model
    planner = OrderedModel.from_model(planner_model)
    spec = build_pomdp(planner, targets=sorted(cfg.targets),
                       w_sot=cfg.w_sot, w_g=cfg.w_g, gamma=cfg.gamma)
    qf = soft_value_iteration(spec, alpha=cfg.alpha, tol=cfg.vi_tol).qfunction
    ordering = order_states(cfg.learner_model)
    rank = np.empty(cfg.learner_model.n_states, dtype=int)
    rank[ordering] = np.arange(ordering.shape[0])
    return PolicyRuntime(planner=planner, spec=spec, qfunction=qf,
                         learner_rank=rank)


def sample_target_sequence(targets, n_trials: int, rng) -> np.ndarray:
    """Uniform target ids with the previous trial's target excluded."""
    ids = list(targets)
    if len(ids) < 2:
        raise ValueError("need at least 2 targets")
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    seq = np.empty(n_trials, dtype=int)
    idx = int(rng.integers(len(ids)))
    seq[0] = ids[idx]
    for k in range(1, n_trials):
        j = int(rng.integers(len(ids) - 1))
        if j >= idx:
            j += 1
        seq[k] = ids[j]
        idx = j
    return seq


@dataclass
class RolloutResult:
    """Per-trial records of one simulated episode (arrays indexed by trial)."""

    policy_kind: str
    seed: int
    episode: int
    prev_targets: np.ndarray     # CENTER_TARGET for trial 1
    cur_targets: np.ndarray
    slopes: np.ndarray
    nudges: np.ndarray
    states: np.ndarray           # true learner skill rank
    observations: np.ndarray     # (n, 2) sampled (RE, SoT), clipped at 0
    costs: np.ndarray            # model-mean immediate cost per trial
    beliefs: np.ndarray          # (n, N) pre-trial skill belief
    expected_states: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return self.cur_targets.shape[0]

    @property
    def re(self) -> np.ndarray:
        return self.observations[:, 0]

    @property
    def sot(self) -> np.ndarray:
        return self.observations[:, 1]

    @property
    def cumulative_cost(self) -> float:
        return float(self.costs.sum())


def _episode_rng(seed: int, episode: int, stream: int):
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(episode, stream)))


def movement_slope(prev_target: int, cur_target: int) -> float:
    p = np.asarray(bomi.WINDOW_CENTER) if prev_target == CENTER_TARGET \
        else bomi.target_position(prev_target)
    try:
        return bomi.slope_from_positions(p, bomi.target_position(cur_target))
    except bomi.InvalidPairError:
        # only trial 1 toward the target that sits on the workspace center;
        # the nominal movement has zero length, so the direction is moot
        return 0.0


def run_episode(cfg: ExperimentConfig, episode: int = 0,
                runtime: PolicyRuntime | None = None) -> RolloutResult:
    """Simulate one full episode of the protocol under one policy arm.

    Streams: targets / learner / policy draws come from separate RNG streams
    of (seed, episode), so arms sharing a seed see identical target
    sequences. The first trial starts from the workspace center; the planner
    state space conditions on a previous target, so the qmdp arm issues no
    nudge on trial 1. The belief is advanced with the raw observation draw;
    the logged observation is clipped at 0 (the metrics are nonnegative).
    """
    if runtime is None:
        runtime = prepare_runtime(cfg)
    learner = cfg.learner_model
    planner = runtime.planner
    n = cfg.n_trials
    N = planner.n_states

    rng_t = _episode_rng(cfg.seed, episode, _STREAM_TARGETS)
    rng_l = _episode_rng(cfg.seed, episode, _STREAM_LEARNER)
    rng_p = _episode_rng(cfg.seed, episode, _STREAM_POLICY)

    targets_seq = sample_target_sequence(cfg.targets, n, rng_t)

    res = RolloutResult(
        policy_kind=cfg.policy_kind, seed=cfg.seed, episode=episode,
        prev_targets=np.empty(n, dtype=int),
        cur_targets=targets_seq.copy(),
        slopes=np.empty(n), nudges=np.empty(n, dtype=int),
        states=np.empty(n, dtype=int), observations=np.empty((n, 2)),
        costs=np.empty(n), beliefs=np.empty((n, N)),
        expected_states=np.empty(n))

    # both the learner's first state and the initial belief condition on the
    # first input encoded with nudge "none" (no action chosen yet)
    first_slope = movement_slope(CENTER_TARGET, int(targets_seq[0]))
    x0 = encode_input(first_slope, 0)
    state = int(rng_l.choice(learner.n_states, p=learner.initial_probs(x0)))
    belief = initial_belief(planner, x0, CENTER_TARGET, int(targets_seq[0]))

    ranks = np.arange(N, dtype=float)
    for k in range(n):
        prev = CENTER_TARGET if k == 0 else int(targets_seq[k - 1])
        cur = int(targets_seq[k])
        slope = first_slope if k == 0 else movement_slope(prev, cur)

        if cfg.policy_kind == "control":
            nudge = 0
        elif cfg.policy_kind in ("random", "heuristic"):
            nudge = int(rng_p.integers(1, 6))
        else:  # qmdp; trial 1 has no previous target to condition on
            nudge = 0 if k == 0 else \
                select_nudge(belief, runtime.qfunction, runtime.spec, rng_p)[0]

        x = encode_input(slope, nudge)
        mu = learner.emission_mean(state, x)

        res.prev_targets[k] = prev
        res.slopes[k] = slope
        res.nudges[k] = nudge
        res.states[k] = runtime.learner_rank[state]
        res.costs[k] = mu[0] + cfg.w_sot * mu[1]
        res.beliefs[k] = belief.skill
        res.expected_states[k] = float(belief.skill @ ranks)

        next_state, obs = sample_step(learner, state, x, rng_l)
        res.observations[k] = np.maximum(obs, 0.0)

        if k + 1 < n:
            nxt = (cur, int(targets_seq[k + 1]))
            try:
                belief = belief_update(planner, belief, x, obs, nxt,
                                       order=cfg.belief_order)
            except DegenerateObservationError as err:
                res.warnings.append((k + 1, str(err)))
                belief = belief_predict(planner, belief, x, nxt)
        state = next_state

    return res


def mastery_trial(expected_state_series, threshold: float = 3.0,
                  window: int = 10):
    """1-based trial where the trailing mean expected state first drops
    strictly below the mastery threshold; None when never reached."""
    return trailing_mean_first_hit(expected_state_series, threshold, window,
                                   strict=True)


@dataclass
class ArmSummary:
    """Aggregates of one policy arm over its episodes."""

    kind: str
    n_episodes: int
    re_mean: np.ndarray
    re_halfwidth: np.ndarray
    sot_mean: np.ndarray
    sot_halfwidth: np.ndarray
    expected_state_mean: np.ndarray
    cumulative_costs: np.ndarray          # per episode
    mean_cumulative_cost: float
    trials_to_threshold: dict             # threshold -> per-episode trials (nan = never)
    mastery_trials: np.ndarray            # per episode (nan = never)
    episodes: list


def _mean_ci(rows: np.ndarray):
    mean = rows.mean(axis=0)
    if rows.shape[0] < 2:
        return mean, np.zeros_like(mean)
    half = 1.96 * rows.std(axis=0, ddof=1) / np.sqrt(rows.shape[0])
    return mean, half


def summarize_arm(kind: str, episodes, thresholds=(0.5,),
                  threshold_window: int = 10, mastery_threshold: float = 3.0,
                  mastery_window: int = 10) -> ArmSummary:
    re_rows = np.stack([e.re for e in episodes])
    sot_rows = np.stack([e.sot for e in episodes])
    exp_rows = np.stack([e.expected_states for e in episodes])
    re_mean, re_half = _mean_ci(re_rows)
    sot_mean, sot_half = _mean_ci(sot_rows)
    costs = np.array([e.cumulative_cost for e in episodes])

    def as_float(v):
        return np.nan if v is None else float(v)

    ttt = {float(th): np.array([as_float(trials_to_threshold(e.re, th,
                                                             threshold_window))
                                for e in episodes])
           for th in thresholds}
    mastery = np.array([as_float(mastery_trial(e.expected_states,
                                               mastery_threshold,
                                               mastery_window))
                        for e in episodes])
    return ArmSummary(kind=kind, n_episodes=len(episodes),
                      re_mean=re_mean, re_halfwidth=re_half,
                      sot_mean=sot_mean, sot_halfwidth=sot_half,
                      expected_state_mean=exp_rows.mean(axis=0),
                      cumulative_costs=costs,
                      mean_cumulative_cost=float(costs.mean()),
                      trials_to_threshold=ttt, mastery_trials=mastery,
                      episodes=list(episodes))


def compare_policies(cfg: ExperimentConfig, kinds, n_episodes: int,
                     thresholds=(0.5,), threshold_window: int = 10,
                     mastery_threshold: float = 3.0,
                     mastery_window: int = 10) -> dict:
    """Benchmark policy arms over shared-seed episodes.

    Arms reuse the base config with only the policy kind swapped, so
    episode i sees the same target sequence in every arm.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be positive")
    out = {}
    for kind in kinds:
        arm_cfg = dataclasses.replace(cfg, policy_kind=kind)
        runtime = prepare_runtime(arm_cfg)
        episodes = [run_episode(arm_cfg, episode=e, runtime=runtime)
                    for e in range(n_episodes)]
        out[kind] = summarize_arm(kind, episodes, thresholds=thresholds,
                                  threshold_window=threshold_window,
                                  mastery_threshold=mastery_threshold,
                                  mastery_window=mastery_window)
    return out


@dataclass(frozen=True)
class TuneRow:
    alpha: float
    gamma: float
    mean_cost: float


@dataclass(frozen=True)
class TuneResult:
    alpha: float
    gamma: float
    mean_cost: float
    table: tuple


DEFAULT_TUNE_ALPHAS = (0.05, 0.1, 0.2, 0.5, 1.0)
DEFAULT_TUNE_GAMMAS = (0.9, 0.95, 0.98, 0.99)


def tune_policy(cfg: ExperimentConfig, alphas=DEFAULT_TUNE_ALPHAS,
                gammas=DEFAULT_TUNE_GAMMAS, n_episodes: int = 5) -> TuneResult:
    """Grid-search the planner temperature and discount by mean episode cost."""
    rows = []
    for alpha in alphas:
        for gamma in gammas:
            arm_cfg = dataclasses.replace(cfg, policy_kind="qmdp",
                                          alpha=float(alpha), gamma=float(gamma))
            runtime = prepare_runtime(arm_cfg)
            costs = [run_episode(arm_cfg, episode=e, runtime=runtime).cumulative_cost
                     for e in range(n_episodes)]
            rows.append(TuneRow(alpha=float(alpha), gamma=float(gamma),
                                mean_cost=float(np.mean(costs))))
    best = min(rows, key=lambda r: (r.mean_cost, r.alpha, r.gamma))
    return TuneResult(alpha=best.alpha, gamma=best.gamma,
                      mean_cost=best.mean_cost, table=tuple(rows))


def ladder_learner(n_states: int = 3, *, helpful_nudge: int = 3,
                   help_gain: float = 3.5, stay_logit: float = 0.0,
                   improve_logit: float = -2.4, regress_logit: float = -3.5,
                   re_range=(0.2, 2.0), sot_range=(0.1, 1.0),
                   noise_sd: float = 0.05) -> IohmmModel:
    """Synthetic benchmark learner: skill states form a ladder from best (0)
    to worst, costs rise along it, and one specific finger nudge sharply
    raises the chance of climbing one rung. Starts at the worst state.
    Emissions ignore the movement slope, so the ladder order is also the
    cost order."""
    if not 1 <= helpful_nudge <= 5:
        raise ValueError("helpful_nudge must be a finger index 1..5")
    if n_states < 2:
        raise ValueError("need at least 2 ladder states")
    N, d = n_states, 7
    OFF = -30.0

    logits = np.full((N, N, 6), OFF)
    for i in range(N):
        logits[i, i, :] = stay_logit
        if i > 0:
            logits[i, i - 1, :] = improve_logit
            logits[i, i - 1, helpful_nudge] += help_gain
        if i + 1 < N:
            logits[i, i + 1, :] = regress_logit
    # ref-zero per (source, action): subtract the last destination's logit
    logits -= logits[:, -1:, :]

    trans_w = np.zeros((N, N, d))
    trans_w[:, :, 1:] = logits
    init_b = np.full(N, -8.0)
    init_b[-1] = 0.0

    model = IohmmModel(
        n_states=N,
        init_w=np.zeros((N, d)),
        init_b=init_b,
        trans_w=trans_w,
        trans_b=np.zeros((N, N)),
        emit_V=np.zeros((N, 2, d)),
        emit_c=np.column_stack([np.linspace(*re_range, N),
                                np.linspace(*sot_range, N)]),
        emit_cov=np.stack([np.eye(2) * noise_sd**2] * N),
    )
    model.validate()
    return model
