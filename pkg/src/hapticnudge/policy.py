"""Nudge planning on top of a fitted learner model.

The planner treats the task as a POMDP whose state couples the learner's
skill rank with the target pair that defines the current movement:
(skill rank, previous target, current target). Actions are the 6 nudge
levels (none or finger 1..5). Skill evolves by the model's input-driven
transitions; the target component advances uniformly over the non-current
targets. Rewards penalize the expected immediate trial cost
(mu_RE + w_sot * mu_SoT) plus a generalization cost that charges the next
skill state for its expected cost across every movement direction and
nudge. Planning uses soft (entropy-regularized) value iteration; acting
uses QMDP with a softmax over belief-averaged action values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import bomi
from .iohmm import IohmmModel, N_NUDGE_LEVELS, encode_input, order_states

N_ACTIONS = N_NUDGE_LEVELS
N_FINGERS = 5

DEFAULT_W_SOT = 2.0
DEFAULT_W_G = 1.0
DEFAULT_GAMMA = 0.98
DEFAULT_ALPHA = 0.2

# total observation likelihood below this is treated as degenerate
DEGENERATE_LIKELIHOOD = 1e-300
LOG_DEGENERATE = np.log(DEGENERATE_LIKELIHOOD)


class ConvergenceError(RuntimeError):
    """Raised when value iteration fails to reach tolerance."""


class DegenerateObservationError(RuntimeError):
    """Raised when an observation carries no usable likelihood mass."""


@dataclass(frozen=True)
class OrderedModel:
    """A learner model viewed through its skill ordering (rank 0 = best)."""

    model: IohmmModel
    ordering: np.ndarray   # rank -> original state index

    def __post_init__(self):
        ordering = np.asarray(self.ordering, dtype=int)
        if sorted(ordering.tolist()) != list(range(self.model.n_states)):
            raise ValueError(f"ordering {ordering} is not a permutation")
        object.__setattr__(self, "ordering", ordering)

    @classmethod
    def from_model(cls, model: IohmmModel, input_grid=None) -> "OrderedModel":
        return cls(model=model, ordering=order_states(model, input_grid))

    @property
    def n_states(self) -> int:
        return self.model.n_states

    def initial_probs(self, x) -> np.ndarray:
        return self.model.initial_probs(x)[self.ordering]

    def transition_matrix(self, x) -> np.ndarray:
        A = self.model.transition_matrix(x)
        return A[np.ix_(self.ordering, self.ordering)]

    def emission_mean(self, rank: int, x) -> np.ndarray:
        return self.model.emission_mean(int(self.ordering[rank]), x)

    def emission_logliks(self, x, o) -> np.ndarray:
        """Log density of one observation under each rank's emission model."""
        x = np.asarray(x, dtype=float)
        o = np.asarray(o, dtype=float)
        return self.model.log_emission_matrix(x[None], o[None])[0][self.ordering]


@dataclass(frozen=True)
class PomdpState:
    skill: int
    prev_target: int
    cur_target: int


def enumerate_pomdp_states(n_skill: int, targets) -> list[PomdpState]:
    """Canonical planner state order: skill-major, then target pairs."""
    targets = list(targets)
    if len(targets) < 2:
        raise ValueError("need at least 2 targets")
    return [PomdpState(h, tp, tc)
            for h in range(n_skill)
            for tp in targets
            for tc in targets if tc != tp]


@dataclass
class PomdpSpec:
    states: list
    state_index: dict
    transition: np.ndarray   # (S, A, S)
    reward: np.ndarray       # (S, A)
    gamma: float
    n_skill: int
    targets: list

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]


def build_pomdp(model: IohmmModel, ordering=None, *,
                targets=None,
                w_sot: float = DEFAULT_W_SOT,
                w_g: float = DEFAULT_W_G,
                gamma: float = DEFAULT_GAMMA) -> PomdpSpec:
    """Assemble the planning POMDP from a learner model.

    Immediate cost of acting a on movement slope u at skill rank h is
    mu_RE + w_sot * mu_SoT from the rank's emission mean. The
    generalization cost of landing in rank h' sums that immediate cost over
    all ordered target pairs and all actions. Reward is the negated sum of
    immediate cost and w_g times the transition-expected generalization
    cost. Target dynamics are uniform over the non-current targets.
    """
    om = model if isinstance(model, OrderedModel) else \
        OrderedModel(model, order_states(model) if ordering is None else ordering)
    if targets is None:
        targets = sorted(bomi.TARGET_POSITIONS)
    targets = list(targets)
    N = om.n_states
    states = enumerate_pomdp_states(N, targets)
    state_index = {(s.skill, s.prev_target, s.cur_target): k
                   for k, s in enumerate(states)}
    S = len(states)

    pairs = [(tp, tc) for tp in targets for tc in targets if tc != tp]
    slopes = {pair: bomi.slope_angle(*pair) for pair in pairs}

    # immediate cost and skill transitions per (pair, action)
    imm = np.empty((len(pairs), N_ACTIONS, N))          # C_imm[pair, a, h]
    stm = np.empty((len(pairs), N_ACTIONS, N, N))       # A[pair, a, h, h']
    for p, pair in enumerate(pairs):
        for a in range(N_ACTIONS):
            x = encode_input(slopes[pair], a)
            stm[p, a] = om.transition_matrix(x)
            for h in range(N):
                mu = om.emission_mean(h, x)
                imm[p, a, h] = mu[0] + w_sot * mu[1]

    # generalization cost of a skill rank: total immediate cost over all
    # ordered pairs and all actions
    gen = imm.sum(axis=(0, 1))                          # (N,)

    transition = np.zeros((S, N_ACTIONS, S))
    reward = np.empty((S, N_ACTIONS))
    next_frac = 1.0 / (len(targets) - 1)
    pair_of = {pair: p for p, pair in enumerate(pairs)}
    for k, s in enumerate(states):
        p = pair_of[(s.prev_target, s.cur_target)]
        nexts = [t for t in targets if t != s.cur_target]
        for a in range(N_ACTIONS):
            row = stm[p, a, s.skill]                    # (N,) over h'
            reward[k, a] = -(imm[p, a, s.skill] + w_g * float(row @ gen))
            for h2 in range(N):
                for t2 in nexts:
                    transition[k, a, state_index[(h2, s.cur_target, t2)]] = \
                        row[h2] * next_frac
    return PomdpSpec(states=states, state_index=state_index,
                     transition=transition, reward=reward, gamma=gamma,
                     n_skill=N, targets=targets)


@dataclass(frozen=True)
class QFunction:
    q: np.ndarray        # (S, A)
    alpha: float

    def values(self) -> np.ndarray:
        """Soft state values V = alpha * logsumexp(Q / alpha)."""
        return self.alpha * logsumexp(self.q / self.alpha, axis=1)


@dataclass(frozen=True)
class SviResult:
    qfunction: QFunction
    iterations: int
    residual: float
    residual_trace: np.ndarray


def soft_value_iteration(spec: PomdpSpec, alpha: float = DEFAULT_ALPHA,
                         tol: float = 1e-8, max_iter: int = 100000) -> SviResult:
    """Entropy-regularized value iteration to sup-norm tolerance.

    Bellman backup: Q = R + gamma * T V, V = alpha * logsumexp(Q / alpha).
    Converges geometrically at rate gamma; raises ConvergenceError if the
    iteration cap is hit first.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    V = np.zeros(spec.n_states)
    trace = []
    for it in range(1, max_iter + 1):
        Q = spec.reward + spec.gamma * np.einsum("san,n->sa", spec.transition, V)
        V_new = alpha * logsumexp(Q / alpha, axis=1)
        residual = float(np.max(np.abs(V_new - V)))
        trace.append(residual)
        V = V_new
        if residual < tol:
            Q = spec.reward + spec.gamma * np.einsum("san,n->sa", spec.transition, V)
            return SviResult(qfunction=QFunction(q=Q, alpha=alpha),
                             iterations=it, residual=residual,
                             residual_trace=np.array(trace))
    raise ConvergenceError(
        f"residual {trace[-1]:.3e} above {tol:.1e} after {max_iter} sweeps")


def softmax_action_probs(q_row, alpha: float) -> np.ndarray:
    z = np.asarray(q_row, dtype=float) / alpha
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def qmdp_act(q: QFunction, state: int, rng, alpha: float | None = None):
    """Sample an action at a known planner state: softmax over its Q row."""
    alpha = q.alpha if alpha is None else alpha
    probs = softmax_action_probs(q.q[state], alpha)
    action = int(rng.choice(probs.shape[0], p=probs))
    return action, probs


@dataclass(frozen=True)
class BeliefState:
    """Belief over skill ranks, attached to the trial's target pair."""

    skill: np.ndarray
    prev_target: int
    cur_target: int

    def __post_init__(self):
        b = np.asarray(self.skill, dtype=float)
        if b.ndim != 1 or b.shape[0] < 1:
            raise ValueError("skill belief must be a 1-D distribution")
        if np.any(b < -1e-12) or not np.isfinite(b).all():
            raise ValueError("skill belief has negative or non-finite mass")
        if abs(float(b.sum()) - 1.0) > 1e-9:
            raise ValueError(f"skill belief sums to {b.sum():.12f}, not 1")
        object.__setattr__(self, "skill", np.clip(b, 0.0, None))


def initial_belief(om: OrderedModel, x, prev_target: int, cur_target: int) -> BeliefState:
    """Belief before the first trial, from the initial-state model.

    The first trial's input is encoded with nudge level 0 (none), since no
    action has been chosen when the belief is formed.
    """
    return BeliefState(skill=om.initial_probs(x), prev_target=prev_target,
                       cur_target=cur_target)


def belief_update(om: OrderedModel, belief: BeliefState, x, o, next_targets,
                  order: str = "correct-then-predict") -> BeliefState:
    """Advance the skill belief through one completed trial.

    correct-then-predict (default): condition the current belief on the
    trial's observation, then push through the input's transition matrix.
    predict-then-correct: push first, condition after.

    next_targets is the (prev, cur) pair the returned belief applies to.
    Raises DegenerateObservationError when the observation's total
    likelihood under the belief vanishes; callers may fall back to
    belief_predict.
    """
    x = np.asarray(x, dtype=float)
    logliks = om.emission_logliks(x, o)
    A = om.transition_matrix(x)
    b = belief.skill

    with np.errstate(divide="ignore"):
        logb = np.log(b)
    if order == "correct-then-predict":
        logw = logb + logliks
        total = float(logsumexp(logw))
        if total < LOG_DEGENERATE:
            raise DegenerateObservationError(
                f"total observation likelihood {np.exp(total):.3e} is degenerate")
        corrected = np.exp(logw - total)
        new_skill = A.T @ corrected
    elif order == "predict-then-correct":
        predicted = A.T @ b
        with np.errstate(divide="ignore"):
            logw = np.log(predicted) + logliks
        total = float(logsumexp(logw))
        if total < LOG_DEGENERATE:
            raise DegenerateObservationError(
                f"total observation likelihood {np.exp(total):.3e} is degenerate")
        new_skill = np.exp(logw - total)
    else:
        raise ValueError(f"unknown update order {order!r}")
    new_skill = np.clip(new_skill, 0.0, None)
    new_skill /= new_skill.sum()
    return BeliefState(skill=new_skill, prev_target=next_targets[0],
                       cur_target=next_targets[1])


def belief_predict(om: OrderedModel, belief: BeliefState, x,
                   next_targets) -> BeliefState:
    """Prediction-only belief advance (fallback for degenerate observations)."""
    new_skill = om.transition_matrix(x).T @ belief.skill
    new_skill = np.clip(new_skill, 0.0, None)
    new_skill /= new_skill.sum()
    return BeliefState(skill=new_skill, prev_target=next_targets[0],
                       cur_target=next_targets[1])


@dataclass(frozen=True)
class StateLookup:
    """Minimal planner view for action selection: the state enumeration only.

    Lets persisted Q tables drive select_nudge without rebuilding the
    transition and reward tensors.
    """

    state_index: dict


def belief_action_values(belief: BeliefState, q: QFunction,
                         spec) -> np.ndarray:
    """QMDP action values: Q rows of the belief's target pair, belief-averaged."""
    qb = np.zeros(q.q.shape[1])
    for h, mass in enumerate(belief.skill):
        s = spec.state_index[(h, belief.prev_target, belief.cur_target)]
        qb += mass * q.q[s]
    return qb


def select_nudge(belief: BeliefState, q: QFunction, spec, rng,
                 alpha: float | None = None):
    """Choose a nudge level from the belief: softmax over QMDP action values.

    Returns (action, action_probs); action 0 means no nudge.
    """
    alpha = q.alpha if alpha is None else alpha
    qb = belief_action_values(belief, q, spec)
    probs = softmax_action_probs(qb, alpha)
    action = int(rng.choice(probs.shape[0], p=probs))
    return action, probs


def expected_latent_state(belief) -> float:
    """Belief-weighted mean skill rank: sum_i i * b(i)."""
    b = belief.skill if isinstance(belief, BeliefState) else np.asarray(belief, float)
    return float(np.arange(b.shape[0]) @ b)


@dataclass(frozen=True)
class HeuristicConfig:
    tau: float = 1.0          # softmax temperature over inverse distances
    epsilon: float = 1e-9     # floor for per-finger squared distances

    def __post_init__(self):
        if self.tau <= 0 or self.epsilon <= 0:
            raise ValueError("tau and epsilon must be positive")


def heuristic_nudge(onset_pose, optimal_pose, cfg: HeuristicConfig, rng):
    """Finger choice by posture deviation from the target's optimal posture.

    Per finger i, d_i is the squared joint-angle distance between the onset
    and optimal postures over that finger's 4 joints, floored at
    cfg.epsilon. Fingers are sampled with probability proportional to
    exp(d_i^-1 / tau), which concentrates on the finger already nearest its
    optimal angles. Returns (finger in 1..5, probs (5,)); never returns 0.
    """
    onset = bomi.as_pose(onset_pose).reshape(N_FINGERS, bomi.JOINTS_PER_FINGER)
    opt = bomi.as_pose(optimal_pose).reshape(N_FINGERS, bomi.JOINTS_PER_FINGER)
    d = np.maximum(((onset - opt) ** 2).sum(axis=1), cfg.epsilon)
    scores = (1.0 / d) / cfg.tau
    scores -= scores.max()
    probs = np.exp(scores)
    probs /= probs.sum()
    finger = int(rng.choice(N_FINGERS, p=probs)) + 1
    return finger, probs
