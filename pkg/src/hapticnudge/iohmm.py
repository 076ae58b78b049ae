"""Input-output hidden Markov learner models.

A learner occupies one of N latent skill states per trial. The trial input
x = [movement slope, one-hot nudge (6 levels: none or finger 1..5)] drives
both the state transitions (multinomial-logit links) and the linear-Gaussian
emission of the trial's observed performance o = [reaching error, smoothness].

Training is generalized EM on multiple trial sequences: scaled
forward-backward E-step, then per-block M-steps (initial-state logit,
per-source-state transition logits, per-state elastic-net emission
regressions plus covariance). Each block is guarded accept-if-improved, so
the penalized objective (log-likelihood minus L2/elastic-net penalties) is
nondecreasing across iterations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from . import bomi
from .regression import (
    elastic_net_objective,
    fit_elastic_net,
    fit_softmax_regression,
    kmeans,
    softmax_objective,
)

log = logging.getLogger(__name__)

OBS_DIM = 2          # [reaching error, smoothness]
N_NUDGE_LEVELS = 6   # none + fingers 1..5
INPUT_DIM = 1 + N_NUDGE_LEVELS

COV_EIGEN_FLOOR = 1e-8
# weight mass below which an M-step block keeps its previous parameters
DEAD_BLOCK_MASS = 1e-10
MONOTONICITY_SLACK = 1e-6


class ModelInvalidError(ValueError):
    """Raised when model parameters are structurally unusable."""


class NumericalFailureError(RuntimeError):
    """Raised when the forward pass underflows despite scaling."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class MonotonicityError(RuntimeError):
    """Raised when the penalized training objective decreases beyond slack."""


def encode_input(slope: float, nudge: int) -> np.ndarray:
    """Encode one trial input: [slope, one-hot over the 6 nudge levels]."""
    if not np.isfinite(slope):
        raise ValueError(f"slope must be finite, got {slope}")
    if not (isinstance(nudge, (int, np.integer)) and 0 <= nudge < N_NUDGE_LEVELS):
        raise ValueError(f"nudge must be an integer in 0..{N_NUDGE_LEVELS - 1}, got {nudge}")
    x = np.zeros(INPUT_DIM)
    x[0] = float(slope)
    x[1 + int(nudge)] = 1.0
    return x


def encode_inputs(slopes, nudges) -> np.ndarray:
    slopes = np.asarray(slopes, dtype=float)
    nudges = np.asarray(nudges)
    if slopes.shape != nudges.shape:
        raise ValueError("slopes and nudges must have equal length")
    return np.stack([encode_input(float(s), int(a)) for s, a in zip(slopes, nudges)])


@dataclass(frozen=True)
class Sequence:
    """One session's trial sequence: inputs (T, d), outputs (T, 2)."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        O = np.asarray(self.outputs, dtype=float)
        if X.ndim != 2 or O.ndim != 2 or X.shape[0] != O.shape[0]:
            raise ValueError(f"inconsistent sequence shapes {X.shape} / {O.shape}")
        if X.shape[0] < 1:
            raise ValueError("sequence must contain at least one trial")
        if O.shape[1] != OBS_DIM:
            raise ValueError(f"outputs must have {OBS_DIM} columns, got {O.shape[1]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(O))):
            raise ValueError("sequence contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", O)

    def __len__(self):
        return self.inputs.shape[0]

    @classmethod
    def from_trials(cls, slopes, nudges, observations) -> "Sequence":
        return cls(inputs=encode_inputs(slopes, nudges),
                   outputs=np.asarray(observations, dtype=float))


@dataclass
class IohmmModel:
    """Parameters of an input-output HMM learner model.

    init_w (N, d), init_b (N,): initial-state logits w_i . x + b_i.
    trans_w (N, N, d), trans_b (N, N): from-state-i transition logits.
    emit_V (N, 2, d), emit_c (N, 2): per-state emission means V_i x + c_i.
    emit_cov (N, 2, 2): per-state emission covariances (symmetric PD).
    """

    n_states: int
    init_w: np.ndarray
    init_b: np.ndarray
    trans_w: np.ndarray
    trans_b: np.ndarray
    emit_V: np.ndarray
    emit_c: np.ndarray
    emit_cov: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.init_w.shape[1]

    def validate(self):
        N, d = self.n_states, self.input_dim
        shapes = {
            "init_w": (self.init_w, (N, d)),
            "init_b": (self.init_b, (N,)),
            "trans_w": (self.trans_w, (N, N, d)),
            "trans_b": (self.trans_b, (N, N)),
            "emit_V": (self.emit_V, (N, OBS_DIM, d)),
            "emit_c": (self.emit_c, (N, OBS_DIM)),
            "emit_cov": (self.emit_cov, (N, OBS_DIM, OBS_DIM)),
        }
        for name, (arr, want) in shapes.items():
            if arr.shape != want:
                raise ModelInvalidError(f"{name} must have shape {want}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ModelInvalidError(f"{name} contains non-finite values")
        for i in range(N):
            cov = self.emit_cov[i]
            if not np.allclose(cov, cov.T, atol=1e-10):
                raise ModelInvalidError(f"emit_cov[{i}] is not symmetric")
            if np.linalg.eigvalsh(cov).min() < COV_EIGEN_FLOOR * 0.5:
                raise ModelInvalidError(f"emit_cov[{i}] is not positive definite")
        probe = np.zeros(d)
        for dist in (self.initial_probs(probe), self.transition_matrix(probe).ravel()):
            if np.any(dist < 0) or not np.isfinite(dist).all():
                raise ModelInvalidError("degenerate probabilities")

    # --- probabilities -------------------------------------------------

    def log_initial_probs(self, x) -> np.ndarray:
        logits = self.init_w @ np.asarray(x, dtype=float) + self.init_b
        return logits - logsumexp(logits)

    def initial_probs(self, x) -> np.ndarray:
        return np.exp(self.log_initial_probs(x))

    def transition_probs(self, state: int, x) -> np.ndarray:
        """P(next state | current = state, input x), shape (N,)."""
        logits = self.trans_w[state] @ np.asarray(x, dtype=float) + self.trans_b[state]
        return np.exp(logits - logsumexp(logits))

    def transition_matrix(self, x) -> np.ndarray:
        """Row-stochastic (N, N) matrix; row i is transition_probs(i, x)."""
        return np.exp(self.log_transition_tensor(np.asarray(x, dtype=float)[None])[0])

    def log_transition_tensor(self, X) -> np.ndarray:
        """(T, N, N) log transition matrices for each input row."""
        X = np.asarray(X, dtype=float)
        logits = np.einsum("ijd,td->tij", self.trans_w, X) + self.trans_b[None]
        return logits - logsumexp(logits, axis=2, keepdims=True)

    # --- emissions ------------------------------------------------------

    def emission_mean(self, state: int, x) -> np.ndarray:
        return self.emit_V[state] @ np.asarray(x, dtype=float) + self.emit_c[state]

    def emission_log_density(self, state: int, x, o) -> float:
        diff = np.asarray(o, dtype=float) - self.emission_mean(state, x)
        return float(_gaussian_logpdf(diff[None, :], self.emit_cov[state])[0])

    def log_emission_matrix(self, X, O) -> np.ndarray:
        """(T, N) log densities of each observation row under each state."""
        X = np.asarray(X, dtype=float)
        O = np.asarray(O, dtype=float)
        out = np.empty((X.shape[0], self.n_states))
        for i in range(self.n_states):
            means = X @ self.emit_V[i].T + self.emit_c[i]
            out[:, i] = _gaussian_logpdf(O - means, self.emit_cov[i])
        return out

    def copy(self) -> "IohmmModel":
        return IohmmModel(
            n_states=self.n_states,
            init_w=self.init_w.copy(), init_b=self.init_b.copy(),
            trans_w=self.trans_w.copy(), trans_b=self.trans_b.copy(),
            emit_V=self.emit_V.copy(), emit_c=self.emit_c.copy(),
            emit_cov=self.emit_cov.copy(),
        )


def _gaussian_logpdf(diffs, cov) -> np.ndarray:
    """Log density of zero-mean Gaussian at rows of diffs (T, k)."""
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ModelInvalidError(f"covariance not positive definite: {exc}") from exc
    sol = solve_triangular(L, diffs.T, lower=True)
    quad = np.einsum("it,it->t", sol, sol)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    k = diffs.shape[1]
    return -0.5 * (k * np.log(2.0 * np.pi) + logdet + quad)


# --- forward-backward ----------------------------------------------------

@dataclass(frozen=True)
class FBResult:
    gamma: np.ndarray    # (T, N) state posteriors
    xi: np.ndarray       # (T-1, N, N) pairwise posteriors
    loglik: float


def forward_backward(model: IohmmModel, seq: Sequence) -> FBResult:
    """Scaled forward-backward pass; exact posteriors and log-likelihood.

    Per-step emission maxima are factored out before exponentiation, so the
    pass survives extremely unlikely observations. Raises
    NumericalFailureError (with the failing step index) if a step's scaled
    mass still vanishes.
    """
    X, O = seq.inputs, seq.outputs
    T, N = len(seq), model.n_states

    logB = model.log_emission_matrix(X, O)
    mB = logB.max(axis=1)
    eB = np.exp(logB - mB[:, None])
    A = np.exp(model.log_transition_tensor(X[:-1])) if T > 1 else np.empty((0, N, N))

    alpha = np.empty((T, N))
    c = np.empty(T)
    a0 = model.initial_probs(X[0]) * eB[0]
    c[0] = a0.sum()
    if not np.isfinite(c[0]) or c[0] <= 0.0:
        raise NumericalFailureError("forward mass vanished", step=0)
    alpha[0] = a0 / c[0]
    for t in range(1, T):
        at = (alpha[t - 1] @ A[t - 1]) * eB[t]
        c[t] = at.sum()
        if not np.isfinite(c[t]) or c[t] <= 0.0:
            raise NumericalFailureError("forward mass vanished", step=t)
        alpha[t] = at / c[t]
    loglik = float(np.sum(np.log(c) + mB))

    beta = np.empty((T, N))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = A[t] @ (eB[t + 1] * beta[t + 1]) / c[t + 1]

    gamma = alpha * beta
    gamma = np.clip(gamma, 0.0, None)
    gamma /= gamma.sum(axis=1, keepdims=True)

    xi = np.empty((max(T - 1, 0), N, N))
    for t in range(T - 1):
        m = alpha[t][:, None] * A[t] * (eB[t + 1] * beta[t + 1])[None, :] / c[t + 1]
        m = np.clip(m, 0.0, None)
        xi[t] = m / m.sum()
    return FBResult(gamma=gamma, xi=xi, loglik=loglik)


# --- training -------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    n_states: int
    l2_transition: float = 1.0
    elastic_net_alpha: float = 1e-4
    l1_ratio: float = 0.725
    max_iterations: int = 200
    tolerance: float = 1e-4
    n_permutations: int = 5
    seed: int = 0
    # initial-state logits conditioned on x_0; False fits intercepts only
    input_conditioned_init: bool = True

    def __post_init__(self):
        if self.n_states < 1:
            raise ValueError("n_states must be >= 1")
        if self.l2_transition < 0 or self.elastic_net_alpha < 0:
            raise ValueError("penalties must be nonnegative")
        if not 0.0 <= self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must be in [0, 1]")
        if self.max_iterations < 1 or self.tolerance <= 0 or self.n_permutations < 1:
            raise ValueError("bad iteration controls")


@dataclass
class FitResult:
    model: IohmmModel
    objective_trace: np.ndarray   # penalized objective per iteration
    loglik_trace: np.ndarray      # raw log-likelihood per iteration
    n_iter: int
    converged: bool
    # raw final logliks of all restarts, filled in by mc_train
    restart_logliks: list = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


def penalized_objective(model: IohmmModel, cfg: FitConfig, loglik: float) -> float:
    """Training objective: loglik minus L2 and elastic-net penalties."""
    pen = 0.5 * cfg.l2_transition * (float(np.sum(model.init_w**2))
                                     + float(np.sum(model.trans_w**2)))
    a, r = cfg.elastic_net_alpha, cfg.l1_ratio
    pen += a * (r * float(np.abs(model.emit_V).sum())
                + 0.5 * (1.0 - r) * float(np.sum(model.emit_V**2)))
    return loglik - pen


def _floor_covariance(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    vals = np.maximum(vals, COV_EIGEN_FLOOR)
    return vecs @ np.diag(vals) @ vecs.T


def _init_model(sequences, cfg: FitConfig, rng) -> IohmmModel:
    O = np.vstack([s.outputs for s in sequences])
    d = sequences[0].inputs.shape[1]
    N = cfg.n_states
    if O.shape[0] < N:
        raise ValueError(f"{O.shape[0]} observations cannot seed {N} states")

    centers, labels = kmeans(O, N, rng)
    global_cov = _floor_covariance(np.cov(O, rowvar=False)) if O.shape[0] > 2 \
        else np.eye(OBS_DIM)
    emit_cov = np.empty((N, OBS_DIM, OBS_DIM))
    for j in range(N):
        pts = O[labels == j]
        emit_cov[j] = _floor_covariance(np.cov(pts, rowvar=False)) if pts.shape[0] >= 5 \
            else global_cov

    def ref_zero(arr):
        arr[-1] = 0.0
        return arr

    init_b = ref_zero(rng.normal(scale=0.1, size=N))
    init_w = np.zeros((N, d))
    if cfg.input_conditioned_init:
        init_w = ref_zero(rng.normal(scale=0.01, size=(N, d)))
    trans_b = np.stack([ref_zero(rng.normal(scale=0.1, size=N)) for _ in range(N)])
    return IohmmModel(
        n_states=N,
        init_w=init_w, init_b=init_b,
        trans_w=np.zeros((N, N, d)), trans_b=trans_b,
        emit_V=np.zeros((N, OBS_DIM, d)), emit_c=centers.copy(),
        emit_cov=emit_cov,
    )


def _fit_intercept_only_init(G0: np.ndarray) -> np.ndarray:
    """Exact intercept-only initial-state M-step (reference class last)."""
    counts = G0.sum(axis=0)
    p = np.clip(counts / counts.sum(), 1e-300, None)
    return np.log(p) - np.log(p[-1])


def _emission_block_objective(X, O, w, V, c, cov, alpha, l1_ratio) -> float:
    """Weighted Gaussian loglik of a state's emissions minus its elastic-net penalty."""
    diffs = O - (X @ V.T + c)
    ll = float(w @ _gaussian_logpdf(diffs, cov))
    pen = alpha * (l1_ratio * float(np.abs(V).sum())
                   + 0.5 * (1.0 - l1_ratio) * float(np.sum(V**2)))
    return ll - pen


def _m_step(model: IohmmModel, sequences, fbs, cfg: FitConfig) -> IohmmModel:
    new = model.copy()
    N, d = model.n_states, model.input_dim

    # initial-state block
    X0 = np.stack([s.inputs[0] for s in sequences])
    G0 = np.stack([fb.gamma[0] for fb in fbs])
    if cfg.input_conditioned_init:
        W, b = fit_softmax_regression(X0, G0, cfg.l2_transition,
                                      W0=model.init_w, b0=model.init_b)
    else:
        b = _fit_intercept_only_init(G0)
        W = np.zeros((N, d))
    old_obj = softmax_objective(X0, G0, model.init_w, model.init_b, cfg.l2_transition)
    new_obj = softmax_objective(X0, G0, W, b, cfg.l2_transition)
    if new_obj <= old_obj:    # objectives are negated logliks: smaller is better
        new.init_w, new.init_b = W, b

    # transition blocks, one per source state
    long_seqs = [k for k, s in enumerate(sequences) if len(s) > 1]
    if long_seqs:
        Xt = np.vstack([sequences[k].inputs[:-1] for k in long_seqs])
        for i in range(N):
            counts = np.vstack([fbs[k].xi[:, i, :] for k in long_seqs])
            if counts.sum() < DEAD_BLOCK_MASS:
                continue
            W, b = fit_softmax_regression(Xt, counts, cfg.l2_transition,
                                          W0=model.trans_w[i], b0=model.trans_b[i])
            old_obj = softmax_objective(Xt, counts, model.trans_w[i],
                                        model.trans_b[i], cfg.l2_transition)
            new_obj = softmax_objective(Xt, counts, W, b, cfg.l2_transition)
            if new_obj <= old_obj:
                new.trans_w[i], new.trans_b[i] = W, b

    # emission blocks, one per state
    Xa = np.vstack([s.inputs for s in sequences])
    Oa = np.vstack([s.outputs for s in sequences])
    Ga = np.vstack([fb.gamma for fb in fbs])
    for i in range(N):
        w = Ga[:, i]
        sw = float(w.sum())
        if sw < DEAD_BLOCK_MASS:
            continue
        V = np.empty((OBS_DIM, d))
        c = np.empty(OBS_DIM)
        for r in range(OBS_DIM):
            V[r], c[r] = fit_elastic_net(Xa, Oa[:, r], w,
                                         cfg.elastic_net_alpha, cfg.l1_ratio,
                                         v0=model.emit_V[i, r], c0=model.emit_c[i, r])
        resid = Oa - (Xa @ V.T + c)
        cov = _floor_covariance((w[:, None] * resid).T @ resid / sw)
        old_obj = _emission_block_objective(Xa, Oa, w, model.emit_V[i], model.emit_c[i],
                                            model.emit_cov[i],
                                            cfg.elastic_net_alpha, cfg.l1_ratio)
        new_obj = _emission_block_objective(Xa, Oa, w, V, c, cov,
                                            cfg.elastic_net_alpha, cfg.l1_ratio)
        if new_obj >= old_obj:
            new.emit_V[i], new.emit_c[i], new.emit_cov[i] = V, c, cov
    return new


def gem_fit(sequences, cfg: FitConfig, *, init: IohmmModel | None = None,
            rng=None) -> FitResult:
    """Generalized EM fit on a list of Sequences.

    Stops when the penalized objective improves by less than cfg.tolerance
    or after cfg.max_iterations E-steps. The objective trace is guaranteed
    nondecreasing; a decrease beyond 1e-6 raises MonotonicityError.
    """
    if not sequences:
        raise ValueError("no training sequences")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    model = init.copy() if init is not None else _init_model(sequences, cfg, rng)

    obj_trace: list[float] = []
    ll_trace: list[float] = []
    converged = False
    for _ in range(cfg.max_iterations):
        fbs = [forward_backward(model, s) for s in sequences]
        loglik = float(sum(fb.loglik for fb in fbs))
        objective = penalized_objective(model, cfg, loglik)
        if obj_trace and objective < obj_trace[-1] - MONOTONICITY_SLACK:
            raise MonotonicityError(
                f"objective fell from {obj_trace[-1]:.9g} to {objective:.9g}")
        obj_trace.append(objective)
        ll_trace.append(loglik)
        if len(obj_trace) > 1 and objective - obj_trace[-2] < cfg.tolerance:
            converged = True
            break
        model = _m_step(model, sequences, fbs, cfg)
    return FitResult(model=model,
                     objective_trace=np.array(obj_trace),
                     loglik_trace=np.array(ll_trace),
                     n_iter=len(obj_trace), converged=converged)


def mc_train(sequences, cfg: FitConfig) -> FitResult:
    """Best-of-restarts training over shuffled sequence orders.

    Runs cfg.n_permutations independent gem_fit restarts, each with its own
    spawned RNG stream and its own random permutation of the sequence order,
    and returns the fit with the highest raw training log-likelihood (ties
    keep the earliest restart). Deterministic given cfg.seed.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_permutations)
    best: FitResult | None = None
    logliks: list[float] = []
    failures: list[Exception] = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        order = rng.permutation(len(sequences))
        shuffled = [sequences[j] for j in order]
        try:
            fit = gem_fit(shuffled, cfg, rng=rng)
        except NumericalFailureError as exc:
            log.warning("restart failed numerically at step %d: %s", exc.step, exc)
            failures.append(exc)
            logliks.append(float("-inf"))
            continue
        logliks.append(fit.loglik)
        if best is None or fit.loglik > best.loglik:
            best = fit
    if best is None:
        raise NumericalFailureError(
            f"all {cfg.n_permutations} restarts failed: {failures[-1]}",
            step=getattr(failures[-1], "step", -1))
    best.restart_logliks = logliks
    return best


@dataclass(frozen=True)
class CVResult:
    best_config: FitConfig
    best_index: int
    heldout: np.ndarray        # (n_configs, k) held-out logliks
    means: np.ndarray          # (n_configs,)


def cross_validate(sequences, configs, k: int = 5, seed: int = 0) -> CVResult:
    """K-fold model selection across candidate FitConfigs.

    Folds partition whole sequences exactly once (shuffled by `seed`); each
    candidate is trained with mc_train on the k-1 training folds and scored
    by summed held-out log-likelihood. Highest mean wins; ties keep the
    earliest candidate.
    """
    configs = list(configs)
    n = len(sequences)
    if not configs:
        raise ValueError("no candidate configs")
    if n < k:
        raise ValueError(f"{n} sequences cannot form {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.array_split(rng.permutation(n), k)

    heldout = np.empty((len(configs), k))
    for ci, cfg in enumerate(configs):
        for fi, fold in enumerate(folds):
            hold = set(int(j) for j in fold)
            train = [sequences[j] for j in range(n) if j not in hold]
            fit = mc_train(train, cfg)
            heldout[ci, fi] = sum(forward_backward(fit.model, sequences[j]).loglik
                                  for j in sorted(hold))
    means = heldout.mean(axis=1)
    best = int(np.argmax(means))
    return CVResult(best_config=configs[best], best_index=best,
                    heldout=heldout, means=means)


# --- state ordering and simulation ----------------------------------------

def default_ordering_grid() -> np.ndarray:
    """Inputs used to rank states: the 6 canonical pair slopes x all nudges."""
    rows = [encode_input(float(u), a)
            for u in bomi.pair_slopes() for a in range(N_NUDGE_LEVELS)]
    return np.stack(rows)


def state_cost_means(model: IohmmModel, input_grid=None) -> np.ndarray:
    """Mean (reaching error + smoothness) per state over the input grid."""
    grid = default_ordering_grid() if input_grid is None else np.asarray(input_grid, float)
    means = grid @ np.transpose(model.emit_V, (0, 2, 1)) + model.emit_c[:, None, :]
    return means.sum(axis=2).mean(axis=1)


def order_states(model: IohmmModel, input_grid=None) -> np.ndarray:
    """Permutation mapping skill rank (0 = best) to original state index.

    States are ranked by ascending mean emission cost over the input grid;
    ties keep the original index order.
    """
    return np.argsort(state_cost_means(model, input_grid), kind="stable")


def extract_stm(model: IohmmModel, slope: float, nudge: int,
                ordering=None) -> np.ndarray:
    """Skill-ordered transition matrix for one (slope, nudge) input."""
    if ordering is None:
        ordering = order_states(model)
    ordering = np.asarray(ordering, dtype=int)
    A = model.transition_matrix(encode_input(slope, nudge))
    return A[np.ix_(ordering, ordering)]


def sample_step(model: IohmmModel, state: int, x, rng):
    """Sample one trial: draw the observation at `state`, then the next state.

    Returns (next_state, observation); the observation is drawn first, so a
    fixed RNG stream yields reproducible (observation, transition) pairs.
    """
    if not 0 <= state < model.n_states:
        raise ValueError(f"state {state} outside 0..{model.n_states - 1}")
    x = np.asarray(x, dtype=float)
    mean = model.emission_mean(state, x)
    L = np.linalg.cholesky(model.emit_cov[state])
    obs = mean + L @ rng.standard_normal(OBS_DIM)
    probs = model.transition_probs(state, x)
    nxt = int(rng.choice(model.n_states, p=probs))
    return nxt, obs
