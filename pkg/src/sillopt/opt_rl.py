"""Thickness-walk environment and advantage actor-critic agent.

The environment exposes the design as its state: an action picks one wall
and moves it one step up or down (saturating at the bounds), the configured
evaluator prices the new design, and the reward is the shared scalarized
objective.  An episode ends at a step cap, or early with a bonus when the
scaled energies come close enough to the ideal array.

The agent is a shared ReLU trunk with a softmax policy head over the 2*N
discrete actions and a scalar value head.  Training is n-step advantage
actor-critic with one Adam optimizer over all three parts.  Training runs
against the cheap surrogate; the greedy evaluation episode can instead be
coupled to an external evaluator process, mirroring how a solver would be
attached.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import objective as obj
from .design_space import DesignAction, DesignSpace, ThicknessVector
from .fileio import atomic_write_text
from .nn import AdamState, DenseNetwork, adam_step
from .objective import ScalingReference, TargetSpec
from .oracle import ObjectiveTriple

MAX_STEPS = "max_steps"
PROXIMITY = "proximity"

_AGENT_FORMAT = "sillopt-agent"
_AGENT_VERSION = 1


class EpisodeDoneError(RuntimeError):
    """step() was called on a finished episode."""


class RlTrainingError(RuntimeError):
    """Training diverged (non-finite loss or gradients)."""


@dataclass
class EnvConfig:
    space: DesignSpace
    evaluator: object  # callable ThicknessVector -> ObjectiveTriple
    target: TargetSpec
    scaling: ScalingReference
    max_steps: int = 500
    t2_threshold: float | None = None  # default: target.t2_threshold
    t2_bonus: float | None = None  # default: target.t2_bonus

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    @property
    def effective_target(self) -> TargetSpec:
        """The target with any threshold/bonus overrides folded in."""
        overrides = {}
        if self.t2_threshold is not None:
            overrides["t2_threshold"] = self.t2_threshold
        if self.t2_bonus is not None:
            overrides["t2_bonus"] = self.t2_bonus
        return replace(self.target, **overrides) if overrides else self.target


@dataclass
class EnvState:
    t: ThicknessVector
    step_count: int = 0
    last_objectives: ObjectiveTriple | None = None
    done: bool = False
    done_reason: str | None = None


@dataclass
class EpisodeStep:
    """One transition: the design after the action, and its evaluation."""

    t: ThicknessVector
    action: int
    reward: float
    objectives: ObjectiveTriple


@dataclass
class EpisodeTrace:
    initial_t: ThicknessVector
    initial_objectives: ObjectiveTriple
    steps: list[EpisodeStep] = field(default_factory=list)
    termination: str | None = None

    @property
    def episode_return(self) -> float:
        return float(sum(s.reward for s in self.steps))

    @property
    def final_objectives(self) -> ObjectiveTriple:
        return self.steps[-1].objectives if self.steps else self.initial_objectives

    @property
    def final_design(self) -> ThicknessVector:
        return self.steps[-1].t if self.steps else self.initial_t


def decode_action(space: DesignSpace, action: int) -> DesignAction:
    """Even indices increment, odd indices decrement parameter action // 2."""
    if not 0 <= action < 2 * len(space):
        raise ValueError(f"action index {action} out of range for {2 * len(space)} actions")
    return DesignAction(action // 2, +1 if action % 2 == 0 else -1)


class ThicknessEnv:
    """Sequential design-walk environment; one owner per instance."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.state: EnvState | None = None

    @property
    def action_count(self) -> int:
        return 2 * len(self.config.space)

    @property
    def observation_size(self) -> int:
        return len(self.config.space)

    def _observe(self) -> np.ndarray:
        return self.config.space.normalize(self.state.t)

    def reset(self, seed=None) -> np.ndarray:
        """Start a fresh episode from a random grid design."""
        t = self.config.space.random_grid_sample(seed)
        triple = self.config.evaluator(t)
        self.state = EnvState(t=t, last_objectives=triple)
        return self._observe()

    def step(self, action: int):
        """Apply one action; returns (observation, reward, done, info)."""
        if self.state is None:
            raise EpisodeDoneError("call reset() before step()")
        if self.state.done:
            raise EpisodeDoneError("episode is finished; call reset()")
        cfg = self.config
        t = cfg.space.apply_action(self.state.t, decode_action(cfg.space, action))
        triple = cfg.evaluator(t)
        base = obj.reward(cfg.scaling, cfg.target, triple)
        self.state.t = t
        self.state.last_objectives = triple
        self.state.step_count += 1

        bonus = 0.0
        reason = None
        effective = cfg.effective_target
        if obj.t2_satisfied(cfg.scaling, effective, triple):
            bonus = effective.t2_bonus
            reason = PROXIMITY
        elif self.state.step_count >= cfg.max_steps:
            reason = MAX_STEPS
        if reason is not None:
            self.state.done = True
            self.state.done_reason = reason
        info = {"objectives": triple, "base_reward": base, "bonus": bonus, "termination": reason}
        return self._observe(), base + bonus, self.state.done, info


class ActorCriticAgent:
    """Shared trunk feeding a softmax policy head and a scalar value head."""

    def __init__(self, trunk: DenseNetwork, policy_head: DenseNetwork, value_head: DenseNetwork):
        if trunk.output_activation != "relu":
            raise ValueError("trunk must use relu output activation")
        if policy_head.output_activation != "softmax":
            raise ValueError("policy head must use softmax output activation")
        if policy_head.input_size != trunk.output_size or value_head.input_size != trunk.output_size:
            raise ValueError("head input sizes must match the trunk output")
        if value_head.output_size != 1:
            raise ValueError("value head must be scalar")
        self.trunk = trunk
        self.policy_head = policy_head
        self.value_head = value_head

    @classmethod
    def initialize(cls, observation_size, action_count, trunk_sizes, seed) -> "ActorCriticAgent":
        rng = np.random.default_rng(seed)
        trunk = DenseNetwork.initialize((observation_size, *trunk_sizes), rng, "relu")
        policy = DenseNetwork.initialize((trunk_sizes[-1], action_count), rng, "softmax")
        value = DenseNetwork.initialize((trunk_sizes[-1], 1), rng, "identity")
        return cls(trunk, policy, value)

    @property
    def action_count(self) -> int:
        return self.policy_head.output_size

    @property
    def observation_size(self) -> int:
        return self.trunk.input_size

    def policy_probs(self, obs) -> np.ndarray:
        return self.policy_head.forward(self.trunk.forward(obs))

    def state_value(self, obs) -> float:
        return float(self.value_head.forward(self.trunk.forward(obs))[0])

    def greedy_action(self, obs) -> int:
        """Highest-probability action; ties resolve to the lowest index."""
        return int(np.argmax(self.policy_probs(obs)))

    def sample_action(self, obs, rng) -> int:
        return int(rng.choice(self.action_count, p=self.policy_probs(obs)))

    def parameters(self) -> list:
        return self.trunk.parameters() + self.policy_head.parameters() + self.value_head.parameters()

    def load_parameters(self, params):
        nt = 2 * len(self.trunk.weights)
        np_ = 2 * len(self.policy_head.weights)
        self.trunk.load_parameters(params[:nt])
        self.policy_head.load_parameters(params[nt : nt + np_])
        self.value_head.load_parameters(params[nt + np_ :])

    def to_json_obj(self) -> dict:
        return {
            "format": _AGENT_FORMAT,
            "version": _AGENT_VERSION,
            "trunk": self.trunk.to_json_obj(),
            "policy_head": self.policy_head.to_json_obj(),
            "value_head": self.value_head.to_json_obj(),
        }

    @classmethod
    def from_json_obj(cls, objgraph) -> "ActorCriticAgent":
        if objgraph.get("format") != _AGENT_FORMAT:
            raise ValueError(f"not a {_AGENT_FORMAT} object")
        if objgraph.get("version") != _AGENT_VERSION:
            raise ValueError(
                f"unsupported {_AGENT_FORMAT} version {objgraph.get('version')!r}"
            )
        return cls(
            DenseNetwork.from_json_obj(objgraph["trunk"]),
            DenseNetwork.from_json_obj(objgraph["policy_head"]),
            DenseNetwork.from_json_obj(objgraph["value_head"]),
        )


def save_agent(agent: ActorCriticAgent, path):
    atomic_write_text(path, json.dumps(agent.to_json_obj()) + "\n")


def load_agent(path) -> ActorCriticAgent:
    with open(path, encoding="utf-8") as f:
        return ActorCriticAgent.from_json_obj(json.load(f))


@dataclass(frozen=True)
class A2cConfig:
    """Actor-critic training knobs.

    ``reward_scale`` multiplies rewards inside the learner only, bringing the
    scaled-objective reward (order 100) down to the order-1 regime the Adam
    defaults expect; episode traces and return logs stay in raw reward units.
    """

    trunk_sizes: tuple[int, ...] = (64, 64)
    discount: float = 0.99
    rollout_length: int = 5
    learning_rate: float = 7e-4
    value_loss_weight: float = 0.5
    entropy_weight: float = 0.0
    reward_scale: float = 0.02
    normalize_advantage: bool = False
    max_episodes: int = 200
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")
        if self.rollout_length < 1:
            raise ValueError("rollout_length must be at least 1")
        if not self.trunk_sizes:
            raise ValueError("need at least one trunk layer")
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")


_PROB_FLOOR = 1e-12


def _a2c_update(agent, adam, obs, actions, returns, config):
    trunk_out = agent.trunk.forward(obs)
    probs = agent.policy_head.forward(trunk_out)
    values = agent.value_head.forward(trunk_out)[:, 0]
    if not (np.isfinite(probs).all() and np.isfinite(values).all()):
        raise RlTrainingError("non-finite network outputs")
    batch = obs.shape[0]
    adv = returns - values
    if config.normalize_advantage and batch > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    dprobs = np.zeros_like(probs)
    rows = np.arange(batch)
    p_taken = np.maximum(probs[rows, actions], _PROB_FLOOR)
    dprobs[rows, actions] = -adv / p_taken / batch
    if config.entropy_weight:
        dprobs += config.entropy_weight * (np.log(np.maximum(probs, _PROB_FLOOR)) + 1.0) / batch
    dvalues = (2.0 * config.value_loss_weight * (values - returns) / batch)[:, None]

    policy_b = agent.policy_head.backward(trunk_out, dprobs)
    value_b = agent.value_head.backward(trunk_out, dvalues)
    trunk_b = agent.trunk.backward(obs, policy_b.input_grad + value_b.input_grad)

    grads = trunk_b.parameter_grads() + policy_b.parameter_grads() + value_b.parameter_grads()
    params, adam = adam_step(agent.parameters(), grads, adam)
    agent.load_parameters(params)
    return adam


def train_a2c(env, config: A2cConfig):
    """Train an agent on ``env``; returns (agent, per-episode return trace).

    ``env`` needs reset(seed) -> obs, step(a) -> (obs, reward, done, info),
    plus action_count and observation_size; any object with that surface
    works, not just ThicknessEnv.  Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(config.seed)
    agent = ActorCriticAgent.initialize(
        env.observation_size, env.action_count, config.trunk_sizes, rng
    )
    adam = AdamState.initialize(agent.parameters(), config.learning_rate)

    episode_returns = []
    for episode in range(config.max_episodes):
        obs = env.reset(seed=int(rng.integers(2**31)))
        ep_return = 0.0
        done = False
        try:
            while not done:
                batch_obs, batch_actions, batch_rewards = [], [], []
                for _ in range(config.rollout_length):
                    action = agent.sample_action(obs, rng)
                    next_obs, reward, done, _ = env.step(action)
                    batch_obs.append(obs)
                    batch_actions.append(action)
                    batch_rewards.append(reward)
                    ep_return += reward
                    obs = next_obs
                    if done:
                        break
                bootstrap = 0.0 if done else agent.state_value(obs)
                returns = np.empty(len(batch_rewards))
                acc = bootstrap
                for i in range(len(batch_rewards) - 1, -1, -1):
                    acc = batch_rewards[i] * config.reward_scale + config.discount * acc
                    returns[i] = acc
                adam = _a2c_update(
                    agent,
                    adam,
                    np.asarray(batch_obs),
                    np.asarray(batch_actions),
                    returns,
                    config,
                )
        except (RlTrainingError, FloatingPointError) as exc:
            raise RlTrainingError(f"training diverged in episode {episode}: {exc}") from exc
        if not np.isfinite(ep_return):
            raise RlTrainingError(f"training diverged in episode {episode}: non-finite return")
        episode_returns.append(ep_return)
    return agent, episode_returns


def run_greedy_episode(env, agent: ActorCriticAgent, seed=None) -> EpisodeTrace:
    """One deterministic episode following the argmax policy."""
    obs = env.reset(seed=seed)
    trace = EpisodeTrace(env.state.t, env.state.last_objectives)
    done = False
    while not done:
        action = agent.greedy_action(obs)
        obs, reward, done, info = env.step(action)
        trace.steps.append(EpisodeStep(env.state.t, action, reward, info["objectives"]))
    trace.termination = env.state.done_reason
    return trace


def evaluate_greedy(env, agent: ActorCriticAgent, episodes: int = 1, seed=None) -> list[EpisodeTrace]:
    """Greedy evaluation episodes with reset seeds derived from ``seed``."""
    rng = np.random.default_rng(seed)
    return [
        run_greedy_episode(env, agent, seed=int(rng.integers(2**31)))
        for _ in range(episodes)
    ]
