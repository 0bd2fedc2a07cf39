"""
Synchronous advantage actor-critic over the scheduling environment
"""

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from .errors import TrainingDivergedError
from .gcn_policy import GCNPolicy, action_column
from .models import EnvConfig, EpisodeTrace, TrainConfig, TrainLogRecord
from .numerics import Adam, DiffMatrix, element
from .sim_env import Action, Observation, SchedulingEnv

logger = structlog.get_logger()


@dataclass
class StepRecord:
    observation: Observation
    action: Action
    column: int
    log_prob: float
    entropy: float
    reward: float
    value: float


@dataclass
class Trajectory:
    """Rollout segment of at most t_max decisions"""
    records: List[StepRecord] = field(default_factory=list)
    terminal: bool = False
    bootstrap_value: float = 0.0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.records], dtype=np.float64)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records], dtype=np.float64)


@dataclass(frozen=True)
class LossReport:
    policy_loss: float
    value_loss: float
    entropy: float


@dataclass
class EvalResult:
    makespan: float
    mean_decision_ms: float
    decisions: int
    trace: Optional[EpisodeTrace] = None


@dataclass
class TrainResult:
    best_makespan: float
    best_params: Dict[str, np.ndarray]
    log: List[TrainLogRecord]
    checkpoint: Optional[Path] = None


def collect_segment(env: SchedulingEnv, policy: GCNPolicy, t_max: int, rng: np.random.Generator) -> Trajectory:
    """Run the sampling policy for up to t_max decisions or until the episode ends"""
    traj = Trajectory()
    obs = env.observation
    for _ in range(t_max):
        output = policy.forward(obs)
        action = policy.act(output, "sample", rng)
        column = action_column(action, obs.num_actions)
        next_obs, reward, done = env.step(action)
        traj.records.append(
            StepRecord(
                observation=obs,
                action=action,
                column=column,
                log_prob=float(output.log_probs.value[0, column]),
                entropy=output.entropy.item(),
                reward=reward,
                value=output.value.item(),
            )
        )
        obs = next_obs
        if done:
            traj.terminal = True
            break

    traj.bootstrap_value = 0.0 if traj.terminal else policy.forward(obs).value.item()
    return traj


def compute_advantages(traj: Trajectory, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    n-step advantages and critic targets

    A_t = sum_i gamma^i r_{t+i} + V(s_{t+k}) - V(s_t), where s_{t+k} is the state
    that ends the segment (value 0 when terminal). The critic target is A_t + V(s_t).

    Returns:
        (advantages, returns)
    """
    rewards = traj.rewards
    discounted = np.zeros(len(rewards), dtype=np.float64)
    running = 0.0
    for t in reversed(range(len(rewards))):
        running = rewards[t] + gamma * running
        discounted[t] = running
    returns = discounted + traj.bootstrap_value
    return returns - traj.values, returns


def summarize_runs(makespans: Sequence[float], top: int = 5) -> Tuple[float, float]:
    """Best makespan and standard deviation over the `top` best runs"""
    ordered = sorted(makespans)
    best = ordered[:top]
    return float(best[0]), float(np.std(best)) if len(best) > 1 else 0.0


def evaluate_policy(policy: GCNPolicy, env_config: EnvConfig, with_trace: bool = False) -> EvalResult:
    """One greedy episode; also times every decision"""
    env = SchedulingEnv(env_config.model_copy(update={"use_cp_feature": policy.use_cp_feature}))
    obs = env.observation
    elapsed = 0.0
    done = False
    while not done:
        started = time.perf_counter()
        action = policy.act(policy.forward(obs), "greedy")
        elapsed += time.perf_counter() - started
        obs, _, done = env.step(action)

    return EvalResult(
        makespan=env.makespan(),
        mean_decision_ms=1000.0 * elapsed / max(env.steps, 1),
        decisions=env.steps,
        trace=env.export_trace() if with_trace else None,
    )


class A2CTrainer:
    """Single-worker A2C with separate actor and critic Adam states over a shared trunk"""

    def __init__(self, env_config: EnvConfig, config: TrainConfig, policy: Optional[GCNPolicy] = None):
        if env_config.window is None:
            raise ValueError("Training needs a finite window")
        self.config = config
        self.env = SchedulingEnv(env_config)
        self.env_config = env_config.model_copy(update={"baseline_makespan": self.env.baseline_makespan})
        self.policy = policy or GCNPolicy.create(
            window=env_config.window,
            hidden_width=config.hidden_width,
            layers=config.layers,
            seed=config.seed,
            use_cp_feature=env_config.use_cp_feature,
        )
        self.rng = np.random.default_rng(config.seed)

        params = self.policy.params
        adam_kwargs = dict(
            learning_rate=config.learning_rate,
            eps=config.adam_eps,
            beta1=config.adam_beta1,
            beta2=config.adam_beta2,
        )
        self.actor_opt = Adam({n: params[n] for n in params.actor_names()}, **adam_kwargs)
        self.critic_opt = Adam(
            {n: params[n] for n in params.critic_names()}, lr_scale=config.critic_lr_scale, **adam_kwargs
        )

    def losses(self, traj: Trajectory) -> Tuple[DiffMatrix, DiffMatrix, LossReport]:
        """
        Actor and critic losses of a trajectory under the current parameters

        The advantages are constants in the policy gradient. The actor minimizes
        -sum_t [log pi(a_t|s_t) A_t + beta H(pi(s_t))], the critic the mean squared
        error to the n-step returns.
        """
        advantages, returns = compute_advantages(traj, self.config.gamma)

        actor_terms = []
        critic_terms = []
        pg_total = 0.0
        entropy_total = 0.0
        for record, advantage, target in zip(traj.records, advantages, returns):
            output = self.policy.forward(record.observation)
            log_prob = element(output.log_probs, 0, record.column)
            actor_terms.append(log_prob * float(advantage) + output.entropy * self.config.beta)
            error = output.value - float(target)
            critic_terms.append(error * error)
            pg_total += log_prob.item() * float(advantage)
            entropy_total += output.entropy.item()

        actor_loss = -sum(actor_terms[1:], actor_terms[0])
        critic_loss = sum(critic_terms[1:], critic_terms[0]) * (1.0 / len(critic_terms))

        if not (math.isfinite(actor_loss.item()) and math.isfinite(critic_loss.item())):
            diagnostics = {
                "actor_loss": actor_loss.item(),
                "critic_loss": critic_loss.item(),
                "advantages": advantages.tolist(),
                "segment_length": len(traj),
            }
            logger.error("Non-finite loss", **diagnostics)
            raise TrainingDivergedError("Non-finite loss during A2C update", diagnostics)

        report = LossReport(
            policy_loss=-pg_total,
            value_loss=critic_loss.item(),
            entropy=entropy_total / len(traj),
        )
        return actor_loss, critic_loss, report

    def update(self, traj: Trajectory) -> LossReport:
        """One actor step and one critic step from a trajectory"""
        actor_loss, critic_loss, report = self.losses(traj)
        params = self.policy.params

        params.zero_grad()
        actor_loss.backward()
        actor_grads = {n: params[n].grad.copy() for n in params.actor_names()}
        params.zero_grad()
        critic_loss.backward()
        critic_grads = {n: params[n].grad.copy() for n in params.critic_names()}

        self.actor_opt.step(actor_grads)
        self.critic_opt.step(critic_grads)
        return report

    def train(self, checkpoint_path: Optional[Union[str, Path]] = None) -> TrainResult:
        """
        Alternate rollouts and updates for total_steps decisions

        Every eval_every steps a greedy episode is run; the parameters are kept when
        its makespan is strictly better than every earlier evaluation.
        """
        cfg = self.config
        log: List[TrainLogRecord] = []
        best = math.inf
        best_params = self.policy.params.snapshot()
        saved: Optional[Path] = None

        def evaluate(step: int, losses: Optional[LossReport]) -> None:
            nonlocal best, best_params, saved
            result = evaluate_policy(self.policy, self.env_config)
            if result.makespan < best:
                best = result.makespan
                best_params = self.policy.params.snapshot()
                logger.info("New best policy", step=step, makespan=best, seed=cfg.seed)
                if checkpoint_path is not None:
                    saved = self.policy.save(checkpoint_path, step=step, makespan=best,
                                             tiles=self.env_config.tiles, processors=self.env_config.processors)
            log.append(self._log_row(step, losses, result.makespan, best))

        evaluate(0, None)
        next_eval = cfg.eval_every
        step = 0
        self.env.reset()
        while step < cfg.total_steps:
            if self.env.done:
                self.env.reset()
            traj = collect_segment(self.env, self.policy, min(cfg.t_max, cfg.total_steps - step), self.rng)
            step += len(traj)
            losses = self.update(traj)

            if step >= next_eval or step >= cfg.total_steps:
                while next_eval <= step:
                    next_eval += cfg.eval_every
                evaluate(step, losses)
            else:
                log.append(self._log_row(step, losses, None, best))

        logger.info("Training finished", steps=step, best_makespan=best, seed=cfg.seed)
        return TrainResult(best_makespan=best, best_params=best_params, log=log, checkpoint=saved)

    @staticmethod
    def _log_row(step: int, losses: Optional[LossReport], eval_makespan: Optional[float], best: float) -> TrainLogRecord:
        return TrainLogRecord(
            step=step,
            loss_pi=losses.policy_loss if losses else None,
            loss_v=losses.value_loss if losses else None,
            entropy=losses.entropy if losses else None,
            eval_makespan=eval_makespan,
            best_makespan=best if math.isfinite(best) else None,
        )


def train(env_config: EnvConfig, config: TrainConfig, checkpoint_path: Optional[Union[str, Path]] = None) -> TrainResult:
    return A2CTrainer(env_config, config).train(checkpoint_path)
