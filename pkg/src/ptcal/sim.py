"""Seeded simulation of probability-perceiving decision agents.

Each agent perceives a reported probability through the prospect-theory
weighting function, blends it with a prior belief according to how much it
currently relies on the system, and answers on a 1-5 Likert scale. After the
outcome is revealed, reliance moves towards the observed agreement between
perception and outcome. Arms differ only in what is reported and which
outcomes follow.

Agent ``j`` draws its scenarios and decision noise from the same seed in every
arm, so arms are compared under common random numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .calibrate import CalibratorModel, calibrate_dataset
from .core import Dataset, PtcalError
from .metrics import pearson
from .pt import PTParams, pt_inverse, pt_weight
from .synth import shuffle_outcomes

ARM_NAMES = ("uncalibrated", "calibrated", "pt_calibrated", "pt_uncalibrated", "random")


@dataclass(frozen=True)
class AgentSpec:
    gamma_agent: float = 0.71
    prior: float = 0.5
    reliance_init: float = 0.5
    learning_rate: float = 0.5
    decision_noise_sd: float = 0.05
    seed: int = 0

    def __post_init__(self):
        PTParams(self.gamma_agent)
        for name in ("prior", "reliance_init", "learning_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PtcalError(f"{name} must lie in [0, 1], got {v}")
        if not self.decision_noise_sd >= 0:
            raise PtcalError("decision_noise_sd must be non-negative")


@dataclass
class Agent:
    spec: AgentSpec
    reliance: Optional[float] = None
    rng: Optional[np.random.Generator] = None

    def __post_init__(self):
        if self.reliance is None:
            self.reliance = self.spec.reliance_init

    def perceive(self, reported: float) -> float:
        return pt_weight(reported, self.spec.gamma_agent)

    def decide(self, reported: float, noise: Optional[float] = None) -> tuple[int, float]:
        """Likert answer for ``reported`` and the probability the agent acted on.

        ``noise`` overrides the Gaussian decision-noise draw.
        """
        blended = self.reliance * self.perceive(reported) + (1.0 - self.reliance) * self.spec.prior
        if noise is None:
            sd = self.spec.decision_noise_sd
            noise = float(self.rng.normal(0.0, sd)) if sd > 0 and self.rng is not None else 0.0
        noisy = min(1.0, max(0.0, blended + noise))
        # half-up rounding
        return 1 + int(math.floor(4.0 * noisy + 0.5)), noisy

    def update(self, reported: float, outcome: int) -> float:
        agreement = 1.0 - abs(self.perceive(reported) - outcome)
        lr = self.spec.learning_rate
        self.reliance = min(1.0, max(0.0, (1.0 - lr) * self.reliance + lr * agreement))
        return self.reliance


def agent_decide(agent: Agent, reported: float, noise: Optional[float] = None) -> tuple[int, float]:
    return agent.decide(reported, noise)


def agent_update(agent: Agent, reported: float, outcome: int) -> float:
    return agent.update(reported, outcome)


@dataclass(frozen=True)
class Arm:
    name: str
    reported_probs: np.ndarray
    outcomes: np.ndarray

    def __post_init__(self):
        if self.name not in ARM_NAMES:
            raise PtcalError(f"unknown arm {self.name!r}")
        if len(self.reported_probs) != len(self.outcomes):
            raise PtcalError("reported probabilities and outcomes differ in length")

    def __len__(self) -> int:
        return len(self.outcomes)


def build_arms(base: Dataset, calibrator: Optional[CalibratorModel], pt, seed: int) -> list[Arm]:
    """The five reporting arms over the samples of ``base``, in :data:`ARM_NAMES` order."""
    if calibrator is None:
        raise PtcalError("a fitted calibrator is required")
    base.require_nonempty()
    pt = pt if isinstance(pt, PTParams) else PTParams(pt)
    raw = np.asarray(base.scores, dtype=float)
    cal = calibrate_dataset(calibrator, base)
    pt_cal = np.atleast_1d(pt_inverse(cal, pt))
    pt_raw = np.atleast_1d(pt_inverse(raw, pt))
    outcomes = np.asarray(base.labels)
    coin = shuffle_outcomes(base, seed).labels
    return [
        Arm("uncalibrated", raw, outcomes),
        Arm("calibrated", cal, outcomes),
        Arm("pt_calibrated", pt_cal, outcomes),
        Arm("pt_uncalibrated", pt_raw, outcomes),
        Arm("random", pt_cal.copy(), np.asarray(coin)),
    ]


@dataclass(frozen=True)
class ArmResult:
    name: str
    per_agent_corr: tuple[float, ...]
    mean_corr: float
    excluded: int
    decisions: np.ndarray  # agents x scenarios Likert answers
    scenarios: np.ndarray  # agents x scenarios sample indices

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mean_corr": self.mean_corr,
            "per_agent_corr": list(self.per_agent_corr),
            "excluded_constant_agents": self.excluded,
            "decisions": self.decisions.tolist(),
        }


def agent_seed(seed: int, agent_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(agent_index),))


def run_study(
    arms: Sequence[Arm],
    population: AgentSpec = AgentSpec(),
    scenarios_per_agent: int = 20,
    agents_per_arm: int = 30,
    seed: Optional[int] = None,
) -> list[ArmResult]:
    """Run every arm with ``agents_per_arm`` fresh agents of ``scenarios_per_agent`` scenarios each.

    Per-agent Pearson correlation is taken between reported probabilities and
    Likert answers; agents whose answers never vary are left out of the mean
    and counted in ``excluded``.
    """
    seed = population.seed if seed is None else seed
    results = []
    for arm in arms:
        if len(arm) < scenarios_per_agent:
            raise PtcalError(
                f"arm {arm.name!r} has {len(arm)} samples, fewer than {scenarios_per_agent} scenarios"
            )
        reported = np.asarray(arm.reported_probs, dtype=float)
        outcomes = np.asarray(arm.outcomes)
        decisions = np.zeros((agents_per_arm, scenarios_per_agent), dtype=np.int64)
        picks = np.zeros((agents_per_arm, scenarios_per_agent), dtype=np.int64)
        corrs = []
        excluded = 0
        for j in range(agents_per_arm):
            rng = np.random.default_rng(agent_seed(seed, j))
            pick = rng.choice(len(arm), size=scenarios_per_agent, replace=False)
            agent = Agent(population, rng=rng)
            for s, i in enumerate(pick):
                decisions[j, s], _ = agent.decide(float(reported[i]))
                agent.update(float(reported[i]), int(outcomes[i]))
            picks[j] = pick
            shown = reported[pick]
            if np.ptp(decisions[j]) == 0 or np.ptp(shown) == 0:
                excluded += 1
                continue
            corrs.append(pearson(shown, decisions[j]))
        mean = float(np.mean(corrs)) if corrs else math.nan
        results.append(ArmResult(arm.name, tuple(corrs), mean, excluded, decisions, picks))
    return results
