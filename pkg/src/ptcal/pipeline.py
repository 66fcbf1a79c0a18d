"""End-to-end workflows shared by the CLI and the test-suite."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import calibrate as cal
from .core import RNG_ALGORITHM, Dataset, PtcalError, SplitSpec, derive_seed, split_dataset
from .metrics import AnovaResult, MetricReport, anova_oneway, evaluate, pearson
from .pt import DEFAULT_GAMMA, PTParams
from .sim import AgentSpec, ArmResult, build_arms, run_study
from .synth import DistortionSpec, generate


@dataclass(frozen=True)
class RunConfig:
    gamma: float = DEFAULT_GAMMA
    bins: int = cal.DEFAULT_BINS
    strategy: str = cal.EQUAL_WIDTH
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    calibrator: str = "isotonic"
    master_seed: int = 42

    def __post_init__(self):
        PTParams(self.gamma)
        if int(self.bins) != self.bins or self.bins < 1:
            raise PtcalError(f"bins must be a positive integer, got {self.bins!r}")
        if self.strategy not in cal.BIN_STRATEGIES:
            raise PtcalError(f"unknown bin strategy {self.strategy!r}")
        if self.calibrator not in cal.METHODS:
            raise PtcalError(f"unknown calibration method {self.calibrator!r}")
        object.__setattr__(self, "split", tuple(float(f) for f in self.split))
        self.split_spec()

    def split_spec(self) -> SplitSpec:
        return SplitSpec(*self.split, seed=derive_seed(self.master_seed, "split"))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split"] = {
            "fractions": list(self.split),
            "seed": self.split_spec().seed,
        }
        d["rng"] = RNG_ALGORITHM
        return d


# ---------------------------------------------------------------- compare

COMPARE_METHODS = ("uncalibrated", "platt", "temperature", "isotonic", "binning_with_platt")
COMPARE_COLUMNS = {"accuracy": max, "f1": max, "ece": min, "nll": min, "brier": min}


@dataclass(frozen=True)
class CompareRow:
    method: str
    report: Optional[MetricReport]
    error: Optional[str] = None


def compare_methods(data: Dataset, cfg: RunConfig) -> tuple[list[CompareRow], dict[str, list[str]]]:
    """Fit every calibrator on the validation split and score all of them on the test split.

    Returns the rows (uncalibrated first) and, per column, the methods holding
    the best value. A method that cannot be fitted (temperature scaling
    without logits, Platt on separable data) keeps its row with ``error`` set.
    """
    _, val, test = split_dataset(data, cfg.split_spec())
    if len(val) == 0 or len(test) == 0:
        raise PtcalError("dataset too small to split into validation and test parts")
    rows = []
    for method in COMPARE_METHODS:
        try:
            model = cal.IdentityModel() if method == "uncalibrated" else cal.fit_calibrator(
                method, val, cfg.bins, cfg.strategy
            )
            q = cal.calibrate_dataset(model, test)
            rows.append(CompareRow(method, evaluate(q, test.labels, cfg.bins)))
        except PtcalError as exc:
            rows.append(CompareRow(method, None, str(exc)))
    best = {}
    for column, pick in COMPARE_COLUMNS.items():
        values = [getattr(r.report, column) for r in rows if r.report is not None]
        target = pick(values)
        best[column] = [r.method for r in rows if r.report is not None and getattr(r.report, column) == target]
    return rows, best


# ---------------------------------------------------------------- simulate


@dataclass(frozen=True)
class SimulationConfig:
    """Everything that determines one simulated study.

    The base classifier's scores are ``pt_weight``-distorted (gamma
    ``distortion_gamma``) versions of true probabilities drawn from
    Beta(``law_alpha``, ``law_alpha``).
    """

    run: RunConfig = field(default_factory=RunConfig)
    gamma_agent: Optional[float] = None
    n: int = 20_000
    distortion: str = "pt_weight"
    distortion_gamma: float = 0.71
    distortion_t: float = 1.0
    law_alpha: float = 0.4
    agents: int = 30
    scenarios: int = 20
    prior: float = 0.5
    reliance_init: float = 0.5
    learning_rate: float = 0.5
    noise_sd: float = 0.05

    def agent_spec(self) -> AgentSpec:
        gamma = self.run.gamma if self.gamma_agent is None else self.gamma_agent
        return AgentSpec(
            gamma_agent=gamma,
            prior=self.prior,
            reliance_init=self.reliance_init,
            learning_rate=self.learning_rate,
            decision_noise_sd=self.noise_sd,
            seed=derive_seed(self.run.master_seed, "agents"),
        )

    def distortion_spec(self) -> DistortionSpec:
        return DistortionSpec(
            kind=self.distortion,
            n=self.n,
            seed=derive_seed(self.run.master_seed, "synth"),
            law="beta",
            gamma=self.distortion_gamma,
            t=self.distortion_t,
            alpha=self.law_alpha,
            beta=self.law_alpha,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["run"] = self.run.to_dict()
        d["gamma_agent"] = self.agent_spec().gamma_agent
        d["agent_seed"] = self.agent_spec().seed
        d["synth_seed"] = self.distortion_spec().seed
        d["shuffle_seed"] = derive_seed(self.run.master_seed, "shuffle")
        return d


@dataclass(frozen=True)
class SimulationResult:
    arms: tuple[ArmResult, ...]
    anova: dict[tuple[str, str], AnovaResult]
    outcome_correlation: dict[str, float]

    def by_name(self, name: str) -> ArmResult:
        return next(a for a in self.arms if a.name == name)

    def ranking(self) -> list[str]:
        return [a.name for a in sorted(self.arms, key=lambda a: -a.mean_corr)]

    def to_dict(self) -> dict:
        return {
            "arms": [a.to_dict() for a in self.arms],
            "ranking": self.ranking(),
            "anova": [
                {
                    "arm_a": a,
                    "arm_b": b,
                    "f_stat": r.f_stat,
                    "df_between": r.df_between,
                    "df_within": r.df_within,
                    "p_value": r.p_value,
                }
                for (a, b), r in self.anova.items()
            ],
            "outcome_correlation": self.outcome_correlation,
        }


def run_simulation(cfg: SimulationConfig = SimulationConfig()) -> SimulationResult:
    """Synthesize scores, calibrate on the validation split, and run the five arms on the test split."""
    data = generate(cfg.distortion_spec())
    _, val, test = split_dataset(data, cfg.run.split_spec())
    model = cal.fit_calibrator(cfg.run.calibrator, val, cfg.run.bins, cfg.run.strategy)
    arms = build_arms(test, model, PTParams(cfg.run.gamma), derive_seed(cfg.run.master_seed, "shuffle"))
    spec = cfg.agent_spec()
    results = run_study(arms, spec, cfg.scenarios, cfg.agents, spec.seed)
    anova = {}
    for ra, rb in itertools.combinations(results, 2):
        try:
            anova[(ra.name, rb.name)] = anova_oneway([ra.per_agent_corr, rb.per_agent_corr])
        except PtcalError:
            anova[(ra.name, rb.name)] = AnovaResult(math.nan, 1, 0, math.nan)
    outcome_corr = {}
    for arm in arms:
        try:
            outcome_corr[arm.name] = pearson(arm.reported_probs, arm.outcomes)
        except PtcalError:
            outcome_corr[arm.name] = math.nan
    return SimulationResult(tuple(results), anova, outcome_corr)
