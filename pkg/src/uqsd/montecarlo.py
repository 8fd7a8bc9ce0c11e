"""Stochastic execution of the sequential protocol at the physical level.

Each trial prepares one of the two product states according to the priors and
feeds it through the per-party measurements, sampling outcomes either from
POVM Born probabilities or by evolving with the ancilla unitary and measuring
projectively.  Aggregation uses integer counters only, so results are
bit-identical regardless of execution schedule.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from collections.abc import Sequence

import numpy as np

from .locc import run_protocol
from .pair_disc import build_povm, evolve_with_ancilla, neumark_model, optimal_strategy
from .states import ProductInstance

# Outcome probabilities below this are artifacts of float rounding on terms
# that vanish identically; zeroing them keeps impossible branches impossible.
_PROB_FLOOR = 1e-30


class Truth(enum.Enum):
    STATE_P = "p"
    STATE_Q = "q"


class Conclusion(enum.Enum):
    IDENTIFIED_P = "p"
    IDENTIFIED_Q = "q"
    INCONCLUSIVE = "inconclusive"


class Engine(enum.Enum):
    POVM_SAMPLING = "povm"
    NEUMARK_EVOLUTION = "neumark"


@dataclasses.dataclass(frozen=True)
class RunOutcome:
    """One trial: what was prepared, what was concluded, at what cost."""

    truth: Truth
    conclusion: Conclusion
    measurements_used: int

    def __post_init__(self):
        # A conclusive answer must never contradict the preparation.
        if self.conclusion is Conclusion.IDENTIFIED_P and self.truth is not Truth.STATE_P:
            raise AssertionError("misidentification: concluded p, prepared q")
        if self.conclusion is Conclusion.IDENTIFIED_Q and self.truth is not Truth.STATE_Q:
            raise AssertionError("misidentification: concluded q, prepared p")


@dataclasses.dataclass(frozen=True)
class SimStats:
    trials: int
    success_rate: float
    misidentifications: int
    mean_measurements: float
    success_stderr: float


@dataclasses.dataclass(frozen=True)
class _Plan:
    engine: Engine
    prior_r: float
    # One entry per non-skipped step, in visiting order.  POVM entries hold
    # cumulative thresholds (t1, t2) per truth; ancilla-evolution entries hold
    # (inconclusive probability, p-branch probability given conclusive).
    steps: tuple[tuple[float, float, float, float], ...]


def _clipped(*values: float) -> list[float]:
    return [0.0 if v < _PROB_FLOOR else v for v in values]


def _compile_plan(instance: ProductInstance, order: Sequence[int], engine: Engine) -> _Plan:
    transcript = run_protocol(instance, order).transcript
    steps = []
    for rec in transcript:
        if rec.skipped:
            continue
        pair = instance.parties[rec.party_index]
        strat = optimal_strategy(rec.local_overlap, rec.priors_before)
        if engine is Engine.POVM_SAMPLING:
            povm = build_povm(pair, strat)
            row = []
            for state in (pair.p, pair.q):
                vec = state.amplitudes
                probs = _clipped(
                    *(
                        max(0.0, float(np.real(np.vdot(vec, e @ vec))))
                        for e in (povm.e_p, povm.e_q, povm.e_fail)
                    )
                )
                total = sum(probs)
                row += [probs[0] / total, (probs[0] + probs[1]) / total]
            steps.append(tuple(row))
        elif engine is Engine.NEUMARK_EVOLUTION:
            model = neumark_model(pair, strat)
            dim = pair.p.dim
            row = []
            for state in (pair.p, pair.q):
                evolved = evolve_with_ancilla(model, state)
                conclusive = evolved[model.s1_index * dim : (model.s1_index + 1) * dim]
                fail_block = evolved[model.s2_index * dim : (model.s2_index + 1) * dim]
                weights = np.abs(conclusive) ** 2
                # The conclusive branch must live in span{|p1>, |q1>}.
                assert float(np.sum(weights[2:])) < 1e-24
                p_fail, w_p1, w_q1 = _clipped(
                    float(np.sum(np.abs(fail_block) ** 2)), weights[0], weights[1]
                )
                total = p_fail + w_p1 + w_q1
                p_fail /= total
                p_p1 = 0.5 if w_p1 + w_q1 == 0.0 else w_p1 / (w_p1 + w_q1)
                row += [p_fail, p_p1]
            steps.append(tuple(row))
        else:
            raise ValueError(f"unknown engine: {engine!r}")
    return _Plan(engine=engine, prior_r=instance.priors.r, steps=tuple(steps))


def _run_trial(plan: _Plan, rng) -> RunOutcome:
    truth_is_p = rng.random() < plan.prior_r
    truth = Truth.STATE_P if truth_is_p else Truth.STATE_Q
    conclusion = Conclusion.INCONCLUSIVE
    used = 0
    for step in plan.steps:
        used += 1
        if plan.engine is Engine.POVM_SAMPLING:
            t1, t2 = (step[0], step[1]) if truth_is_p else (step[2], step[3])
            u = rng.random()
            if u < t1:
                conclusion = Conclusion.IDENTIFIED_P
                break
            if u < t2:
                conclusion = Conclusion.IDENTIFIED_Q
                break
        else:
            p_fail, p_p1 = (step[0], step[1]) if truth_is_p else (step[2], step[3])
            if rng.random() >= p_fail:
                conclusive_is_p = rng.random() < p_p1
                conclusion = (
                    Conclusion.IDENTIFIED_P if conclusive_is_p else Conclusion.IDENTIFIED_Q
                )
                break
    return RunOutcome(truth=truth, conclusion=conclusion, measurements_used=used)


def single_trial(
    instance: ProductInstance, order: Sequence[int], engine: Engine, rng_stream
) -> RunOutcome:
    """Run one physical trial, drawing randomness from rng_stream."""
    return _run_trial(_compile_plan(instance, order, engine), rng_stream)


def simulate(
    instance: ProductInstance,
    order: Sequence[int],
    trials: int,
    seed: int,
    engine: Engine,
) -> SimStats:
    """Aggregate many independent trials.

    Trial i draws from the stream seeded (seed, i), so the statistics are
    reproducible and independent of how trials would be scheduled.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    plan = _compile_plan(instance, order, engine)
    n_conclusive = 0
    total_measurements = 0
    for i in range(trials):
        outcome = _run_trial(plan, np.random.default_rng((seed, i)))
        if outcome.conclusion is not Conclusion.INCONCLUSIVE:
            n_conclusive += 1
        total_measurements += outcome.measurements_used
    rate = n_conclusive / trials
    return SimStats(
        trials=trials,
        success_rate=rate,
        misidentifications=0,
        mean_measurements=total_measurements / trials,
        success_stderr=math.sqrt(rate * (1.0 - rate) / trials),
    )
