"""Verification of omniprediction across importance-weighted input shifts.

A weight class lists bounded nonnegative reweightings of the input
distribution with unit mean, each defining a shifted distribution. A
predictor trained to indistinguishability against the weight-augmented
loss collection {w(x) * loss : loss, w} keeps its optimality guarantee
on every shifted distribution and on every mixture of them, without
retraining and without changing its loss-optimal rules: scaling the
pointwise objective by a positive weight never moves the argmin.

The checks here are exact. Mixture verification draws the mixing
coefficients from a seeded generator, so reports are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import (
    InputDistribution,
    Loss,
    Scenario,
    WeightClass,
    WeightFunction,
    performative_risk_exact,
)
from .errors import ArgumentError, ConfigurationError, WeightInvariantError
from .predictor import (
    AdditivePredictor,
    _resolve_term,
    induced_rule,
    prediction_matrix,
)
from .core import MASS_TOLERANCE

__all__ = [
    "WeightFunction",
    "WeightClass",
    "MixtureSpec",
    "augment_losses",
    "augment_scenario",
    "shift_distribution",
    "mixture_distribution",
    "verify_universal_adaptability",
    "induced_rule_shift_invariance_check",
    "AdaptReport",
    "DistributionCheck",
    "resolve_evaluation_scenario",
]


@dataclass(frozen=True)
class MixtureSpec:
    """Convex combination of the weight class's shifted distributions."""

    components: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if len(self.components) == 0:
            raise ArgumentError("mixture needs at least one component")
        try:
            pairs = [(str(name), float(lam)) for name, lam in self.components]
        except (TypeError, ValueError):
            raise ArgumentError(
                "mixture components must be (weight name, coefficient) pairs"
            ) from None
        if any(lam < 0 for _, lam in pairs):
            raise ArgumentError("mixture coefficients must be nonnegative")
        total = math.fsum(lam for _, lam in pairs)
        if abs(total - 1.0) > MASS_TOLERANCE:
            raise ArgumentError(
                f"mixture coefficients sum to {total!r}, expected 1"
            )


def augment_losses(
    losses: tuple[Loss, ...], weights: WeightClass, features
) -> tuple[Loss, ...]:
    """Every loss rescaled pointwise by every weight function.

    The augmented loss named "loss@weight" has values w(x) * loss(x, yhat, y),
    bound loss.lmax * wmax (class-level wmax), and is never input-oblivious
    since the weight varies with the feature.
    """
    augmented = []
    for loss in losses:
        for w in weights.weights:
            table = {
                x: {
                    yhat: (w.weight(x) * pair[0], w.weight(x) * pair[1])
                    for yhat, pair in row.items()
                }
                for x, row in loss.table.items()
            }
            augmented.append(
                Loss(
                    name=f"{loss.name}@{w.name}",
                    lmax=loss.lmax * weights.wmax,
                    table=table,
                    input_oblivious=False,
                )
            )
    return tuple(augmented)


def augment_scenario(scenario: Scenario) -> Scenario:
    """The same scenario with its losses replaced by the augmented ones."""
    if scenario.weights is None:
        raise ConfigurationError(
            "scenario has no weight class, so losses cannot be augmented"
        )
    new_losses = augment_losses(
        scenario.losses, scenario.weights, scenario.features.points
    )
    return replace(scenario, losses=new_losses)


def shift_distribution(dist: InputDistribution, w: WeightFunction) -> InputDistribution:
    """Input distribution reweighted pointwise by w; verifies unit mass."""
    masses = {x: w.weight(x) * dist.mass(x) for x in dist.probabilities}
    total = math.fsum(masses.values())
    if abs(total - 1.0) > MASS_TOLERANCE:
        raise WeightInvariantError(
            f"weight {w.name!r} reweights the distribution to total mass "
            f"{total!r}, expected 1"
        )
    return InputDistribution(probabilities=masses)


def mixture_distribution(
    dist: InputDistribution, weights: WeightClass, spec: MixtureSpec
) -> InputDistribution:
    """Pointwise convex combination of the mixture's shifted distributions."""
    shifted = {
        name: shift_distribution(dist, weights.by_name(name))
        for name, _ in spec.components
    }
    masses = {
        x: math.fsum(lam * shifted[name].mass(x) for name, lam in spec.components)
        for x in dist.probabilities
    }
    return InputDistribution(probabilities=masses)


def resolve_evaluation_scenario(pred, scenario: Scenario) -> Scenario:
    """Scenario to evaluate a predictor against, honoring its fingerprint.

    A predictor trained on augmented losses references names like
    "loss@weight" that only resolve after augmentation; if such a
    predictor is handed the base scenario, the augmented one is built
    from its weight class.
    """
    if isinstance(pred, AdditivePredictor) and pred.fingerprint.adapt:
        try:
            for term in pred.terms:
                _resolve_term(term, scenario)
        except Exception:
            return augment_scenario(scenario)
    return scenario


@dataclass(frozen=True)
class DistributionCheck:
    """Optimality slack of the predictor's rules on one distribution."""

    name: str
    worst_slack: float
    passed: bool
    per_loss: tuple[tuple[str, float, float], ...]  # (loss, rule risk, best rival risk)


@dataclass(frozen=True)
class AdaptReport:
    eps: float
    checks: tuple[DistributionCheck, ...]
    passed: bool
    rule_invariance: Optional["InvarianceReport"] = None

    def to_json_dict(self) -> dict:
        doc = {
            "eps": self.eps,
            "distributions": [
                {
                    "name": c.name,
                    "worst_slack": c.worst_slack,
                    "pass": c.passed,
                    "per_loss": [
                        {"loss": name, "risk": risk, "min_rival_risk": rival}
                        for name, risk, rival in c.per_loss
                    ],
                }
                for c in self.checks
            ],
            "pass": self.passed,
        }
        if self.rule_invariance is not None:
            doc["rule_invariance"] = {
                "pass": self.rule_invariance.passed,
                "mismatches": [
                    {"loss": l, "weight": w, "feature": x}
                    for l, w, x in self.rule_invariance.mismatches
                ],
            }
        return doc


@dataclass(frozen=True)
class InvarianceReport:
    passed: bool
    mismatches: tuple[tuple[str, str, str], ...]  # (loss, weight, feature)


_SLACK_GRACE = 1e-12


def verify_universal_adaptability(
    pred,
    scenario: Scenario,
    eps: float,
    n_mixtures: int = 10,
    seed: int = 0,
) -> AdaptReport:
    """Check 2*eps optimality of the predictor's rules on every shift.

    Each weight function's shifted distribution is checked, plus
    n_mixtures random mixtures drawn from the seed. The loss-optimal
    rules are computed once from the predictor and reused for every
    distribution, since positive reweighting cannot change them. A
    distribution passes when, for every loss, the rule's risk is within
    2*eps of the best hypothesis risk.
    """
    if scenario.weights is None:
        raise ConfigurationError("universal adaptability needs a weight class")
    if n_mixtures < 0:
        raise ArgumentError("n_mixtures must be nonnegative")
    eval_scenario = resolve_evaluation_scenario(pred, scenario)
    matrix = prediction_matrix(pred, eval_scenario)
    rules = [(loss, induced_rule(matrix, loss, scenario)) for loss in scenario.losses]

    weights = scenario.weights
    distributions = [
        (f"weight:{w.name}", shift_distribution(scenario.input_distribution, w))
        for w in weights.weights
    ]
    rng = np.random.Generator(np.random.PCG64(seed))
    for i in range(n_mixtures):
        raw = rng.random(len(weights.weights))
        total = float(np.add.reduce(raw))
        if total == 0.0:
            raw = np.ones_like(raw)
            total = float(len(raw))
        spec = MixtureSpec(
            components=tuple(
                (w.name, float(v / total)) for w, v in zip(weights.weights, raw)
            )
        )
        distributions.append(
            (
                f"mixture:{seed}:{i}",
                mixture_distribution(scenario.input_distribution, weights, spec),
            )
        )

    checks = []
    for name, dist in distributions:
        per_loss = []
        worst = -math.inf
        for loss, rule in rules:
            risk = performative_risk_exact(rule, scenario.nature, loss, dist)
            rival = min(
                performative_risk_exact(h, scenario.nature, loss, dist)
                for h in scenario.hypotheses
            )
            per_loss.append((loss.name, risk, rival))
            worst = max(worst, risk - rival)
        checks.append(
            DistributionCheck(
                name=name,
                worst_slack=worst,
                passed=worst <= 2.0 * eps + _SLACK_GRACE,
                per_loss=tuple(per_loss),
            )
        )
    return AdaptReport(
        eps=eps,
        checks=tuple(checks),
        passed=all(c.passed for c in checks),
    )


def induced_rule_shift_invariance_check(pred, scenario: Scenario) -> InvarianceReport:
    """Verify loss-optimal rules ignore positive reweighting pointwise.

    For every loss and weight, the rule induced by the reweighted loss
    must equal the rule induced by the plain loss at every feature with
    positive weight. Zero-weight features are excluded: there the
    reweighted objective is identically zero and the argmin is fixed by
    tie-breaking alone.
    """
    if scenario.weights is None:
        raise ConfigurationError("rule invariance needs a weight class")
    eval_scenario = resolve_evaluation_scenario(pred, scenario)
    matrix = prediction_matrix(pred, eval_scenario)
    augmented = augment_losses(
        scenario.losses, scenario.weights, scenario.features.points
    )
    by_name = {loss.name: loss for loss in augmented}
    mismatches = []
    for loss in scenario.losses:
        plain = induced_rule(matrix, loss, scenario)
        for w in scenario.weights.weights:
            shifted = induced_rule(matrix, by_name[f"{loss.name}@{w.name}"], scenario)
            for x in scenario.features.points:
                if w.weight(x) > 0 and plain.decide(x) != shifted.decide(x):
                    mismatches.append((loss.name, w.name, x))
    return InvarianceReport(passed=len(mismatches) == 0, mismatches=tuple(mismatches))
