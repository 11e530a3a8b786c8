"""Audit-and-update training of additive outcome predictors.

Training starts from the uninformed all-1/2 predictor and repeats one
step: audit all (hypothesis, loss) pairs, then the predictor's own
loss-optimal rules; if some check shows a signed gap err of magnitude
at least epsilon between model-side and Nature-side expected loss,
append one clipped additive update against that target and continue;
otherwise stop. The stored step is +epsilon * sign(err) / lmax^2, which
the update rule subtracts along the loss-gap direction. That choice
makes the squared distance between the prediction matrix and the true
outcome table (weighted by the input distribution) fall by at least
epsilon^2 / lmax^2 per update, which is what proves termination: the
distance starts at most k/4, so at most ceil(k * lmax^2 / epsilon^2)
updates can ever be applied.

Audits run in one of three modes. Exact mode enumerates the scenario;
exceeding the proven bound there is an internal inconsistency and
raises. Empirical mode estimates Nature's side from randomized-trial
data: one fixed prefix of the dataset serves every rule audit (those
estimates do not depend on the predictor), while each decision audit
consumes a fresh slice, because its rules are chosen by the trained
predictor itself; running out of slices is a configuration error. The
cost-sensitive mode replaces the rule audit with two learner calls per
loss on instances built from the same fixed prefix.
"""

from __future__ import annotations

import dataclasses
import itertools
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audit import (
    AuditTarget,
    Violation,
    audit_via_csc,
    baseline_weak_learner,
    doi_errs,
    poi_err_matrix,
    _first_doi_violation,
    _first_poi_violation,
)
from .core import Scenario
from .errors import ArgumentError, BoundExceededError, ConfigurationError
from .predictor import (
    EXTERNAL,
    INDUCED,
    AdditivePredictor,
    Fingerprint,
    UpdateTerm,
    apply_term,
    prediction_matrix,
)
from .rct import RctDataset, ips_risk_estimate, model_risk_estimate

EXACT = "exact"
EMPIRICAL = "empirical"
CSC = "csc"
MODES = (EXACT, EMPIRICAL, CSC)


@dataclass(frozen=True)
class BoostConfig:
    """Training knobs; empirical and csc modes need data and slice sizes.

    poi_n is the length of the fixed labeled prefix reused by every
    rule audit; doi_n is the fresh labeled slice consumed by each
    decision audit. max_iter_override may only extend the proven bound,
    never lower it.
    """

    epsilon: float
    mode: str = EXACT
    seed: int = 0
    max_iter_override: Optional[int] = None
    data: Optional[RctDataset] = None
    poi_n: Optional[int] = None
    doi_n: Optional[int] = None
    threads: int = 1
    adapt: bool = False


@dataclass(frozen=True)
class TraceRecord:
    t: int
    stage: str  # "poi" | "doi"
    target: AuditTarget
    err: float
    eta: float
    potential: Optional[float]


@dataclass(frozen=True)
class BoostTrace:
    records: tuple[TraceRecord, ...]

    @property
    def updates(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class BoostResult:
    predictor: AdditivePredictor
    trace: BoostTrace
    termination: str  # "converged" | "bound_exceeded"


def iteration_bound(k: int, lmax: float, eps: float) -> int:
    """Largest number of updates training can ever apply."""
    if k < 1 or lmax <= 0 or eps <= 0:
        raise ArgumentError("iteration bound needs positive arguments")
    return math.ceil(k * lmax * lmax / (eps * eps))


def potential(pred, scenario: Scenario) -> float:
    """Distribution-weighted squared distance to the true outcome table."""
    matrix = prediction_matrix(pred, scenario)
    arrays = scenario.arrays
    sq = np.add.reduce((matrix - arrays.nature) ** 2, axis=1)
    return float(np.add.reduce(arrays.dist * sq))


class _EmpiricalData:
    """Slice bookkeeping for empirical and cost-sensitive training."""

    def __init__(self, config: BoostConfig, scenario: Scenario):
        if config.data is None:
            raise ConfigurationError(f"{config.mode} mode needs a labeled dataset")
        if config.poi_n is None or config.doi_n is None:
            raise ConfigurationError(
                f"{config.mode} mode needs poi_n and doi_n slice sizes"
            )
        if config.poi_n < 1 or config.doi_n < 1:
            raise ConfigurationError("poi_n and doi_n must be at least 1")
        if config.poi_n > config.data.n:
            raise ConfigurationError(
                f"poi_n={config.poi_n} exceeds the dataset size {config.data.n}"
            )
        self.data = config.data
        self.doi_n = config.doi_n
        self.fixed = self.data.slice(0, config.poi_n)
        self.unlabeled = self.data.xs
        self.cursor = config.poi_n
        # Rule-audit Nature-side estimates never depend on the predictor,
        # so they are computed once from the fixed prefix.
        self.nature_side = {
            (h.name, l.name): ips_risk_estimate(self.fixed, h, l, scenario.k)
            for h in scenario.hypotheses
            for l in scenario.losses
        }

    def fresh_slice(self, t: int) -> RctDataset:
        start, stop = self.cursor, self.cursor + self.doi_n
        if stop > self.data.n:
            raise ConfigurationError(
                f"training data exhausted at iteration {t}: needed samples "
                f"[{start}, {stop}) of {self.data.n}"
            )
        self.cursor = stop
        return self.data.slice(start, stop)


def _poi_violation_empirical(matrix, scenario, eps, emp: _EmpiricalData):
    for h in scenario.hypotheses:
        for loss in scenario.losses:
            model = model_risk_estimate(emp.unlabeled, matrix, h, loss, scenario)
            err = model - emp.nature_side[(h.name, loss.name)]
            if abs(err) >= eps:
                target = AuditTarget(kind="poi", hypothesis=h.name, loss=loss.name)
                return Violation(target=target, err=err)
    return None


def _doi_violation_empirical(matrix, scenario, eps, emp: _EmpiricalData, t: int):
    from .predictor import induced_rule

    fresh = emp.fresh_slice(t)
    for loss in scenario.losses:
        rule = induced_rule(matrix, loss, scenario)
        model = model_risk_estimate(emp.unlabeled, matrix, rule, loss, scenario)
        nature = ips_risk_estimate(fresh, rule, loss, scenario.k)
        err = model - nature
        if abs(err) >= eps:
            target = AuditTarget(kind="doi", loss=loss.name)
            return Violation(target=target, err=err)
    return None


def poi_boost(scenario: Scenario, config: BoostConfig) -> BoostResult:
    """Train an additive predictor until both audit families are clean.

    Returns the predictor, a per-update trace, and the termination kind.
    Exact mode raises BoundExceededError (with the partial trace
    attached) if the proven update bound is ever exceeded; estimated
    modes report termination="bound_exceeded" instead, since noisy
    audits can legitimately fail to settle.
    """
    if config.epsilon <= 0:
        raise ArgumentError("epsilon must be positive")
    if config.mode not in MODES:
        raise ArgumentError(f"unknown training mode {config.mode!r}")
    eps = float(config.epsilon)
    lmax = scenario.lmax
    bound = iteration_bound(scenario.k, lmax, eps)
    if config.max_iter_override is not None:
        if config.max_iter_override < bound:
            raise ArgumentError(
                f"max_iter_override={config.max_iter_override} is below the "
                f"proven bound {bound}; overrides may only extend it"
            )
        bound = config.max_iter_override
    emp = None
    if config.mode in (EMPIRICAL, CSC):
        emp = _EmpiricalData(config, scenario)

    step = eps / (lmax * lmax)
    n_x = len(scenario.features.points)
    matrix = np.full((n_x, scenario.k), 0.5, dtype=np.float64)
    terms: list[UpdateTerm] = []
    records: list[TraceRecord] = []
    termination = "converged"

    for t in itertools.count(1):
        violation = None
        stage = "poi"
        if config.mode == EXACT:
            errs = poi_err_matrix(matrix, scenario, threads=config.threads)
            violation = _first_poi_violation(errs, scenario, eps)
            if violation is None:
                stage = "doi"
                errs = doi_errs(matrix, scenario, threads=config.threads)
                violation = _first_doi_violation(errs, scenario, eps)
        elif config.mode == EMPIRICAL:
            violation = _poi_violation_empirical(matrix, scenario, eps, emp)
            if violation is None:
                stage = "doi"
                violation = _doi_violation_empirical(matrix, scenario, eps, emp, t)
        else:
            learner = lambda inst, rho: baseline_weak_learner(
                inst, scenario.hypotheses, rho
            )
            violation = audit_via_csc(
                matrix, emp.fixed, scenario.losses, learner, eps, scenario
            )
            if violation is None:
                stage = "doi"
                violation = _doi_violation_empirical(matrix, scenario, eps, emp, t)

        if violation is None:
            termination = "converged"
            break
        if t > bound:
            trace = BoostTrace(records=tuple(records))
            if config.mode == EXACT:
                raise BoundExceededError(
                    f"exact-mode training exceeded its proven bound of {bound} "
                    f"updates; this should be impossible",
                    trace=trace,
                )
            termination = "bound_exceeded"
            break

        eta = math.copysign(step, violation.err)
        if violation.target.kind == "poi":
            term = UpdateTerm(
                eta=eta,
                loss_name=violation.target.loss,
                target_kind=EXTERNAL,
                target_name=violation.target.hypothesis,
            )
        else:
            term = UpdateTerm(
                eta=eta,
                loss_name=violation.target.loss,
                target_kind=INDUCED,
                target_name=violation.target.loss,
            )
        matrix = apply_term(matrix, term, scenario)
        terms.append(term)
        pot = None
        if config.mode == EXACT:
            pot = potential(matrix, scenario)
        records.append(
            TraceRecord(
                t=t,
                stage=stage,
                target=violation.target,
                err=violation.err,
                eta=eta,
                potential=pot,
            )
        )

    predictor = AdditivePredictor(
        k=scenario.k,
        terms=tuple(terms),
        fingerprint=Fingerprint(
            scenario=scenario.name,
            epsilon=eps,
            lmax=float(lmax),
            adapt=bool(config.adapt),
        ),
    )
    return BoostResult(
        predictor=predictor,
        trace=BoostTrace(records=tuple(records)),
        termination=termination,
    )


def write_trace(trace: BoostTrace, path) -> None:
    """One JSON object per applied update, in order."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in trace.records:
            fh.write(
                json.dumps(
                    {
                        "t": r.t,
                        "stage": r.stage,
                        "target": r.target.to_json(),
                        "err": r.err,
                        "eta": r.eta,
                        "potential": r.potential,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
