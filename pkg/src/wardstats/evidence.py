"""Bayes' rule in odds form for two competing hypotheses.

posterior odds = prior odds x likelihood ratio, where the likelihood
ratio is P(E | prosecution) / P(E | defence). Computation runs on the
log-odds scale so priors of 1e-14 and below do not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .core import WardStatsError


class DegeneratePriorError(WardStatsError):
    """Prior of 1 (or evidence impossible under both hypotheses)."""


@dataclass(frozen=True)
class EvidenceModel:
    prior_p: float
    p_e_given_hp: float
    p_e_given_hd: float

    def __post_init__(self):
        for name in ("prior_p", "p_e_given_hp", "p_e_given_hd"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def with_prior(self, prior_p: float) -> "EvidenceModel":
        return EvidenceModel(prior_p, self.p_e_given_hp, self.p_e_given_hd)


def prob_to_odds(p: float) -> float:
    return p / (1.0 - p) if p < 1.0 else math.inf


def odds_to_prob(odds: float) -> float:
    if math.isinf(odds):
        return 1.0
    return odds / (1.0 + odds)


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def likelihood_ratio(model: EvidenceModel) -> float:
    if model.p_e_given_hd == 0.0:
        if model.p_e_given_hp == 0.0:
            return math.nan
        return math.inf
    return model.p_e_given_hp / model.p_e_given_hd


def posterior(model: EvidenceModel) -> float:
    """P(H_p | E)."""
    p, a, b = model.prior_p, model.p_e_given_hp, model.p_e_given_hd
    if p == 1.0:
        raise DegeneratePriorError("prior probability of 1 leaves nothing to update")
    if a == 0.0 and b == 0.0:
        raise DegeneratePriorError("evidence has probability 0 under both hypotheses")
    if a == b:
        return p
    if p == 0.0:
        if b == 0.0:
            raise DegeneratePriorError("prior 0 against evidence impossible under the defence")
        return 0.0
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return 0.0
    log_odds = math.log(p) - math.log1p(-p) + math.log(a) - math.log(b)
    return _expit(log_odds)


def posterior_odds(model: EvidenceModel) -> float:
    return prob_to_odds(model.prior_p) * likelihood_ratio(model)


def prior_sensitivity(model: EvidenceModel, prior_grid: Iterable[float]) -> list[dict]:
    """Posterior for each prior on the grid, other inputs held fixed."""
    return [{"prior": q, "posterior": posterior(model.with_prior(q))} for q in prior_grid]
