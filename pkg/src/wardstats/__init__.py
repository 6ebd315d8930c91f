"""Roster and ward-mortality statistics: ingestion, time-of-death
diagnostics, death attribution and zone risk, Bayesian evidence, logistic
regression, vitreous-potassium prediction intervals and a null-model
roster simulator."""

from .core import (AdmissionRecord, CivilTime, DeathRecord, EmptyInputError, ParseError, RecordError,
                   Sector, ShiftRecord, WardStatsError, Zone, load_admissions, load_deaths, load_roster,
                   parse_admissions, parse_deaths, parse_roster)
from .attribution import AttributionPolicy, RiskTableRow, attribute, risk_table, zone_risk_row
from .evidence import EvidenceModel, likelihood_ratio, posterior
from .glm import GlmFit, build_design, fit_design, fit_logistic
from .vitreous import PolyRegModel, PredictionInterval, fit_poly2, predict_interval, t_quantile
from .rostersim import (IntensityProfile, NurseProfile, RegistrationModel, WardConfig, gen_deaths,
                        gen_roster, run_null_experiment)

__version__ = "0.1.0"

__all__ = [
    "AdmissionRecord", "AttributionPolicy", "CivilTime", "DeathRecord", "EmptyInputError", "EvidenceModel",
    "GlmFit", "IntensityProfile", "NurseProfile", "ParseError", "PolyRegModel", "PredictionInterval",
    "RecordError", "RegistrationModel", "RiskTableRow", "Sector", "ShiftRecord", "WardConfig",
    "WardStatsError", "Zone", "attribute", "build_design", "fit_design", "fit_logistic", "fit_poly2",
    "gen_deaths", "gen_roster", "likelihood_ratio", "load_admissions", "load_deaths", "load_roster",
    "parse_admissions", "parse_deaths", "parse_roster", "posterior", "predict_interval", "risk_table",
    "run_null_experiment", "t_quantile", "zone_risk_row",
]
