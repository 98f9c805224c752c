"""Optimization loops and their shared plumbing."""
from .common import (AdamState, OptimizerConfig, Problem, StepRecord, TrialState, adam_update,
                     axis_sweep, out_of_budget)
from .gradcore import KappaSchedule, Selection, gradcore_select, kappa_update, run_gradcore
from .nft import TrigCoeffs, argmin_1d_trig, fit_1d_trig, run_bayes_nft, run_nft, trig_eval
from .sgd import run_bayes_sgd, run_sgd_psr

RUNNERS = {
    "sgd-psr": run_sgd_psr,
    "bayes-sgd": run_bayes_sgd,
    "gradcore": run_gradcore,
    "nft": run_nft,
    "bayes-nft": run_bayes_nft,
}

__all__ = [
    "AdamState", "OptimizerConfig", "Problem", "StepRecord", "TrialState", "adam_update",
    "axis_sweep", "out_of_budget", "KappaSchedule", "Selection", "gradcore_select",
    "kappa_update", "run_gradcore", "TrigCoeffs", "argmin_1d_trig", "fit_1d_trig",
    "run_bayes_nft", "run_nft", "trig_eval", "run_bayes_sgd", "run_sgd_psr", "RUNNERS",
]
