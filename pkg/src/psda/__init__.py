"""Probabilistic spherical discriminant analysis on unit-norm embeddings.

Von Mises-Fisher generative model for speaker (or any entity) verification:
each identity is a direction on the unit hypersphere, observations scatter
around it with a shared within-identity concentration, and verification
trials are scored with closed-form log likelihood ratios. Includes EM
training from sufficient statistics, DET/EER/minDCF evaluation, file
formats, and a command-line pipeline (``psda --help``).
"""

__version__ = "0.1.0"

from .bessel import R_MAX, BesselOrder, log_bessel_i, log_cnu, rho, rho_inv
from .errors import CappedConcentrationError, ParseError, PsdaError
from .metrics import LabeledScores, det_points, eer, eer_staircase, min_dcf
from .model import PsdaModel, SideStats, em_train, init_params, marginal_loglik, posterior
from .scoring import ScoreReport, Trial, cosine_score, llr_score, score_matrix, score_trials
from .vmf import VmfParams, fit_ml, log_density_rel_uniform, mean_vector, sample, unit, unit_rows

__all__ = [
    "BesselOrder",
    "CappedConcentrationError",
    "EmbeddingTable",
    "LabeledScores",
    "ParseError",
    "PsdaError",
    "PsdaModel",
    "R_MAX",
    "ScoreReport",
    "SideStats",
    "Trial",
    "VmfParams",
    "__version__",
    "cosine_score",
    "det_points",
    "eer",
    "eer_staircase",
    "em_train",
    "fit_ml",
    "init_params",
    "llr_score",
    "load_embeddings",
    "load_enroll_map",
    "load_labels",
    "load_model",
    "load_scores",
    "load_trials",
    "log_bessel_i",
    "log_cnu",
    "log_density_rel_uniform",
    "marginal_loglik",
    "mean_vector",
    "min_dcf",
    "posterior",
    "rho",
    "rho_inv",
    "sample",
    "save_embeddings",
    "save_labels",
    "save_model",
    "save_scores",
    "save_trials",
    "score_matrix",
    "score_trials",
    "speaker_stats",
    "synth_dataset",
    "synth_trials",
    "unit",
    "unit_rows",
]

from .io import (  # noqa: E402  (io imports __version__ above)
    EmbeddingTable,
    load_embeddings,
    load_enroll_map,
    load_labels,
    load_model,
    load_scores,
    load_trials,
    save_embeddings,
    save_labels,
    save_model,
    save_scores,
    save_trials,
    speaker_stats,
    synth_dataset,
    synth_trials,
)
