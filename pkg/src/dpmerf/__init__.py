"""Differentially private data generation with random-feature mean embeddings."""
from .data import Dataset, GridMixture, Schema, load_tabular, make_gaussian_grid, nll, undersample
from .embedding import MeanEmbedding, labeled_mean_embedding, mean_embedding, mmd_full_sq, mmd_rf_sq
from .evaluate import EvalReport, mode_coverage, roc_auc, train_eval_classifier
from .featuremap import FeatureMap, median_heuristic_bandwidth, sample_frequencies
from .generator import Architecture, TrainConfig, init_generator, loss_and_grad, sample, train
from .pipeline import RunConfig, release_phase, training_phase
from .privacy import (PrivacyBudget, calibrate_sigma, error_bound, privatize_counts,
                      privatize_embedding, reweight_embedding)

__version__ = "0.1.0"
