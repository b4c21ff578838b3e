"""Evasion attacks on linear classifiers of software configurations."""

from .attack import (AttackParams, AttackResult, evasion_attack, is_successful, random_attack,
                     run_attack_pool)
from .campaign import (CampaignReport, GridSpec, SyntheticOracle, calibrate_oracle, oracle_label,
                       rq1_campaign, rq2_retrain, summarize)
from .classifier import (LinearSvm, TrainParams, accuracy, discriminant, gradient, predict,
                         top_features, train)
from .data import (Dataset, LabeledConfig, balance_with_centroids, dummify, load_csv, save_csv,
                   split_stratified, undummify)
from .errors import ConfevadeError
from .vm import (CrossConstraint, FeatureDef, ValidityReport, VariabilityModel, config_space_log10,
                 gen_motiv_like, repair_types, sample_random, validate)

__version__ = "0.1.0"
