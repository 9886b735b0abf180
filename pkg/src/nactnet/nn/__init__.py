"""Networks, losses, optimisation, training and certification."""

from .build import NActInit, abs_identity_twin, build_mlp, init_nact
from .certify import CERT_EPSILONS, CertReport, certified_radius, certify
from .losses import mse_loss, offset_ce_loss
from .network import (
    Activation,
    Dense,
    Network,
    StaleTapeError,
    Tape,
    network_lipschitz_audit,
)
from .optim import default_learning_rate, schedule_lr, sgd_step
from .training import GradCheckResult, History, TrainConfig, TrainingDiverged, grad_check, train

__all__ = [
    "Activation", "CERT_EPSILONS", "CertReport", "Dense", "GradCheckResult", "History",
    "NActInit", "Network", "StaleTapeError", "Tape", "TrainConfig", "TrainingDiverged",
    "abs_identity_twin", "build_mlp", "certified_radius", "certify", "default_learning_rate",
    "grad_check", "init_nact", "mse_loss", "network_lipschitz_audit", "offset_ce_loss",
    "schedule_lr", "sgd_step", "train",
]
