"""Statevector simulation, variational classifiers and autoencoder purification with confidence rejection."""

from .attacks import AttackConfig, attack, fgsm, fgsm_sweep, pgd
from .checkpoint import load_model, save_model
from .defense import QAEPlusPlus, ThresholdSpec, Verdict, calibrate_threshold, confidence, qaepp_classify, score_outcomes
from .qae import QuantumAutoencoder, swap_test_fidelity, trash_fidelity
from .sim import Circuit, StateVector, amplitude_embed, backward_grads, run
from .train import AdamState, TrainConfig, adam_step
from .vqc import VQCClassifier

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AttackConfig",
    "Circuit",
    "QAEPlusPlus",
    "QuantumAutoencoder",
    "StateVector",
    "ThresholdSpec",
    "TrainConfig",
    "VQCClassifier",
    "Verdict",
    "adam_step",
    "amplitude_embed",
    "attack",
    "backward_grads",
    "calibrate_threshold",
    "confidence",
    "fgsm",
    "fgsm_sweep",
    "load_model",
    "pgd",
    "qaepp_classify",
    "run",
    "save_model",
    "score_outcomes",
    "swap_test_fidelity",
    "trash_fidelity",
]
