"""Membership and attribute inference workbench.

Adversaries, closed-form advantage curves, reductions between the two
attack types and a Monte Carlo harness that checks one against the other.
"""

__version__ = "0.1.0"

from .analytic import (
    bound_dp_advantage,
    curve_attribute_binary,
    curve_attribute_general,
    curve_membership_bounded,
    curve_membership_threshold,
    expected_colluding_advantage,
)
from .attribute import BOTTOM, AttributeSchema, adv_general_attribute, decision_regions, simulator_optimal
from .core import (
    ClassificationChannel,
    DataPoint,
    Dataset,
    FiniteClassification,
    GaussianLinear,
    LossSpec,
    RegressionChannel,
    derive_stream,
    draw_challenge,
    erf,
    loss_eval,
)
from .harness import (
    AdvantageEstimate,
    ExperimentConfig,
    audit_dp_bound,
    estimate_mu,
    run_attribute_experiment,
    run_collusion,
    run_membership_experiment,
    run_paired_reduction,
    sweep,
)
from .membership import adv_bounded_loss, adv_colluding, adv_threshold
from .models import estimate_generalization, train_colluding, train_dp_finite, train_ridge, train_tree
from .reductions import red_attribute_multiquery, red_attribute_uniform, red_membership_from_attribute

__all__ = [
    "adv_bounded_loss",
    "adv_colluding",
    "adv_general_attribute",
    "adv_threshold",
    "AdvantageEstimate",
    "AttributeSchema",
    "audit_dp_bound",
    "BOTTOM",
    "bound_dp_advantage",
    "ClassificationChannel",
    "curve_attribute_binary",
    "curve_attribute_general",
    "curve_membership_bounded",
    "curve_membership_threshold",
    "DataPoint",
    "Dataset",
    "decision_regions",
    "derive_stream",
    "draw_challenge",
    "erf",
    "estimate_generalization",
    "estimate_mu",
    "expected_colluding_advantage",
    "ExperimentConfig",
    "FiniteClassification",
    "GaussianLinear",
    "loss_eval",
    "LossSpec",
    "red_attribute_multiquery",
    "red_attribute_uniform",
    "red_membership_from_attribute",
    "RegressionChannel",
    "run_attribute_experiment",
    "run_collusion",
    "run_membership_experiment",
    "run_paired_reduction",
    "simulator_optimal",
    "sweep",
    "train_colluding",
    "train_dp_finite",
    "train_ridge",
    "train_tree",
]
