"""Sound event detection workbench: CNMF pseudo labeling, dual Convolutional
Macaron Nets, and event-based evaluation."""

from sedw._core import (
    Cmn,
    bce,
    cnmf_fit,
    cnmf_reconstruct,
    compute_mel,
    event_based_f1,
    frames_to_events,
    kl_divergence,
    lambda_curr,
    lr_decay,
    lr_warmup,
    median_smooth,
    mish,
    mixup,
    ramp_weight,
    shift_columns,
    temporal_max_pool,
)

__all__ = [
    "Cmn",
    "bce",
    "cnmf_fit",
    "cnmf_reconstruct",
    "compute_mel",
    "event_based_f1",
    "frames_to_events",
    "kl_divergence",
    "lambda_curr",
    "lr_decay",
    "lr_warmup",
    "median_smooth",
    "mish",
    "mixup",
    "ramp_weight",
    "shift_columns",
    "temporal_max_pool",
]
