"""Python surface of the region-of-attraction toolkit.

Thin re-export of the compiled core: training, checkpoint IO, certificate
levels, boundary sampling, and the separability helpers.
"""

from ._core import (
    Model,
    generate_dataset,
    hull_distance,
    load_checkpoint,
    separability_bound,
    train_from_config,
)

__all__ = [
    "Model",
    "generate_dataset",
    "hull_distance",
    "load_checkpoint",
    "separability_bound",
    "train_from_config",
]
