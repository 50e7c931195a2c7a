"""Gridless full-space DOA estimation for STAR-RIS-assisted uplinks."""

from . import baselines, bounds, experiments, fri_nonuniform, fri_uniform, star_ris_model, structured_linalg

__all__ = [
    "baselines", "bounds", "experiments",
    "fri_nonuniform", "fri_uniform", "star_ris_model", "structured_linalg",
]
