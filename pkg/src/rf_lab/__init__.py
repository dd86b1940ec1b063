"""rf-lab: random-feature representation, training, and hardness experiments."""

__version__ = "0.1.0"
