"""Compliant motion augmentation for humanoid reference clips.

Turns a reference motion clip into a dataset of kinematically feasible
compliant responses to sampled external wrenches, with the analysis and
RL-preparation utilities that consume such datasets.
"""

__version__ = "0.1.0"
