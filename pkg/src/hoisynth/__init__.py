"""Synthesis, augmentation and scoring of humanoid-object interaction clips."""

__version__ = "0.1.0"
