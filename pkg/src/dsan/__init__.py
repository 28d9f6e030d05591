"""Symmetric adaptation network for unsupervised cross-modality segmentation."""

__version__ = "0.1.0"
