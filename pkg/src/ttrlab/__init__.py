"""Tabletop reversibility of Petz recovery maps for dilated quantum channels."""

__version__ = "0.1.0"

from .policy import DEFAULT_POLICY, NumericPolicy

__all__ = ["DEFAULT_POLICY", "NumericPolicy", "__version__"]
