"""Phase-noise-aware LTE downlink MIMO-OFDM link simulator."""

__version__ = "0.1.0"

from .config import SimConfig

__all__ = ["SimConfig", "__version__"]
