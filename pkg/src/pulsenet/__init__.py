"""Complex-valued 1D ResNets for radar pulse classification on raw I/Q data."""

__version__ = "0.1.0"
