"""Linear and classical (nonlinear) Schrödinger evolution side by side, with probes that tell them apart."""

__version__ = "0.1.0"
