"""Two-stage eye-region detection and strabismus screening on synthetic images."""

__version__ = "0.1.0"
