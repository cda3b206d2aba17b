"""Sign-changing radial solutions of repulsive coupled cubic systems via parabolic flow."""

__version__ = "0.1.0"
