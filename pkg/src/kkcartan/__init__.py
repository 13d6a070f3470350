"""Cartan-frame curvature, Kaluza-Klein reduction and wave kernels for U(1)-symmetric gravity."""

import jax

# every derivative in the curvature pipeline is taken in double precision
jax.config.update("jax_enable_x64", True)

from .errors import ConvergenceError, DomainError, GeometryError, NonIntegrableError, QuadratureError  # noqa: E402

__version__ = "0.1.0"

__all__ = ["ConvergenceError", "DomainError", "GeometryError", "NonIntegrableError", "QuadratureError", "__version__"]
