"""Random-current representation of the transverse-field Ising model: sampler, graph tools and checks."""

from .model import Model, make_model
from .oracle import ExactOracle
from .sampler import McEngine

__all__ = ["ExactOracle", "McEngine", "Model", "make_model"]
__version__ = "0.1.0"
