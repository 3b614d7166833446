"""Layer-adapted meshes and uniform-convergence checks for 1D singularly perturbed problems."""

__version__ = "0.1.0"
