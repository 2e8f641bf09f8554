"""Block-splitting ADMM for kernel machines on random Fourier features."""

from ._kadmm import (
    ConfigError,
    DimensionError,
    DivergenceError,
    Error,
    IoError,
    LabelError,
    Loss,
    Model,
    ModelFormatError,
    SolverConfig,
    Transform,
    graph_project,
    memory_estimate,
    objective,
    prox_absolute,
    prox_hinge,
    prox_loss,
    prox_squared,
    solve,
)

def train(x, y, *, features=1024, blocks=1, sigma=1.0, seed=0, loss="squared", classes=None, **options):
    """Builds a Gaussian transform and config, then solves. Returns (model, reports)."""
    transform = Transform(features, blocks, sigma, seed)
    config = SolverConfig(transform, getattr(Loss, loss), **options)
    return solve(config, x, y, classes)


__all__ = [name for name in dir() if not name.startswith("_")]
