"""Adadelta updates in the accumulated-gradient / accumulated-delta form."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError
from .tensor import Tensor

DEFAULT_RHO = 0.9
DEFAULT_EPS = 1e-6


@dataclass
class AdadeltaState:
    """Per-parameter running averages of squared gradients and deltas."""

    avg_sq_grad: np.ndarray
    avg_sq_delta: np.ndarray
    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS

    @classmethod
    def fresh(cls, shape, rho: float = DEFAULT_RHO,
              eps: float = DEFAULT_EPS) -> "AdadeltaState":
        if not 0.0 < rho < 1.0:
            raise ShapeError(f"rho must be in (0,1): {rho}")
        if eps <= 0.0:
            raise ShapeError(f"eps must be positive: {eps}")
        return cls(np.zeros(shape), np.zeros(shape), rho, eps)


def adadelta_step(param: Tensor, grad: np.ndarray, state: AdadeltaState,
                  name: str = "<param>") -> None:
    """Update `param` in place:

        Eg2  <- rho*Eg2 + (1-rho)*g^2
        dx   <- -sqrt(Edx2 + eps)/sqrt(Eg2 + eps) * g
        Edx2 <- rho*Edx2 + (1-rho)*dx^2
        p    <- p + dx
    """
    if grad.shape != param.data.shape:
        raise ShapeError(
            f"gradient shape {grad.shape} != parameter {param.data.shape}"
            f" for {name}"
        )
    if state.avg_sq_grad.shape != param.data.shape:
        raise ShapeError(f"optimizer state shape mismatch for {name}")
    if not np.isfinite(grad).all():
        raise NumericError(f"non-finite gradient for parameter {name}")
    rho, eps = state.rho, state.eps
    state.avg_sq_grad *= rho
    state.avg_sq_grad += (1.0 - rho) * grad * grad
    delta = -np.sqrt(state.avg_sq_delta + eps) / np.sqrt(
        state.avg_sq_grad + eps) * grad
    state.avg_sq_delta *= rho
    state.avg_sq_delta += (1.0 - rho) * delta * delta
    param.data += delta
