"""Adam with bias correction and global-norm gradient clipping."""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from spectrum.exceptions import ContractViolation


def clip_by_global_norm(grads: np.ndarray, max_norm: Optional[float]) -> Tuple[np.ndarray, float]:
    """Scale gradients down so their L2 norm is at most max_norm (None disables)."""
    norm = float(np.linalg.norm(grads))
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return grads, norm
    return grads * (max_norm / norm), norm


class Adam:
    """Adaptive-moment optimizer over one flat parameter vector."""

    def __init__(self, size: int, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray, learning_rate: float) -> np.ndarray:
        """
        One update; returns new parameters and leaves `params` untouched.

        Raises:
            ContractViolation: shapes differ from the optimizer state
        """
        if params.shape != self.m.shape or grads.shape != self.m.shape:
            raise ContractViolation(
                f"Adam state has shape {self.m.shape}, got params {params.shape} / grads {grads.shape}"
            )
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "t": self.t,
            "m": self.m.tolist(),
            "v": self.v.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Adam":
        m = np.asarray(data["m"], dtype=float)
        opt = cls(m.size, data["beta1"], data["beta2"], data["eps"])
        opt.m = m
        opt.v = np.asarray(data["v"], dtype=float)
        opt.t = int(data["t"])
        return opt
