"""
Small recurrent networks with hand-written reverse mode.

Architecture: dense tanh layers, an optional gated recurrent unit, and a
linear head (softmax policy, scalar value or per-action values). Inputs are
time-major tensors (T, B, d). Parameters live in one flat float64 vector with
named views per layer.

GRU step:
    z  = sigmoid(x Wz + h Uz + bz)
    r  = sigmoid(x Wr + h Ur + br)
    n  = tanh(x Wn + (r * h) Un + bn)
    h' = (1 - z) * n + z * h
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from spectrum.exceptions import ContractViolation, NonFiniteLossError

logger = logging.getLogger(__name__)


class HeadKind(str, Enum):
    """Output head of a network."""
    SOFTMAX = "softmax"
    SCALAR = "scalar"
    QVECTOR = "qvector"


@dataclass(frozen=True)
class NetSpec:
    """Shape of a network."""
    input_dim: int
    hidden_dims: Tuple[int, ...] = (64, 64)
    recurrent_width: int = 32  # 0 disables the recurrent cell
    head: HeadKind = HeadKind.SOFTMAX
    n_actions: int = 8

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        object.__setattr__(self, "head", HeadKind(self.head))
        if self.input_dim < 1 or any(d < 1 for d in self.hidden_dims):
            raise ContractViolation(f"All layer widths must be >= 1: {self}")
        if self.recurrent_width < 0 or self.n_actions < 1:
            raise ContractViolation(f"Invalid recurrent width or action count: {self}")

    @property
    def recurrent(self) -> bool:
        return self.recurrent_width > 0

    @property
    def output_dim(self) -> int:
        return 1 if self.head == HeadKind.SCALAR else self.n_actions

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["hidden_dims"] = list(self.hidden_dims)
        data["head"] = self.head.value
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetSpec":
        return cls(
            input_dim=int(data["input_dim"]),
            hidden_dims=tuple(data["hidden_dims"]),
            recurrent_width=int(data["recurrent_width"]),
            head=HeadKind(data["head"]),
            n_actions=int(data["n_actions"]),
        )


@dataclass
class ForwardCache:
    """Intermediate activations kept for the backward pass."""
    acts: List[np.ndarray]  # acts[0] = inputs, acts[l+1] = dense layer l output
    hs: Optional[np.ndarray] = None  # (T+1, B, H), hs[0] = initial hidden
    zs: Optional[np.ndarray] = None
    rs: Optional[np.ndarray] = None
    ns: Optional[np.ndarray] = None


@dataclass
class ForwardResult:
    """Network outputs for a (T, B, d) input."""
    raw: np.ndarray  # (T, B, out) logits or values
    outputs: np.ndarray  # probabilities for softmax heads, raw otherwise
    hidden: np.ndarray  # (B, H) final recurrent state
    cache: Optional[ForwardCache] = field(default=None, repr=False)

    @property
    def values(self) -> np.ndarray:
        """(T, B) view of a scalar head."""
        return self.raw[..., 0]


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. logits given the gradient w.r.t. probabilities."""
    return probs * (d_probs - np.sum(d_probs * probs, axis=-1, keepdims=True))


class Network:
    """A NetSpec bound to a flat parameter layout."""

    def __init__(self, spec: NetSpec, name: str = "net"):
        self.spec = spec
        self.name = name
        self._layout: Dict[str, Tuple[int, Tuple[int, ...]]] = {}
        offset = 0

        def add(key: str, shape: Tuple[int, ...]):
            nonlocal offset
            self._layout[key] = (offset, shape)
            offset += int(np.prod(shape))

        width = spec.input_dim
        for index, dim in enumerate(spec.hidden_dims):
            add(f"dense{index}.W", (width, dim))
            add(f"dense{index}.b", (dim,))
            width = dim
        if spec.recurrent:
            h = spec.recurrent_width
            add("gru.W", (width, 3 * h))
            add("gru.U", (h, 3 * h))
            add("gru.b", (3 * h,))
            width = h
        add("head.W", (width, spec.output_dim))
        add("head.b", (spec.output_dim,))
        self.size = offset

    @property
    def layer_names(self) -> List[str]:
        return list(self._layout)

    def views(self, params: np.ndarray) -> Dict[str, np.ndarray]:
        """Named reshaped views into a flat parameter vector."""
        if params.shape != (self.size,):
            raise ContractViolation(f"{self.name}: expected {self.size} parameters, got {params.shape}")
        return {
            key: params[offset: offset + int(np.prod(shape))].reshape(shape)
            for key, (offset, shape) in self._layout.items()
        }

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform fan-in initialization, zero biases."""
        params = np.zeros(self.size)
        views = self.views(params)
        for key, view in views.items():
            if key.endswith(".b"):
                continue
            bound = 1.0 / np.sqrt(view.shape[0])
            if key == "head.W":
                bound *= 0.1
            view[...] = rng.uniform(-bound, bound, size=view.shape)
        return params

    def initial_hidden(self, batch: int) -> np.ndarray:
        return np.zeros((batch, self.spec.recurrent_width))

    def forward(
        self,
        params: np.ndarray,
        inputs: np.ndarray,
        hidden: Optional[np.ndarray] = None,
        keep_cache: bool = False,
    ) -> ForwardResult:
        """
        Run the network over a (T, B, d) input.

        Args:
            params: Flat parameter vector
            inputs: Time-major input tensor
            hidden: (B, H) initial recurrent state, zeros if None
            keep_cache: Keep activations for `backward`

        Returns:
            ForwardResult

        Raises:
            ContractViolation: input or hidden shape mismatch
        """
        spec = self.spec
        x = np.asarray(inputs, dtype=float)
        if x.ndim != 3 or x.shape[2] != spec.input_dim:
            raise ContractViolation(
                f"{self.name}: expected input (T, B, {spec.input_dim}), got {x.shape}"
            )
        steps, batch, _ = x.shape
        p = self.views(params)
        width = spec.recurrent_width

        h = self.initial_hidden(batch) if hidden is None else np.array(hidden, dtype=float)
        if h.shape != (batch, width):
            raise ContractViolation(f"{self.name}: hidden must be ({batch}, {width}), got {h.shape}")

        acts = [x] + [np.empty((steps, batch, d)) for d in spec.hidden_dims]
        hs = zs = rs = ns = None
        if spec.recurrent:
            hs = np.empty((steps + 1, batch, width))
            hs[0] = h
            zs, rs, ns = (np.empty((steps, batch, width)) for _ in range(3))
            u_zr = p["gru.U"][:, : 2 * width]
            u_n = p["gru.U"][:, 2 * width:]
        raw = np.empty((steps, batch, spec.output_dim))

        for t in range(steps):
            a = x[t]
            for index in range(len(spec.hidden_dims)):
                a = np.tanh(a @ p[f"dense{index}.W"] + p[f"dense{index}.b"])
                acts[index + 1][t] = a
            if spec.recurrent:
                gx = a @ p["gru.W"] + p["gru.b"]
                gh = h @ u_zr
                z = sigmoid(gx[:, :width] + gh[:, :width])
                r = sigmoid(gx[:, width: 2 * width] + gh[:, width:])
                n = np.tanh(gx[:, 2 * width:] + (r * h) @ u_n)
                h = (1.0 - z) * n + z * h
                zs[t], rs[t], ns[t], hs[t + 1] = z, r, n, h
                a = h
            raw[t] = a @ p["head.W"] + p["head.b"]

        outputs = softmax(raw) if spec.head == HeadKind.SOFTMAX else raw
        cache = ForwardCache(acts, hs, zs, rs, ns) if keep_cache else None
        return ForwardResult(raw, outputs, h, cache)

    def backward(self, params: np.ndarray, cache: ForwardCache, d_raw: np.ndarray) -> np.ndarray:
        """
        Reverse-mode gradient of a loss w.r.t. the parameters.

        Args:
            params: Parameters used in the forward pass
            cache: ForwardCache of that pass
            d_raw: dLoss/d(raw outputs), shape (T, B, out)

        Returns:
            Flat gradient vector (the initial hidden state is treated as a constant)
        """
        if cache is None:
            raise ContractViolation("backward needs a forward pass run with keep_cache=True")
        spec = self.spec
        p = self.views(params)
        grad = np.zeros(self.size)
        g = self.views(grad)
        acts = cache.acts
        steps, batch = d_raw.shape[:2]
        width = spec.recurrent_width

        features = cache.hs[1:] if spec.recurrent else acts[-1]
        g["head.W"] += np.einsum("tbf,tbo->fo", features, d_raw)
        g["head.b"] += d_raw.sum(axis=(0, 1))
        d_features = d_raw @ p["head.W"].T

        if spec.recurrent:
            w = p["gru.W"]
            u_zr = p["gru.U"][:, : 2 * width]
            u_n = p["gru.U"][:, 2 * width:]
            d_top = np.empty((steps, batch, w.shape[0]))
            dh = np.zeros((batch, width))
            for t in range(steps - 1, -1, -1):
                dh = dh + d_features[t]
                h_prev, z, r, n = cache.hs[t], cache.zs[t], cache.rs[t], cache.ns[t]

                dn_pre = dh * (1.0 - z) * (1.0 - n * n)
                dz_pre = dh * (h_prev - n) * z * (1.0 - z)
                d_rh = dn_pre @ u_n.T
                dr_pre = d_rh * h_prev * r * (1.0 - r)
                d_zr = np.concatenate([dz_pre, dr_pre], axis=1)
                d_gates = np.concatenate([d_zr, dn_pre], axis=1)

                g["gru.W"] += acts[-1][t].T @ d_gates
                g["gru.b"] += d_gates.sum(axis=0)
                g["gru.U"][:, : 2 * width] += h_prev.T @ d_zr
                g["gru.U"][:, 2 * width:] += (r * h_prev).T @ dn_pre

                d_top[t] = d_gates @ w.T
                dh = dh * z + d_rh * r + d_zr @ u_zr.T
        else:
            d_top = d_features

        for index in range(len(spec.hidden_dims) - 1, -1, -1):
            a_out, a_in = acts[index + 1], acts[index]
            d_pre = d_top * (1.0 - a_out * a_out)
            g[f"dense{index}.W"] += np.einsum("tbi,tbo->io", a_in, d_pre)
            g[f"dense{index}.b"] += d_pre.sum(axis=(0, 1))
            d_top = d_pre @ p[f"dense{index}.W"].T

        return grad


LossFn = Callable[[ForwardResult], Tuple[float, np.ndarray]]


def gradients(
    network: Network,
    params: np.ndarray,
    inputs: np.ndarray,
    loss_fn: LossFn,
    hidden: Optional[np.ndarray] = None,
    l2: float = 0.0,
) -> Tuple[float, np.ndarray]:
    """
    Loss and gradient of a batch loss.

    `loss_fn` maps the ForwardResult to (loss, dLoss/d raw). An optional L2 term
    0.5 * l2 * ||params||^2 is added to both.

    Raises:
        NonFiniteLossError: the loss is NaN or infinite
    """
    result = network.forward(params, inputs, hidden, keep_cache=True)
    loss, d_raw = loss_fn(result)
    loss = float(loss) + 0.5 * l2 * float(params @ params)
    if not np.isfinite(loss):
        diagnostics = {
            "network": network.name,
            "loss": loss,
            "param_norm": float(np.linalg.norm(params)),
        }
        logger.error(f"Non-finite loss in {network.name}: {diagnostics}")
        raise NonFiniteLossError("Non-finite training loss", diagnostics)
    grad = network.backward(params, result.cache, np.asarray(d_raw, dtype=float))
    if l2:
        grad = grad + l2 * params
    return loss, grad


@dataclass
class GradientCheck:
    """Outcome of a finite-difference comparison."""
    indices: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    passed: np.ndarray

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.passed))


def check_gradients(
    network: Network,
    params: np.ndarray,
    inputs: np.ndarray,
    loss_fn: LossFn,
    rng: np.random.Generator,
    hidden: Optional[np.ndarray] = None,
    n_coords: int = 200,
    step: float = 1e-5,
    rtol: float = 1e-4,
    atol: float = 1e-8,
) -> GradientCheck:
    """
    Compare the analytic gradient with central differences on random coordinates.

    A coordinate passes when |a - n| <= rtol * max(|a|, |n|) or |a - n| <= atol.
    """
    _, analytic = gradients(network, params, inputs, loss_fn, hidden)
    count = min(n_coords, network.size)
    indices = np.sort(rng.choice(network.size, size=count, replace=False))
    numeric = np.empty(count)
    for k, index in enumerate(indices):
        shifted = params.copy()
        shifted[index] += step
        plus, _ = loss_fn(network.forward(shifted, inputs, hidden, keep_cache=False))
        shifted[index] -= 2.0 * step
        minus, _ = loss_fn(network.forward(shifted, inputs, hidden, keep_cache=False))
        numeric[k] = (plus - minus) / (2.0 * step)

    a = analytic[indices]
    diff = np.abs(a - numeric)
    passed = (diff <= rtol * np.maximum(np.abs(a), np.abs(numeric))) | (diff <= atol)
    return GradientCheck(indices, a, numeric, passed)
