"""Fully connected networks used for value functions (V-nets) and policies
(alpha-nets), with reverse-mode gradients for inputs and parameters.

Everything runs in float64 on CPU.  Networks take a standardized input
``(t / T, x)`` of dimension 3N + 1; V-nets emit one unbounded value, alpha
-nets emit two logistic-squashed components in (0, 1).
"""

from __future__ import annotations

import numpy as np
import torch

CHECKPOINT_VERSION = 1

torch.set_default_dtype(torch.float64)


class Mlp(torch.nn.Module):
    """Plain MLP with tanh hidden layers.

    output: "identity" for V-nets, "sigmoid" for alpha-nets.
    """

    def __init__(self, layer_dims, output: str = "identity",
                 seed: int | None = None):
        super().__init__()
        if len(layer_dims) < 2:
            raise ValueError("need at least input and output dimensions")
        if output not in ("identity", "sigmoid"):
            raise ValueError(f"unknown output activation {output!r}")
        self.layer_dims = list(int(d) for d in layer_dims)
        self.output = output
        gen = torch.Generator()
        if seed is not None:
            gen.manual_seed(int(seed))
        layers = []
        for d_in, d_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            lin = torch.nn.Linear(d_in, d_out, dtype=torch.float64)
            bound = 1.0 / np.sqrt(d_in)  # scaled uniform fan-in init
            with torch.no_grad():
                lin.weight.uniform_(-bound, bound, generator=gen)
                lin.bias.uniform_(-bound, bound, generator=gen)
            layers.append(lin)
        self.layers = torch.nn.ModuleList(layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for lin in self.layers[:-1]:
            h = torch.tanh(lin(h))
        h = self.layers[-1](h)
        if self.output == "sigmoid":
            h = torch.sigmoid(h)
        return h

    def shift_output_bias(self, shift: float) -> None:
        """Add a constant to the final pre-activation; used to start
        alpha-nets near zero output."""
        with torch.no_grad():
            self.layers[-1].bias += shift

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Numpy convenience wrapper (no gradients)."""
        with torch.no_grad():
            out = self(torch.as_tensor(np.asarray(x, dtype=float)))
        return out.numpy()


def input_gradient(net: Mlp, x: torch.Tensor) -> torch.Tensor:
    """Jacobian of the network outputs w.r.t. a single input vector.

    Returns shape (out_dim, in_dim).
    """
    x = x.detach().requires_grad_(True)
    y = net(x)
    rows = []
    for j in range(y.shape[-1]):
        grad, = torch.autograd.grad(y[..., j], x, retain_graph=True)
        rows.append(grad)
    return torch.stack(rows)


def batch_value_and_grad(net: Mlp, inp: torch.Tensor, create_graph: bool = True):
    """Scalar-output network value and input gradient over a batch.

    inp: (B, d).  Returns (values (B,), gradients (B, d)); the gradient
    graph is retained so downstream losses can backpropagate into the
    network parameters.
    """
    leaf = inp.detach().requires_grad_(True)
    val = net(leaf).squeeze(-1)
    grad, = torch.autograd.grad(val.sum(), leaf, create_graph=create_graph)
    return val, grad


def flatten_params(net: Mlp) -> np.ndarray:
    with torch.no_grad():
        return torch.cat([p.reshape(-1) for p in net.parameters()]).numpy().copy()


def set_flat_params(net: Mlp, flat: np.ndarray) -> None:
    flat = np.asarray(flat, dtype=float)
    total = sum(p.numel() for p in net.parameters())
    if flat.size != total:
        raise ValueError(f"parameter vector length mismatch: {flat.size} vs {total}")
    offset = 0
    with torch.no_grad():
        for p in net.parameters():
            size = p.numel()
            p.copy_(torch.as_tensor(flat[offset:offset + size]).reshape(p.shape))
            offset += size


def save_mlp(net: Mlp, path) -> None:
    """Portable checkpoint: shape header + flat float64 parameter array."""
    np.savez(path,
             version=np.int64(CHECKPOINT_VERSION),
             layer_dims=np.asarray(net.layer_dims, dtype=np.int64),
             output=np.bytes_(net.output.encode()),
             params=flatten_params(net))


def load_mlp(path) -> Mlp:
    try:
        data = np.load(path)
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        dims = data["layer_dims"].tolist()
        output = bytes(data["output"]).decode()
        flat = data["params"]
    except (KeyError, ValueError, OSError) as exc:
        raise CheckpointError(f"corrupt or incompatible network file {path}: {exc}") from exc
    net = Mlp(dims, output=output)
    set_flat_params(net, flat)
    return net


class CheckpointError(RuntimeError):
    """Raised when a stored network or stage checkpoint cannot be read."""


def make_optimizer(nets, learning_rate: float = 3e-4) -> torch.optim.Adam:
    """Adaptive-moment optimizer over one or more networks."""
    params = []
    for net in nets:
        params += list(net.parameters())
    return torch.optim.Adam(params, lr=learning_rate)
