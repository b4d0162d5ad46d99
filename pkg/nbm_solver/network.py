"""Surrogate networks for the two sides of the interface."""

from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from .errors import FileFormatError

ACTIVATIONS = ("sine", "celu", "tanh")


class Mlp(nn.Module):
    """
    Fully connected network from 3D points to scalars with a linear output layer.

    Parameters
    ----------
    layer_sizes : sequence of int
        Widths including the input (3) and the output (1).
    activation : str
        One of ``sine``, ``celu`` or ``tanh``.
    seed : int
        Seed of the truncated-normal initialisation.
    omega0 : float
        Frequency factor inside sine activations.
    """

    def __init__(self, layer_sizes: Sequence[int], activation: str = "sine", seed: int = 0, omega0: float = 1.0):
        super().__init__()
        layer_sizes = tuple(int(n) for n in layer_sizes)
        if len(layer_sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if layer_sizes[0] != 3 or layer_sizes[-1] != 1:
            raise ValueError(f"layer sizes must start at 3 and end at 1, got {layer_sizes}")
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.layer_sizes = layer_sizes
        self.activation = activation
        self.seed = int(seed)
        self.omega0 = float(omega0)
        self.layers = nn.ModuleList(
            nn.Linear(fan_in, fan_out, dtype=torch.float64)
            for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:])
        )
        self.reset_parameters()

    def reset_parameters(self):
        """Draw every weight and bias from N(0, 1) truncated at +/-2."""
        generator = torch.Generator().manual_seed(self.seed)
        with torch.no_grad():
            for p in self.parameters():
                nn.init.trunc_normal_(p, mean=0.0, std=1.0, a=-2.0, b=2.0, generator=generator)

    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def _activate(self, z):
        if self.activation == "sine":
            return torch.sin(self.omega0 * z)
        if self.activation == "celu":
            return F.celu(z)
        return torch.tanh(z)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        for layer in self.layers[:-1]:
            x = self._activate(layer(x))
        return self.layers[-1](x).squeeze(-1)

    def flat_parameters(self) -> torch.Tensor:
        return parameters_to_vector(self.parameters()).detach()

    def load_flat_parameters(self, flat: torch.Tensor):
        vector_to_parameters(torch.as_tensor(flat, dtype=torch.float64), self.parameters())

    def vjp_params(self, x, cotangent) -> torch.Tensor:
        """Flat gradient of ``sum(cotangent * forward(x))`` with respect to the parameters."""
        x = torch.as_tensor(x, dtype=torch.float64)
        output = self(x)
        cotangent = torch.as_tensor(cotangent, dtype=torch.float64).expand_as(output)
        grads = torch.autograd.grad(output, list(self.parameters()), grad_outputs=cotangent, allow_unused=True)
        return torch.cat([
            (torch.zeros_like(p) if g is None else g).reshape(-1)
            for p, g in zip(self.parameters(), grads)
        ])

    def directional_derivative(self, x, direction, create_graph: bool = False) -> torch.Tensor:
        """
        Derivative of the output at ``x`` along ``direction`` by a forward-mode
        Jacobian-vector product.

        With ``create_graph`` the result stays differentiable with respect to
        the parameters.
        """
        x = torch.as_tensor(x, dtype=torch.float64).detach()
        direction = torch.broadcast_to(torch.as_tensor(direction, dtype=torch.float64), x.shape).clone()
        _, tangent = torch.func.jvp(self, (x,), (direction,))
        return tangent if create_graph else tangent.detach()

    def gradient_and_laplacian(self, x):
        """Input gradient and Laplacian by forward-over-forward products, both differentiable in the parameters."""
        x = torch.as_tensor(x, dtype=torch.float64).detach()
        output = self(x)
        columns = []
        laplacian = torch.zeros_like(output)
        for axis in range(3):
            unit = torch.zeros_like(x)
            unit[..., axis] = 1.0

            def along(y, unit=unit):
                return torch.func.jvp(self, (y,), (unit,))[1]

            first, second = torch.func.jvp(along, (x,), (unit,))
            columns.append(first)
            laplacian = laplacian + second
        return output, torch.stack(columns, dim=-1), laplacian


def init_network(layer_sizes, activation="sine", seed=0, omega0=1.0) -> Mlp:
    return Mlp(layer_sizes, activation, seed, omega0)


class SurrogatePair(nn.Module):
    """The minus-side and plus-side networks."""

    def __init__(self, net_minus: Mlp, net_plus: Mlp):
        super().__init__()
        self.net_minus = net_minus
        self.net_plus = net_plus

    def network(self, side: str) -> Mlp:
        if side == "minus":
            return self.net_minus
        if side == "plus":
            return self.net_plus
        raise ValueError(f"unknown side {side!r}")

    def predict(self, x, phi_values) -> np.ndarray:
        """Piecewise solution: the minus network where phi <= 0, the plus network elsewhere."""
        x = torch.as_tensor(np.asarray(x, dtype=np.float64))
        with torch.no_grad():
            minus = self.net_minus(x).numpy()
            plus = self.net_plus(x).numpy()
        return np.where(np.asarray(phi_values) <= 0, minus, plus)


def _header(net: Mlp) -> str:
    sizes = ",".join(str(n) for n in net.layer_sizes)
    return f"{sizes} {net.activation} {net.seed} {net.omega0!r}\n"


def save_checkpoint(path, pair: SurrogatePair) -> None:
    """
    Write both networks to ``path``.

    Two text header lines ``layer_sizes activation seed omega0`` (minus then
    plus) are followed by the little-endian float64 parameters of the minus
    network and then the plus network.
    """
    with open(path, "wb") as f:
        f.write(_header(pair.net_minus).encode("ascii"))
        f.write(_header(pair.net_plus).encode("ascii"))
        for net in (pair.net_minus, pair.net_plus):
            f.write(net.flat_parameters().numpy().astype("<f8").tobytes())


def _parse_header(line: bytes, offset: int, path) -> Mlp:
    try:
        fields = line.decode("ascii").split()
        if len(fields) not in (3, 4):
            raise ValueError(f"expected 3 or 4 header fields, got {len(fields)}")
        sizes = [int(n) for n in fields[0].split(",")]
        omega0 = float(fields[3]) if len(fields) == 4 else 1.0
        return Mlp(sizes, fields[1], int(fields[2]), omega0)
    except (UnicodeDecodeError, ValueError) as e:
        raise FileFormatError(f"bad network header: {e}", offset, path) from e


def load_checkpoint(path) -> SurrogatePair:
    """
    Read a pair written by :func:`save_checkpoint`.

    Raises
    ------
    FileFormatError
        If a header is malformed or the parameter payload has the wrong size.
    """
    path = Path(path)
    with open(path, "rb") as f:
        payload = f.read()

    nets = []
    offset = 0
    for _ in range(2):
        end = payload.find(b"\n", offset)
        if end < 0:
            raise FileFormatError("missing network header line", offset, path)
        nets.append(_parse_header(payload[offset:end], offset, path))
        offset = end + 1

    for net in nets:
        size = 8 * net.n_params
        chunk = payload[offset:offset + size]
        if len(chunk) != size:
            raise FileFormatError(
                f"expected {size} parameter bytes, found {len(chunk)}", offset + len(chunk), path
            )
        flat = np.frombuffer(chunk, dtype="<f8").astype(np.float64)
        if not np.all(np.isfinite(flat)):
            bad = int(np.flatnonzero(~np.isfinite(flat))[0])
            raise FileFormatError("non-finite parameter value", offset + 8 * bad, path)
        net.load_flat_parameters(torch.from_numpy(flat.copy()))
        offset += size

    if offset != len(payload):
        raise FileFormatError(f"{len(payload) - offset} trailing bytes", offset, path)
    return SurrogatePair(nets[0], nets[1])
