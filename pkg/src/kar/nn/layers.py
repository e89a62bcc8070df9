from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor, affine, embedding_lookup, relu, sigmoid, tanh

ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh}


def xavier_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Parameter container; parameters are discovered by walking attributes."""

    training = True

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{full}.{i}", item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state, strict=True):
        params = dict(self.named_parameters())
        if strict:
            missing = set(params) - set(state)
            extra = set(state) - set(params)
            if missing or extra:
                raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, arr in state.items():
            if name not in params:
                continue
            p = params[name]
            if p.data.shape != arr.shape:
                raise ShapeError(f"{name}: checkpoint shape {arr.shape} != parameter shape {p.data.shape}")
            p.data = np.array(arr, dtype=np.float64, copy=True)

    def num_parameters(self):
        return sum(p.data.size for p in self.parameters())

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_dim, out_dim, rng, bias=True):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.W = Tensor(xavier_uniform(rng, in_dim, out_dim), requires_grad=True)
        self.b = Tensor(np.zeros(out_dim), requires_grad=True) if bias else None

    def forward(self, x):
        return affine(x, self.W, self.b)


class MLP(Module):
    """Stack of Linear layers; ``activation`` between layers, none after the last
    unless ``final_activation`` is set."""

    def __init__(self, sizes, rng, activation="relu", final_activation=None):
        if len(sizes) < 2:
            raise ValueError("MLP needs at least input and output sizes")
        self.sizes = list(sizes)
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self.activation = activation
        self.final_activation = final_activation

    def forward(self, x):
        act = ACTIVATIONS[self.activation]
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = act(x)
            elif self.final_activation:
                x = ACTIVATIONS[self.final_activation](x)
        return x


class Embedding(Module):
    def __init__(self, num, dim, rng, std=0.05):
        self.num, self.dim = num, dim
        self.table = Tensor(rng.normal(0.0, std, size=(num, dim)), requires_grad=True)

    def forward(self, indices):
        return embedding_lookup(self.table, indices)
