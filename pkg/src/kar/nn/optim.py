from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on ``params`` (numpy arrays).

    Rejects the whole update if any gradient is non-finite.
    """
    bad = [i for i, g in enumerate(grads) if g is not None and not np.all(np.isfinite(g))]
    if bad:
        raise NumericError(f"non-finite gradient in parameter(s) {bad}; update rejected")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ValueError(f"optimizer state tracks {len(state.m)} params, got {len(params)}")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        if m.shape != p.shape:
            raise ValueError(f"optimizer state shape {m.shape} != param shape {p.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


class Adam:
    def __init__(self, named_params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        named_params = list(named_params)
        self.names = [n for n, _ in named_params]
        self.params = [p for _, p in named_params]
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        grads = [p.grad for p in self.params]
        try:
            adam_step([p.data for p in self.params], grads, self.state,
                      self.lr, self.beta1, self.beta2, self.eps)
        except NumericError as exc:
            bad = [self.names[i] for i, g in enumerate(grads)
                   if g is not None and not np.all(np.isfinite(g))]
            raise NumericError(f"{exc} -> {bad}") from None

    def state_dict(self):
        out = {"__step__": np.array([float(self.state.step)])}
        for name, m, v in zip(self.names, self.state.m, self.state.v):
            out[f"m.{name}"] = m.copy()
            out[f"v.{name}"] = v.copy()
        return out

    def load_state_dict(self, state):
        self.state.step = int(state["__step__"][0])
        if self.state.step:
            self.state.m = [np.array(state[f"m.{n}"], copy=True) for n in self.names]
            self.state.v = [np.array(state[f"v.{n}"], copy=True) for n in self.names]
