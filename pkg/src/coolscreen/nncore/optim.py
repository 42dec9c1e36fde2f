"""Adam and AdamW with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeMismatch


@dataclass
class OptimizerState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def _init(state, params):
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    if len(state.m) != len(params):
        raise ShapeMismatch("parameter list changed between steps")


def adam_step(state, params, grads, decoupled=False):
    _init(state, params)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.value.shape or m.shape != p.value.shape:
            raise ShapeMismatch(f"gradient {g.shape} vs parameter {p.value.shape}")
        if state.weight_decay:
            if decoupled:
                p.value = p.value - state.lr * state.weight_decay * p.value
            else:
                g = g + state.weight_decay * p.value
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.value = p.value - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def adamw_step(state, params, grads):
    adam_step(state, params, grads, decoupled=True)


class Adam:
    decoupled = False

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.state = OptimizerState(lr, betas[0], betas[1], eps, weight_decay)

    def step(self):
        grads = [p.grad if p.grad is not None else np.zeros_like(p.value) for p in self.params]
        adam_step(self.state, self.params, grads, decoupled=self.decoupled)
        for p in self.params:
            p.grad = None


class AdamW(Adam):
    decoupled = True

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01):
        super().__init__(params, lr, betas, eps, weight_decay)
