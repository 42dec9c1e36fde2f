"""Parameter containers and dense layers."""

import numpy as np

from .tensor import Tensor, affine, leaky_relu, parameter


def xavier_uniform(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Module:
    """Collects parameters from attributes in definition order."""

    def named_parameters(self, prefix=""):
        for key, val in self.__dict__.items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")
            elif isinstance(val, dict):
                for k in sorted(val):
                    if isinstance(val[k], Module):
                        yield from val[k].named_parameters(f"{name}.{k}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"missing tensors: {sorted(missing)}")
        for name, p in own.items():
            v = np.asarray(state[name], dtype=np.float64)
            if v.shape != p.value.shape:
                raise ValueError(f"{name}: shape {v.shape} != {p.value.shape}")
            p.value = v.copy()


class Linear(Module):
    def __init__(self, fan_in, fan_out, rng):
        self.W = parameter(xavier_uniform(rng, fan_in, fan_out))
        self.b = parameter(np.zeros((1, fan_out)))

    def __call__(self, x):
        return affine(x, self.W, self.b)

    def infer(self, x):
        return x @ self.W.value + self.b.value


class MLP(Module):
    """Affine layers with LeakyReLU between them (none after the last)."""

    def __init__(self, sizes, rng, slope=0.01):
        self.layers = [Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        self._slope = slope

    def __call__(self, x):
        for k, layer in enumerate(self.layers):
            x = layer(x)
            if k < len(self.layers) - 1:
                x = leaky_relu(x, self._slope)
        return x

    def infer(self, x):
        for k, layer in enumerate(self.layers):
            x = layer.infer(x)
            if k < len(self.layers) - 1:
                x = np.where(x > 0, x, self._slope * x)
        return x
