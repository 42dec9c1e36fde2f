import numpy as np

from .tensor import Tape


def grad_check(f, params, eps=1e-5):
    """Max relative error between tape gradients and central differences.

    ``f`` rebuilds the graph from the current parameter values and returns a
    scalar tensor.  Error per entry is
    ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.value) for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.value.reshape(-1)
        af = a.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            up = f().item()
            flat[k] = orig - eps
            down = f().item()
            flat[k] = orig
            num = (up - down) / (2.0 * eps)
            err = abs(af[k] - num) / max(1e-8, abs(af[k]) + abs(num))
            worst = max(worst, err)
    return worst
