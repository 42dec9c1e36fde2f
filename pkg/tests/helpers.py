import numpy as np

from coolscreen.molgraph import MolGraph


def permute(g, perm):
    """Relabel atoms: new atom k is old atom perm[k]."""
    inv = {old: new for new, old in enumerate(perm)}
    atoms = [(g.atoms[old].element, g.atoms[old].aromatic) for old in perm]
    bonds = [(inv[b.begin], inv[b.end], b.order) for b in g.bonds]
    return MolGraph.from_parts(atoms, bonds)


def random_perm(g, seed):
    return list(np.random.default_rng(seed).permutation(len(g.atoms)))


def reactant_entries(sets):
    out = list(zip(sets.alcohol_smiles, sets.alcohols))
    out += list(zip(sets.chloride_smiles, sets.chlorides))
    out += list(zip(sets.acid_smiles, sets.acids))
    return out


ACCEPTANCE = {}


def verdict(number, ok, detail=""):
    """Record and print one acceptance line; the caller asserts ``ok``."""
    line = f"ACCEPTANCE {number:2d}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
    ACCEPTANCE[number] = line
    print(line)
    return ok


def best_step_grad_error(f, params, steps=(1e-4, 1e-5, 1e-6, 1e-7)):
    """Like ``nncore.grad_check`` but each entry keeps its best agreement over
    several central-difference steps.

    LeakyReLU makes the loss piecewise smooth: a large step can straddle a
    kink while a small step drowns tiny gradients in roundoff.  A wrong
    adjoint disagrees at every step, so this still catches real errors.
    """
    from coolscreen.nncore.tensor import Tape

    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    worst = 0.0
    for p in params:
        flat = p.value.reshape(-1)
        a = p.grad.reshape(-1) if p.grad is not None else np.zeros(flat.size)
        for k in range(flat.size):
            orig, best = flat[k], np.inf
            for eps in steps:
                flat[k] = orig + eps
                up = f().item()
                flat[k] = orig - eps
                down = f().item()
                flat[k] = orig
                num = (up - down) / (2.0 * eps)
                best = min(best, abs(a[k] - num) / max(1e-8, abs(a[k]) + abs(num)))
            worst = max(worst, best)
    return worst
