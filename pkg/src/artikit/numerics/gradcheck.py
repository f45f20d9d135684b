"""Central finite-difference checks for reverse-mode gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """``|a - b| / max(|a|, |b|)`` in the 2-norm; zero when both vanish."""
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < 1e-12:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def numeric_grad(f, inputs, h=1e-4, coords=None):
    """Central differences of scalar ``f(*tensors)`` for selected coordinates.

    ``coords[i]`` lists flat indices of input ``i`` to perturb (all when None).
    """
    out = []
    for i, x in enumerate(inputs):
        g = np.zeros_like(x)
        flat, gflat = x.reshape(-1), g.reshape(-1)
        idx = range(x.size) if coords is None else coords[i]
        for j in idx:
            orig = flat[j]
            flat[j] = orig + h
            fp = float(f(*[Tensor(a) for a in inputs]).data)
            flat[j] = orig - h
            fm = float(f(*[Tensor(a) for a in inputs]).data)
            flat[j] = orig
            gflat[j] = (fp - fm) / (2 * h)
        out.append(g)
    return out


def grad_check(f, inputs, h: float = 1e-4, max_coords: int | None = None, seed: int = 0) -> float:
    """Largest relative error between autodiff and central differences over inputs.

    ``inputs`` is an array or a list of arrays (converted to float64).
    ``max_coords`` caps the perturbed entries per input, drawn at random.
    """
    if isinstance(inputs, np.ndarray):
        inputs = [inputs]
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    tensors = [Tensor(x.copy(), requires_grad=True) for x in inputs]
    f(*tensors).backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    coords = None
    if max_coords is not None:
        rng = np.random.default_rng(seed)
        coords = [np.sort(rng.choice(x.size, size=min(max_coords, x.size), replace=False)) for x in inputs]
    numeric = numeric_grad(f, inputs, h, coords)
    errs = []
    for i, (a, n) in enumerate(zip(analytic, numeric)):
        if coords is not None:
            a, n = a.reshape(-1)[coords[i]], n.reshape(-1)[coords[i]]
        errs.append(rel_error(a, n))
    return max(errs)
