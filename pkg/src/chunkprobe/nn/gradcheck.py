"""Central-difference gradient checking for scalar-valued graphs."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ShapeError
from .tensor import Tensor


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(fn: Callable[[], Tensor], wrt: Sequence[Tensor], h: float = 1e-5,
               max_entries: Optional[int] = None,
               rng: Optional[np.random.Generator] = None) -> float:
    """Compare analytic and numeric gradients; return the worst relative error.

    fn must rebuild the graph from the leaf tensors in wrt on every call and
    must be deterministic (re-seed any sampling inside fn).  When max_entries
    is set, at most that many coordinates per tensor are probed, drawn from
    rng so large checks stay affordable.
    """
    wrt = list(wrt)
    for t in wrt:
        t.zero_grad()
    out = fn()
    if out.size != 1:
        raise ShapeError(f"grad_check: fn must return a scalar, got shape {out.shape}")
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in wrt]

    if max_entries is not None and rng is None:
        rng = np.random.default_rng(0)
    worst = 0.0
    for t, ana in zip(wrt, analytic):
        n = t.data.size
        if max_entries is not None and n > max_entries:
            idxs = rng.choice(n, size=max_entries, replace=False)
        else:
            idxs = range(n)
        flat = t.data.reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(fn().data)
            flat[i] = orig - h
            f_minus = float(fn().data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            worst = max(worst, relative_error(float(ana.reshape(-1)[i]), numeric))
    return worst
