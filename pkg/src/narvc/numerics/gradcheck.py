"""Finite-difference verification of tape gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from .tensor import Graph, Tensor, mul, tsum

__all__ = ["GradCheckReport", "grad_check"]


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    checked_coords: int


def _scalarize(fn, weights_holder: dict):
    """Reduce fn's (possibly non-scalar) output to a scalar with a fixed
    random projection, so the finite-difference probe is non-degenerate even
    for outputs whose plain sum has an identically-zero derivative."""

    def wrapped(t: Tensor) -> Tensor:
        out = fn(t)
        if out.size == 1:
            return tsum(out)
        if "w" not in weights_holder:
            w_rng = np.random.default_rng(out.size)
            weights_holder["w"] = w_rng.standard_normal(out.shape)
        return tsum(mul(out, Tensor(weights_holder["w"])))

    return wrapped


def grad_check(
    fn,
    point: Tensor,
    step: float = 1e-5,
    rel_tol: float = 1e-4,
    max_coords: int | None = None,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backward() gradients of ``fn`` against central finite differences.

    fn maps a Tensor to a Tensor and must be deterministic (dropout off);
    non-scalar outputs are projected onto a fixed random direction first.
    Passes iff the max relative error across checked coordinates (absolute
    floor 1e-8) is within rel_tol. ``max_coords`` subsamples coordinates for
    large points; None checks all of them.
    """
    holder: dict = {}
    scalar_fn = _scalarize(fn, holder)

    base = point.data.copy()

    def eval_at(values: np.ndarray) -> float:
        t = Tensor(values)
        return scalar_fn(t).item()

    y1 = eval_at(base)
    y2 = eval_at(base)
    if y1 != y2:
        raise UsageError("grad_check requires a deterministic function (two evaluations differed)")

    leaf = Tensor(base, requires_grad=True)
    with Graph() as g:
        loss = scalar_fn(leaf)
    g.backward(loss)
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(base)
    analytic = analytic.reshape(-1)

    n = base.size
    if max_coords is not None and max_coords < n:
        coords = np.random.default_rng(seed).choice(n, size=max_coords, replace=False)
    else:
        coords = np.arange(n)

    flat = base.reshape(-1)
    max_rel = 0.0
    for i in coords:
        orig = flat[i]
        flat[i] = orig + step
        yp = eval_at(base)
        flat[i] = orig - step
        ym = eval_at(base)
        flat[i] = orig
        fd = (yp - ym) / (2.0 * step)
        denom = max(abs(fd), abs(analytic[i]), 1e-8)
        rel = abs(fd - analytic[i]) / denom
        if rel > max_rel:
            max_rel = rel
    return GradCheckReport(max_rel_err=max_rel, passed=max_rel <= rel_tol, checked_coords=len(coords))
