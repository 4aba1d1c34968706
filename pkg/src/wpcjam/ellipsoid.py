"""Batched two-dimensional ellipsoid method.

Minimizes a batch of non-smooth convex functions over the non-negative
quadrant with central subgradient cuts.  All batch elements start from the
same ellipsoid, and a central cut shrinks the area by the fixed factor
4/(3*sqrt(3)) regardless of the cut direction, so the whole batch terminates
in lockstep on the area threshold.  When the center leaves the quadrant the
cut uses the violated coordinate's unit normal instead of the objective
subgradient; the function is still evaluated at the center projected onto the
quadrant, which is a valid query point for best-value tracking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class EllipsoidOutcome:
    best_point: np.ndarray        # (B, 2) lowest-value feasible query points
    best_value: np.ndarray        # (B,)
    iterations: int
    converged: np.ndarray         # (B,) volume threshold reached
    history: np.ndarray | None    # (iters, B) queried values when recorded


def minimize_nonneg(evaluate, batch: int, center, radius_sq: float,
                    vol_tol: float, max_iters: int, record_history: bool = False) -> EllipsoidOutcome:
    """Run the cutting loop.

    ``evaluate(x0, x1)`` takes two (B,) coordinate arrays inside the quadrant
    and returns ``(values (B,), subgradients (B, 2))``.
    """
    x = np.tile(np.asarray(center, float), (batch, 1))
    shape = np.tile(radius_sq * np.eye(2), (batch, 1, 1))
    best_x = np.maximum(x, 0.0).copy()
    best_v = np.full(batch, np.inf)
    frozen = np.zeros(batch, dtype=bool)
    history = [] if record_history else None

    iterations = 0
    while iterations < max_iters:
        det = shape[:, 0, 0] * shape[:, 1, 1] - shape[:, 0, 1] * shape[:, 1, 0]
        vol = np.pi * np.sqrt(np.maximum(det, 0.0))
        vol = np.where(frozen, 0.0, vol)
        if np.all(vol < vol_tol):
            break
        iterations += 1

        x_eval = np.maximum(x, 0.0)
        values, subgrad = evaluate(x_eval[:, 0], x_eval[:, 1])
        if history is not None:
            history.append(values.copy())
        improved = values < best_v
        best_v = np.where(improved, values, best_v)
        best_x = np.where(improved[:, None], x_eval, best_x)

        cut = np.array(subgrad, float, copy=True)
        viol0 = x[:, 0] < 0.0
        viol1 = (~viol0) & (x[:, 1] < 0.0)
        cut[viol0] = (-1.0, 0.0)
        cut[viol1] = (0.0, -1.0)

        shape_cut = np.einsum("bij,bj->bi", shape, cut)
        s_norm_sq = np.einsum("bi,bi->b", cut, shape_cut)
        ok = s_norm_sq > 0.0
        frozen |= ~ok
        denom = np.sqrt(np.where(ok, s_norm_sq, 1.0))

        x_new = x - shape_cut / (3.0 * denom[:, None])
        outer = shape_cut[:, :, None] * shape_cut[:, None, :]
        shape_new = (4.0 / 3.0) * (shape - (2.0 / 3.0) * outer / np.where(ok, s_norm_sq, 1.0)[:, None, None])
        shape_new = 0.5 * (shape_new + np.swapaxes(shape_new, 1, 2))

        upd = ok & ~frozen
        x = np.where(upd[:, None], x_new, x)
        shape = np.where(upd[:, None, None], shape_new, shape)

    det = shape[:, 0, 0] * shape[:, 1, 1] - shape[:, 0, 1] * shape[:, 1, 0]
    converged = frozen | (np.pi * np.sqrt(np.maximum(det, 0.0)) < vol_tol)
    hist = np.array(history) if history else None
    return EllipsoidOutcome(best_point=best_x, best_value=best_v,
                            iterations=iterations, converged=converged, history=hist)
