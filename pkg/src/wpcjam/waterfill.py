"""Shared power-allocation primitives.

The closed-form maximizer of a priced rate difference, greedy peak-limited
fills by channel strength, and a batched bisection water-filler with a sum
budget.  Everything here is array-friendly: scalar or (N,) or (B, N) inputs
broadcast as numpy usually does.
"""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))

# below this price the water level exceeds any practical peak power
_TINY_PRICE = 1e-100


def pair_rate_power(a, b, price, peak):
    """Maximizer of ``ln(1 + a p) - ln(1 + b p) - price * p`` over ``[0, peak]``.

    ``a`` and ``b`` are the effective channel gains of the intended and the
    leaked link; ``price`` is in nats per watt.  Where ``a <= b`` the
    objective is non-increasing and the result is 0.  The stationary point is
    the positive root of the quadratic ``a b p^2 + (a + b) p + 1 - (a-b)/price``,
    evaluated in the cancellation-free form ``-2 qc / (qb + sqrt(disc))`` so
    that extreme gain-to-noise ratios (1e9 and beyond) stay accurate.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    price = np.asarray(price, float)
    diff = a - b
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        qb = a + b
        qc = 1.0 - diff / price
        disc = diff * (diff + 4.0 * a * b / price)
        root = -2.0 * qc / (qb + np.sqrt(disc))
        root = np.where(price <= _TINY_PRICE, np.inf, root)
        out = np.where(diff > 0.0, np.clip(root, 0.0, peak), 0.0)
    return out


def descending_fill(weights, budget, peak):
    """Spend ``budget`` greedily on the largest weights, ``peak`` per entry.

    This maximizes ``sum(p * weights)`` subject to ``sum(p) <= budget`` and
    ``0 <= p <= peak`` (fractional knapsack).  Ties go to the lowest index.
    ``weights``: (B, N) or (N,); ``budget``: (B,) or scalar.
    """
    w = np.atleast_2d(np.asarray(weights, float))
    bud = np.broadcast_to(np.asarray(budget, float), (w.shape[0],))
    order = np.argsort(-w, axis=1, kind="stable")
    k = np.arange(w.shape[1])[None, :]
    fill_sorted = np.clip(bud[:, None] - k * peak, 0.0, peak)
    out = np.empty_like(w)
    np.put_along_axis(out, order, fill_sorted, axis=1)
    if np.asarray(weights).ndim == 1:
        return out[0]
    return out


def min_power_for_target(weights, target, peak):
    """Least total power whose weighted sum reaches ``target``, ``peak`` per
    entry; ``inf`` where the target is unreachable.

    Greedy on the largest weights, the exact optimum for this linear fill.
    """
    w = np.atleast_2d(np.asarray(weights, float))
    tgt = np.broadcast_to(np.asarray(target, float), (w.shape[0],))
    w_sorted = -np.sort(-w, axis=1)
    cap = peak * w_sorted
    cum = np.cumsum(cap, axis=1)
    prev = cum - cap
    with np.errstate(divide="ignore", invalid="ignore"):
        take = np.clip((tgt[:, None] - prev) / w_sorted, 0.0, peak)
    take = np.where(w_sorted > 0.0, take, 0.0)
    spend = np.sum(take, axis=1)
    spend = np.where(tgt <= cum[:, -1] * (1.0 + 1e-12) + 1e-300, spend, np.inf)
    spend = np.where(tgt <= 0.0, 0.0, spend)
    if np.asarray(weights).ndim == 1:
        return float(spend[0])
    return spend


def budgeted_pair_waterfill(a, b, budget, peak, residual_rtol=1e-9, max_iters=200):
    """Water-fill ``p`` maximizing ``sum ln(1+a p) - ln(1+b p)`` under
    ``sum(p) <= budget`` and ``0 <= p <= peak``.

    Entries with ``a <= b`` get zero.  When the all-peaks allocation fits the
    budget the price is zero; otherwise the price is found by bisection on
    ``[0, max(a - b)]`` until the spend matches the budget to
    ``residual_rtol`` relative, always stopping on the feasible side.

    Returns ``(p, price, price_max, binding)`` with shapes following the
    (B, N) convention.
    """
    a2d = np.atleast_2d(np.asarray(a, float))
    b2d = np.atleast_2d(np.asarray(b, float))
    bud = np.broadcast_to(np.asarray(budget, float), (a2d.shape[0],)).astype(float)

    active = a2d > b2d
    diff = np.where(active, a2d - b2d, 0.0)
    price_max = np.max(diff, axis=1)
    full = np.where(active, peak, 0.0)
    sum_full = np.sum(full, axis=1)
    binding = sum_full > bud * (1.0 + 1e-15)

    p = full.copy()
    theta = np.zeros(a2d.shape[0])
    if np.any(binding):
        lo = np.zeros(a2d.shape[0])
        hi = price_max.copy()
        for _ in range(max_iters):
            mid = 0.5 * (lo + hi)
            spend = np.sum(pair_rate_power(a2d, b2d, mid[:, None], peak), axis=1)
            over = spend > bud
            lo = np.where(binding & over, mid, lo)
            hi = np.where(binding & ~over, mid, hi)
            done = ~binding | (np.abs(spend - bud) <= residual_rtol * np.maximum(bud, 1e-300))
            if np.all(done):
                break
        # the upper end never overspends, so the result stays feasible
        p_bind = pair_rate_power(a2d, b2d, hi[:, None], peak)
        p = np.where(binding[:, None], p_bind, p)
        theta = np.where(binding, hi, 0.0)

    if np.asarray(a).ndim == 1:
        return p[0], float(theta[0]), float(price_max[0]), bool(binding[0])
    return p, theta, price_max, binding
