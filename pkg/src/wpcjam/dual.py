"""Globally optimal inner solver at a fixed time split via Lagrange duality.

The power allocation problem at fixed ``alpha2`` decomposes per sub-carrier
once the sum-power and harvested-energy constraints are priced by a dual pair
``(lambda, mu)``.  The power-transfer power is a bang-bang sign rule, the
information power has a closed form given the jamming power, and the jamming
power is found by a one-dimensional grid search.  The dual pair itself is
minimized with the ellipsoid method, after which the power-transfer vector is
recovered by a greedy harvest-maximizing fill of the leftover budget.

All heavy paths are batched over realizations and time splits; the public
single-instance functions wrap batches of one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ellipsoid
from .model import (LN2, ChannelGains, ChannelRealization, PowerAllocation, ReceiverType,
                    Solution, SolverDiagnostics, SystemParams, TimeSplit,
                    per_carrier_rate_gap, secrecy_rate)
from .waterfill import descending_fill, pair_rate_power


@dataclass(frozen=True)
class DualPoint:
    """Prices of the sum-power and harvested-energy constraints."""

    lam: float
    mu: float

    def __post_init__(self):
        if self.lam < 0.0 or self.mu < 0.0:
            raise ValueError("dual variables must be non-negative")


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the dual and MM inner solvers.

    ``eps_j`` is the jamming-power grid step (defaults to peak/1000),
    ``eps_e`` the ellipsoid area threshold, ``eps_m`` the fractional-increase
    stopping threshold of the MM loop.  The initial ellipsoid is the disk of
    squared radius ``ellipsoid_radius_sq`` around ``ellipsoid_center``; it
    must cover the optimal dual pair.
    """

    eps_j: float | None = None
    eps_e: float = 1e-4
    eps_m: float = 1e-4
    max_ellipsoid_iters: int = 500
    mm_max_iters: int = 50
    feasibility_tol: float = 1e-9
    ellipsoid_center: tuple[float, float] = (100.0, 100.0)
    ellipsoid_radius_sq: float = 20100.0

    def __post_init__(self):
        for name in ("eps_e", "eps_m", "feasibility_tol", "ellipsoid_radius_sq"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.eps_j is not None and self.eps_j <= 0.0:
            raise ValueError("eps_j must be positive")
        if self.max_ellipsoid_iters < 1 or self.mm_max_iters < 1:
            raise ValueError("iteration caps must be at least 1")

    def jam_grid(self, p_j_peak: float) -> np.ndarray:
        step = self.eps_j if self.eps_j is not None else p_j_peak / 1000.0
        m = int(np.floor(p_j_peak / step + 1e-9))
        grid = np.arange(m + 1) * step
        if grid[-1] < p_j_peak * (1.0 - 1e-12):
            grid = np.append(grid, p_j_peak)
        else:
            grid[-1] = p_j_peak
        return grid


def solve_ppt_sign(lam, mu, alpha2, h_j_sq, params: SystemParams):
    """Bang-bang rule for the power-transfer power: full peak where the
    harvest value priced by ``mu`` beats the budget price ``lam``, zero
    otherwise (ties resolve to zero)."""
    score = (1.0 - np.asarray(alpha2, float)) * (
        -np.asarray(lam, float) + np.asarray(mu, float) * params.eta * np.asarray(h_j_sq, float))
    return np.where(score > 0.0, params.p_s_peak, 0.0)


def _gain_ratios(rx: ReceiverType, p_j, h_d_sq, g_d_sq, h_e_sq, g_e_sq, params: SystemParams):
    p_j = np.asarray(p_j, float)
    if rx is ReceiverType.TYPE_II:
        a = np.asarray(h_d_sq, float) / params.sigma_d_sq * np.ones_like(p_j)
    else:
        a = np.asarray(h_d_sq, float) / (p_j * np.asarray(g_d_sq, float) + params.sigma_d_sq)
    b = np.asarray(h_e_sq, float) / (p_j * np.asarray(g_e_sq, float) + params.sigma_e_sq)
    return a, b


def solve_pit_given_pj(rx: ReceiverType, p_j_n, lam, alpha2,
                       h_d_sq, g_d_sq, h_e_sq, g_e_sq, params: SystemParams):
    """Optimal information power on one sub-carrier for a fixed jamming power
    and budget price ``lam``; zero when the eavesdropper's effective gain
    dominates, the peak when the price vanishes."""
    a, b = _gain_ratios(rx, p_j_n, h_d_sq, g_d_sq, h_e_sq, g_e_sq, params)
    price = np.asarray(lam, float) * np.asarray(alpha2, float) * LN2
    return pair_rate_power(a, b, price, params.p_s_peak)


def solve_subproblem_itj(rx: ReceiverType, lam, mu, alpha2,
                         h_d_sq, g_d_sq, h_e_sq, g_e_sq,
                         params: SystemParams, eps_j: float | None = None):
    """Jointly optimal (information, jamming) pair on one sub-carrier via a
    grid over the jamming power with the closed-form information power at
    each grid point.  Ties pick the smallest jamming power.

    Returns ``(p_it, p_j, value)`` where ``value`` is the priced per-carrier
    Lagrangian term in bits.
    """
    cfg = SolverConfig(eps_j=eps_j) if eps_j is not None else SolverConfig()
    grid = cfg.jam_grid(params.p_j_peak)
    a, b = _gain_ratios(rx, grid, h_d_sq, g_d_sq, h_e_sq, g_e_sq, params)
    lam_a2 = float(lam) * float(alpha2)
    p_it = pair_rate_power(a, b, lam_a2 * LN2, params.p_s_peak)
    value = (np.log2(1.0 + a * p_it) - np.log2(1.0 + b * p_it)
             - lam_a2 * p_it - float(mu) * float(alpha2) * grid)
    k = int(np.argmax(value))
    return float(p_it[k]), float(grid[k]), float(value[k])


def _chunk_slices(batch: int, n: int, m: int, limit: int = 4_000_000):
    rows = max(1, min(batch, limit // max(1, n * m)))
    for start in range(0, batch, rows):
        yield slice(start, min(start + rows, batch))


def _dual_eval_batch(rx: ReceiverType, lam, mu, alpha2, gains: ChannelGains,
                     params: SystemParams, grid: np.ndarray):
    """Evaluate the dual function for a batch of (lam, mu, alpha2) triples.

    Returns ``(g, subgrad, p_pt, p_it, p_j)``; ``g`` is in bits.
    """
    batch, n = gains.batch, gains.n
    lam = np.asarray(lam, float)
    mu = np.asarray(mu, float)
    alpha2 = np.broadcast_to(np.asarray(alpha2, float), (batch,))
    p_it = np.empty((batch, n))
    p_j = np.empty((batch, n))
    itj_value = np.empty((batch, n))

    for rows in _chunk_slices(batch, n, grid.size):
        g_row = grid[None, None, :]
        if rx is ReceiverType.TYPE_II:
            a = np.broadcast_to((gains.hd2[rows] / params.sigma_d_sq)[:, :, None],
                                (gains.hd2[rows].shape[0], n, grid.size))
        else:
            a = gains.hd2[rows][:, :, None] / (g_row * gains.gd2[rows][:, :, None] + params.sigma_d_sq)
        b = gains.he2[rows][:, :, None] / (g_row * gains.ge2[rows][:, :, None] + params.sigma_e_sq)
        lam_a2 = (lam[rows] * alpha2[rows])[:, None, None]
        mu_a2 = (mu[rows] * alpha2[rows])[:, None, None]
        pit_grid = pair_rate_power(a, b, lam_a2 * LN2, params.p_s_peak)
        val = (np.log2(1.0 + a * pit_grid) - np.log2(1.0 + b * pit_grid)
               - lam_a2 * pit_grid - mu_a2 * g_row)
        best = np.argmax(val, axis=2)  # first max: smallest jamming power
        p_j[rows] = grid[best]
        p_it[rows] = np.take_along_axis(pit_grid, best[:, :, None], axis=2)[:, :, 0]
        itj_value[rows] = np.take_along_axis(val, best[:, :, None], axis=2)[:, :, 0]

    p_pt = solve_ppt_sign(lam[:, None], mu[:, None], alpha2[:, None], gains.hj2, params)
    score = (1.0 - alpha2)[:, None] * (-lam[:, None] + mu[:, None] * params.eta * gains.hj2)
    g = (np.sum(itj_value, axis=1) + np.sum(score * p_pt, axis=1) + lam * params.p_s_total)

    sub = np.empty((batch, 2))
    sub[:, 0] = (params.p_s_total - (1.0 - alpha2) * np.sum(p_pt, axis=1)
                 - alpha2 * np.sum(p_it, axis=1))
    sub[:, 1] = ((1.0 - alpha2) * params.eta * np.sum(p_pt * gains.hj2, axis=1)
                 - alpha2 * np.sum(p_j, axis=1))
    return g, sub, p_pt, p_it, p_j


def dual_function_eval(rx: ReceiverType, dual: DualPoint, alpha2: float,
                       channels: ChannelRealization, params: SystemParams,
                       config: SolverConfig | None = None):
    """Single-instance dual evaluation.

    Returns ``(value, candidate PowerAllocation, subgradient)``; the
    candidate power-transfer vector follows the bang-bang sign rule and is in
    general not the recovered primal one.
    """
    cfg = config or SolverConfig()
    gains = ChannelGains.from_realizations([channels])
    grid = cfg.jam_grid(params.p_j_peak)
    g, sub, p_pt, p_it, p_j = _dual_eval_batch(
        rx, np.array([dual.lam]), np.array([dual.mu]), np.array([alpha2]), gains, params, grid)
    power = PowerAllocation(p_pt=p_pt[0], p_it=p_it[0], p_j=p_j[0])
    return float(g[0]), power, sub[0]


def recover_ppt_batch(alpha2, p_it, p_j, gains: ChannelGains, params: SystemParams, tol: float):
    """Greedy harvest-maximizing fill of the budget left after information
    power.  Returns ``(p_pt, energy_ok, shortfall)``; a positive shortfall
    means even the best fill cannot cover the jamming energy, which signals a
    duality-gap artifact rather than a code path to repair here."""
    alpha2 = np.asarray(alpha2, float)
    spend_it = alpha2 * np.sum(p_it, axis=1)
    denom = np.maximum(1.0 - alpha2, 1e-300)
    budget = np.maximum(params.p_s_total - spend_it, 0.0) / denom
    p_pt = descending_fill(gains.hj2, budget, params.p_s_peak)
    p_pt = np.where(alpha2[:, None] >= 1.0, 0.0, p_pt)
    harvest = (1.0 - alpha2) * params.eta * np.sum(p_pt * gains.hj2, axis=1)
    jam = alpha2 * np.sum(p_j, axis=1)
    shortfall = jam - harvest
    ok = shortfall <= tol * np.maximum(np.abs(jam), np.abs(harvest))
    return p_pt, ok, shortfall


@dataclass(frozen=True)
class RecoveredPpt:
    p_pt: np.ndarray
    energy_ok: bool
    energy_shortfall: float


def recover_ppt(alpha2: float, p_it, p_j, channels: ChannelRealization,
                params: SystemParams, tol: float = 1e-9) -> RecoveredPpt:
    """Single-instance power-transfer recovery; see :func:`recover_ppt_batch`."""
    p_it = np.asarray(p_it, float)
    if alpha2 * float(np.sum(p_it)) > params.p_s_total * (1.0 + 1e-9):
        raise ValueError("information power spends more than the total budget")
    gains = ChannelGains.from_realizations([channels])
    p_pt, ok, short = recover_ppt_batch(
        np.array([alpha2]), p_it[None, :], np.asarray(p_j, float)[None, :], gains, params, tol)
    return RecoveredPpt(p_pt=p_pt[0], energy_ok=bool(ok[0]), energy_shortfall=float(short[0]))


@dataclass
class InnerBatchResult:
    """Raw arrays from a batched inner solve (one row per batch element)."""

    p_pt: np.ndarray
    p_it: np.ndarray
    p_j: np.ndarray
    secrecy: np.ndarray
    inner_value: np.ndarray
    dual_bound: np.ndarray | None
    iterations: np.ndarray
    converged: np.ndarray
    flags: list[tuple[str, ...]]


def _rate_gap_batch(rx: ReceiverType, p_it, p_j, gains: ChannelGains, params: SystemParams):
    if rx is ReceiverType.TYPE_II:
        denom_d = params.sigma_d_sq
    else:
        denom_d = p_j * gains.gd2 + params.sigma_d_sq
    sd = np.log2(1.0 + p_it * gains.hd2 / denom_d)
    se = np.log2(1.0 + p_it * gains.he2 / (p_j * gains.ge2 + params.sigma_e_sq))
    return sd - se


def finalize_primal(rx: ReceiverType, alpha2, p_it, p_j, gains: ChannelGains,
                    params: SystemParams, tol: float):
    """Turn dual-side candidates into a feasible primal batch.

    Rescales the information power if it overfills the budget and the jamming
    power if the recovered harvest cannot cover it; both repairs are flagged
    because they quantify dual-side slack.
    """
    alpha2 = np.asarray(alpha2, float)
    flags = [[] for _ in range(gains.batch)]
    p_it = np.clip(p_it, 0.0, params.p_s_peak)
    p_j = np.clip(p_j, 0.0, params.p_j_peak)

    spend = alpha2 * np.sum(p_it, axis=1)
    over = spend > params.p_s_total
    if np.any(over):
        scale = np.where(over, params.p_s_total / np.maximum(spend, 1e-300), 1.0)
        p_it = p_it * scale[:, None]
        for i in np.flatnonzero(over):
            flags[i].append("it-budget-rescaled")

    p_pt, ok, shortfall = recover_ppt_batch(alpha2, p_it, p_j, gains, params, tol)
    bad = ~ok
    if np.any(bad):
        harvest = (1.0 - alpha2) * params.eta * np.sum(p_pt * gains.hj2, axis=1)
        jam = alpha2 * np.sum(p_j, axis=1)
        scale = np.where(bad, np.where(jam > 0.0, harvest / np.maximum(jam, 1e-300), 1.0), 1.0)
        p_j = p_j * np.clip(scale, 0.0, 1.0)[:, None]
        for i in np.flatnonzero(bad):
            flags[i].append(f"harvest-rescaled:{shortfall[i]:.3g}")

    gap = _rate_gap_batch(rx, p_it, p_j, gains, params)
    inner_value = np.sum(gap, axis=1)
    secrecy = alpha2 * np.sum(np.maximum(gap, 0.0), axis=1)
    return p_pt, p_it, p_j, inner_value, secrecy, flags


def solve_inner_optimal_batch(rx: ReceiverType, alpha2, gains: ChannelGains,
                              params: SystemParams, config: SolverConfig | None = None,
                              record_history: bool = False) -> InnerBatchResult:
    """Batched optimal inner solve at fixed per-element time splits."""
    cfg = config or SolverConfig()
    alpha2 = np.broadcast_to(np.asarray(alpha2, float), (gains.batch,))
    if np.any(alpha2 <= 0.0) or np.any(alpha2 >= 1.0):
        raise ValueError("inner solvers need 0 < alpha2 < 1; the boundary cases are handled by the outer search")
    grid = cfg.jam_grid(params.p_j_peak)

    def evaluate(lam, mu):
        g, sub, _, _, _ = _dual_eval_batch(rx, lam, mu, alpha2, gains, params, grid)
        return g, sub

    out = ellipsoid.minimize_nonneg(evaluate, gains.batch, cfg.ellipsoid_center,
                                    cfg.ellipsoid_radius_sq, cfg.eps_e,
                                    cfg.max_ellipsoid_iters, record_history=record_history)
    lam, mu = out.best_point[:, 0], out.best_point[:, 1]
    dual_bound, _, _, p_it, p_j = _dual_eval_batch(rx, lam, mu, alpha2, gains, params, grid)
    p_pt, p_it, p_j, inner_value, secrecy, flags = finalize_primal(
        rx, alpha2, p_it, p_j, gains, params, cfg.feasibility_tol)
    for i in np.flatnonzero(~out.converged):
        flags[i].append("ellipsoid-iteration-cap")
    result = InnerBatchResult(
        p_pt=p_pt, p_it=p_it, p_j=p_j, secrecy=secrecy, inner_value=inner_value,
        dual_bound=dual_bound, iterations=np.full(gains.batch, out.iterations),
        converged=out.converged, flags=[tuple(f) for f in flags])
    result.dual_history = out.history
    result.dual_point = out.best_point
    return result


def ellipsoid_minimize(rx: ReceiverType, alpha2: float, channels: ChannelRealization,
                       params: SystemParams, config: SolverConfig | None = None,
                       record_history: bool = False):
    """Single-instance dual minimization.

    Returns ``(DualPoint, p_it, p_j, diagnostics_dict)`` with the power pair
    taken from the dual evaluation at the best visited dual point.
    """
    cfg = config or SolverConfig()
    gains = ChannelGains.from_realizations([channels])
    grid = cfg.jam_grid(params.p_j_peak)
    alpha2_arr = np.array([alpha2])

    def evaluate(lam, mu):
        g, sub, _, _, _ = _dual_eval_batch(rx, lam, mu, alpha2_arr, gains, params, grid)
        return g, sub

    out = ellipsoid.minimize_nonneg(evaluate, 1, cfg.ellipsoid_center, cfg.ellipsoid_radius_sq,
                                    cfg.eps_e, cfg.max_ellipsoid_iters, record_history=record_history)
    lam, mu = float(out.best_point[0, 0]), float(out.best_point[0, 1])
    g, _, _, p_it, p_j = _dual_eval_batch(rx, np.array([lam]), np.array([mu]), alpha2_arr,
                                          gains, params, grid)
    info = {"dual_bound": float(g[0]), "iterations": out.iterations,
            "converged": bool(out.converged[0]), "history": out.history}
    return DualPoint(lam, mu), p_it[0], p_j[0], info


def _solution_from_batch(rx, alpha2, result: InnerBatchResult, i: int, solver: str) -> Solution:
    dual_bound = None if result.dual_bound is None else float(result.dual_bound[i])
    gap = None
    if dual_bound is not None:
        gap = (dual_bound - float(result.inner_value[i])) / max(abs(float(result.inner_value[i])), 1e-12)
    diag = SolverDiagnostics(
        solver=solver, iterations=int(result.iterations[i]), converged=bool(result.converged[i]),
        dual_bound=dual_bound, primal_inner_value=float(result.inner_value[i]),
        rel_duality_gap=gap, flags=result.flags[i])
    power = PowerAllocation(p_pt=result.p_pt[i], p_it=result.p_it[i], p_j=result.p_j[i])
    return Solution(time=TimeSplit(alpha2=float(np.asarray(alpha2).reshape(-1)[i])),
                    power=power, secrecy_rate=float(result.secrecy[i]), diagnostics=diag)


def solve_inner_optimal(rx: ReceiverType, alpha2: float, channels: ChannelRealization,
                        params: SystemParams, config: SolverConfig | None = None) -> Solution:
    """Optimal power allocation at a fixed time split, as a feasible
    :class:`Solution` with dual-gap diagnostics."""
    gains = ChannelGains.from_realizations([channels])
    result = solve_inner_optimal_batch(rx, np.array([alpha2]), gains, params, config)
    return _solution_from_batch(rx, np.array([alpha2]), result, 0, "optimal")
