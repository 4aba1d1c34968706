"""Minorization-maximization inner solver at a fixed time split.

Each iteration replaces the two convex log terms of the rate objective with
their tangent planes at the previous iterate, which leaves a concave
surrogate whose priced per-sub-carrier maximizers are water-filling closed
forms.  The surrogate problem is solved exactly through its own
ellipsoid-driven dual; because the surrogate touches the true objective at
the expansion point and lower-bounds it everywhere, the true objective never
decreases across iterations.

For the non-cancelling receiver the per-sub-carrier surrogate couples the
information and jamming powers; the maximizer over the power box is found by
comparing the interior stationary point with the four edge-restricted
stationary points, all in closed form.  For the cancelling receiver the two
variables decouple into independent water-filling rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ellipsoid, heuristic
from .dual import InnerBatchResult, SolverConfig, finalize_primal, solve_ppt_sign
from .model import (LN2, ChannelGains, ChannelRealization, PowerAllocation, ReceiverType,
                    Solution, SolverDiagnostics, SystemParams, TimeSplit)

_TINY = 1e-100


@dataclass(frozen=True)
class SurrogateCoeffs:
    """Per-sub-carrier linearization slopes taken at the previous iterate.

    ``c`` prices jamming power through the destination's noise floor (unused
    by the cancelling receiver), ``d`` and ``e`` price information and
    jamming power through the eavesdropper's signal plus noise.
    """

    c: np.ndarray
    d: np.ndarray
    e: np.ndarray

    @classmethod
    def at(cls, rx: ReceiverType, p_it_prev, p_j_prev, gains: ChannelGains,
           params: SystemParams) -> "SurrogateCoeffs":
        p_it_prev = np.asarray(p_it_prev, float)
        p_j_prev = np.asarray(p_j_prev, float)
        denom_e = p_it_prev * gains.he2 + p_j_prev * gains.ge2 + params.sigma_e_sq
        d = gains.he2 / denom_e
        e = gains.ge2 / denom_e
        if rx is ReceiverType.TYPE_II:
            c = np.zeros_like(d)
        else:
            c = gains.gd2 / (p_j_prev * gains.gd2 + params.sigma_d_sq)
        return cls(c=c, d=d, e=e)


def _true_objective_nats(rx, p_it, p_j, gains: ChannelGains, params: SystemParams):
    if rx is ReceiverType.TYPE_II:
        denom_d = params.sigma_d_sq
        base_d = params.sigma_d_sq
    else:
        denom_d = p_j * gains.gd2 + params.sigma_d_sq
        base_d = denom_d
    term = (np.log(p_it * gains.hd2 + denom_d) - np.log(base_d)
            - np.log(p_it * gains.he2 + p_j * gains.ge2 + params.sigma_e_sq)
            + np.log(p_j * gains.ge2 + params.sigma_e_sq))
    return np.sum(term, axis=-1)


def _surrogate_value_batch(rx, p_it, p_j, prev_p_it, prev_p_j,
                           gains: ChannelGains, params: SystemParams):
    """Surrogate objective in bits with the expansion-point constants kept,
    so it is tangent to the true objective at the previous iterate and below
    it everywhere else."""
    co = SurrogateCoeffs.at(rx, prev_p_it, prev_p_j, gains, params)
    prev_p_it = np.asarray(prev_p_it, float)
    prev_p_j = np.asarray(prev_p_j, float)
    denom_e0 = prev_p_it * gains.he2 + prev_p_j * gains.ge2 + params.sigma_e_sq
    if rx is ReceiverType.TYPE_II:
        lead = np.log(p_it * gains.hd2 + params.sigma_d_sq) - np.log(params.sigma_d_sq)
        const = co.d * prev_p_it + co.e * prev_p_j - np.log(denom_e0)
    else:
        lead = (np.log(p_it * gains.hd2 + p_j * gains.gd2 + params.sigma_d_sq)
                - co.c * p_j + co.c * prev_p_j
                - np.log(prev_p_j * gains.gd2 + params.sigma_d_sq))
        const = co.d * prev_p_it + co.e * prev_p_j - np.log(denom_e0)
    term = (lead + np.log(p_j * gains.ge2 + params.sigma_e_sq)
            - co.d * p_it - co.e * p_j + const)
    return np.sum(term, axis=-1) / LN2


def surrogate_value(rx: ReceiverType, p_it, p_j, prev_p_it, prev_p_j,
                    channels: ChannelRealization, params: SystemParams) -> float:
    """Single-instance surrogate lower bound, bits (tangent at the previous
    iterate)."""
    gains = ChannelGains.from_realizations([channels])
    return float(_surrogate_value_batch(rx, np.asarray(p_it, float)[None, :],
                                        np.asarray(p_j, float)[None, :],
                                        np.asarray(prev_p_it, float)[None, :],
                                        np.asarray(prev_p_j, float)[None, :], gains, params)[0])


def _edge_jam_power(x, k_y, gains: ChannelGains, params: SystemParams):
    """Stationary jamming power of the coupled surrogate along a fixed
    information power ``x``; the positive root of a quadratic, with linear
    and endpoint fallbacks where the quadratic degenerates."""
    A = x * gains.hd2 + params.sigma_d_sq
    Bq = gains.gd2
    C = params.sigma_e_sq
    Dq = gains.ge2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        alpha = k_y * Bq * Dq
        beta = k_y * (A * Dq + Bq * C) - 2.0 * Bq * Dq
        gamma = k_y * A * C - Bq * C - Dq * A
        disc = beta * beta - 4.0 * alpha * gamma
        y_quad = (-beta + np.sqrt(disc)) / (2.0 * alpha)
        y_lin = 1.0 / k_y - C / np.where(Dq > 0.0, Dq, np.nan)
        deriv0 = Bq / A + Dq / C - k_y
        y = np.where(Bq <= 0.0, y_lin, np.where(disc >= 0.0, y_quad,
                                                np.where(deriv0 > 0.0, np.inf, 0.0)))
        y = np.where(k_y <= _TINY, np.inf, y)
    y = np.nan_to_num(y, nan=0.0, posinf=params.p_j_peak, neginf=0.0)
    return np.clip(y, 0.0, params.p_j_peak)


def _mm_powers_type1(k_x, k_y, gains: ChannelGains, params: SystemParams):
    """Exact per-sub-carrier maximizer of the priced coupled surrogate over
    the power box: best of the interior stationary point and the four edge
    stationary points."""
    psp, pjp = params.p_s_peak, params.p_j_peak
    sd2, se2 = params.sigma_d_sq, params.sigma_e_sq
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = gains.gd2 / gains.hd2
        inv_kx = np.where(k_x > _TINY, 1.0 / np.maximum(k_x, _TINY), np.inf)
        x_level = inv_kx - sd2 / gains.hd2

        def x_of_y(y):
            return x_level - ratio * y

        y_int = 1.0 / (k_y - ratio * k_x) - se2 / gains.ge2

    def clean_x(x):
        x = np.nan_to_num(x, nan=0.0, posinf=psp, neginf=0.0)
        return np.clip(x, 0.0, psp)

    def clean_y(y):
        y = np.nan_to_num(y, nan=0.0, posinf=pjp, neginf=0.0)
        return np.clip(y, 0.0, pjp)

    y_int = clean_y(y_int)
    with np.errstate(invalid="ignore", over="ignore"):
        cands_y = np.stack([y_int, np.zeros_like(y_int), np.full_like(y_int, pjp),
                            _edge_jam_power(np.zeros_like(y_int), k_y, gains, params),
                            _edge_jam_power(np.full_like(y_int, psp), k_y, gains, params)])
        cands_x = np.stack([clean_x(x_of_y(y_int)), clean_x(x_of_y(0.0)), clean_x(x_of_y(pjp)),
                            np.zeros_like(y_int), np.full_like(y_int, psp)])

    # channels that cannot carry information or cannot reach the eavesdropper
    no_info = gains.hd2 <= 0.0
    if np.any(no_info):
        cands_x = np.where(no_info[None], 0.0, cands_x)
        y0_edge = _edge_jam_power(np.zeros_like(y_int), k_y, gains, params)
        cands_y = np.where(no_info[None], y0_edge[None], cands_y)
    no_jam = gains.ge2 <= 0.0
    if np.any(no_jam):
        cands_y = np.where(no_jam[None], 0.0, cands_y)
        cands_x = np.where(no_jam[None], clean_x(x_of_y(0.0))[None], cands_x)

    val = (np.log(cands_x * gains.hd2 + cands_y * gains.gd2 + sd2)
           + np.log(cands_y * gains.ge2 + se2) - k_x * cands_x - k_y * cands_y)
    val = np.where(np.isfinite(val), val, -np.inf)
    pick = np.argmax(val, axis=0)
    p_it = np.take_along_axis(cands_x, pick[None], axis=0)[0]
    p_j = np.take_along_axis(cands_y, pick[None], axis=0)[0]
    value = np.take_along_axis(val, pick[None], axis=0)[0]
    return p_it, p_j, value


def _mm_powers_type2(k_x, k_y, gains: ChannelGains, params: SystemParams):
    """Decoupled water-filling rules of the cancelling-receiver surrogate."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        p_it = 1.0 / k_x - params.sigma_d_sq / gains.hd2
        p_j = 1.0 / k_y - params.sigma_e_sq / gains.ge2
    p_it = np.where(gains.hd2 > 0.0, p_it, 0.0)
    p_j = np.where(gains.ge2 > 0.0, p_j, 0.0)
    p_it = np.clip(np.nan_to_num(p_it, nan=0.0, posinf=params.p_s_peak), 0.0, params.p_s_peak)
    p_j = np.clip(np.nan_to_num(p_j, nan=0.0, posinf=params.p_j_peak), 0.0, params.p_j_peak)
    value = (np.log(p_it * gains.hd2 + params.sigma_d_sq)
             + np.log(p_j * gains.ge2 + params.sigma_e_sq) - k_x * p_it - k_y * p_j)
    return p_it, p_j, value


def _mm_eval_batch(rx, lam, mu, alpha2, coeffs: SurrogateCoeffs, gains: ChannelGains,
                   params: SystemParams):
    """Dual function of the surrogate problem (nats) with its subgradient and
    the maximizing powers."""
    lam = np.asarray(lam, float)
    mu = np.asarray(mu, float)
    alpha2 = np.asarray(alpha2, float)
    k_x = coeffs.d + (lam * alpha2)[:, None]
    k_y = coeffs.c + coeffs.e + (mu * alpha2)[:, None]
    if rx is ReceiverType.TYPE_II:
        p_it, p_j, value = _mm_powers_type2(k_x, k_y, gains, params)
    else:
        p_it, p_j, value = _mm_powers_type1(k_x, k_y, gains, params)

    p_pt = solve_ppt_sign(lam[:, None], mu[:, None], alpha2[:, None], gains.hj2, params)
    score = (1.0 - alpha2)[:, None] * (-lam[:, None] + mu[:, None] * params.eta * gains.hj2)
    g = np.sum(value, axis=1) + np.sum(score * p_pt, axis=1) + lam * params.p_s_total

    sub = np.empty((lam.size, 2))
    sub[:, 0] = (params.p_s_total - (1.0 - alpha2) * np.sum(p_pt, axis=1)
                 - alpha2 * np.sum(p_it, axis=1))
    sub[:, 1] = ((1.0 - alpha2) * params.eta * np.sum(p_pt * gains.hj2, axis=1)
                 - alpha2 * np.sum(p_j, axis=1))
    return g, sub, p_pt, p_it, p_j


def mm_inner_dual_step(rx: ReceiverType, coeffs: SurrogateCoeffs, lam: float, mu: float,
                       alpha2: float, channels: ChannelRealization, params: SystemParams):
    """Per-sub-carrier surrogate maximizers at fixed dual prices.

    Returns ``(p_it, p_j, p_pt)`` vectors.
    """
    gains = ChannelGains.from_realizations([channels])
    co = SurrogateCoeffs(c=np.atleast_2d(coeffs.c), d=np.atleast_2d(coeffs.d),
                         e=np.atleast_2d(coeffs.e))
    _, _, p_pt, p_it, p_j = _mm_eval_batch(rx, np.array([lam]), np.array([mu]),
                                           np.array([alpha2]), co, gains, params)
    return p_it[0], p_j[0], p_pt[0]


def solve_surrogate_batch(rx, prev_p_pt, prev_p_it, prev_p_j, alpha2,
                          gains: ChannelGains, params: SystemParams,
                          config: SolverConfig | None = None):
    """One MM step: maximize the surrogate built at the previous iterate.

    Returns ``(p_pt, p_it, p_j, flags, iterations)``.  If numerical slack in
    the dual solve would hand back a surrogate value below the previous
    iterate's, the previous iterate is kept for that row, preserving ascent.
    """
    cfg = config or SolverConfig()
    alpha2 = np.broadcast_to(np.asarray(alpha2, float), (gains.batch,))
    coeffs = SurrogateCoeffs.at(rx, prev_p_it, prev_p_j, gains, params)

    def evaluate(lam, mu):
        g, sub, _, _, _ = _mm_eval_batch(rx, lam, mu, alpha2, coeffs, gains, params)
        return g, sub

    out = ellipsoid.minimize_nonneg(evaluate, gains.batch, cfg.ellipsoid_center,
                                    cfg.ellipsoid_radius_sq, cfg.eps_e, cfg.max_ellipsoid_iters)
    lam, mu = out.best_point[:, 0], out.best_point[:, 1]
    _, _, _, p_it, p_j = _mm_eval_batch(rx, lam, mu, alpha2, coeffs, gains, params)
    p_pt, p_it, p_j, _, _, flags = finalize_primal(rx, alpha2, p_it, p_j, gains, params,
                                                   cfg.feasibility_tol)

    s_new = _surrogate_value_batch(rx, p_it, p_j, prev_p_it, prev_p_j, gains, params)
    s_prev = _surrogate_value_batch(rx, prev_p_it, prev_p_j, prev_p_it, prev_p_j, gains, params)
    revert = s_new < s_prev - 1e-12
    if np.any(revert):
        p_pt = np.where(revert[:, None], prev_p_pt, p_pt)
        p_it = np.where(revert[:, None], prev_p_it, p_it)
        p_j = np.where(revert[:, None], prev_p_j, p_j)
        for i in np.flatnonzero(revert):
            flags[i].append("mm-step-reverted")
    for i in np.flatnonzero(~out.converged):
        flags[i].append("ellipsoid-iteration-cap")
    return p_pt, p_it, p_j, [tuple(f) for f in flags], out.iterations


def solve_surrogate(rx: ReceiverType, prev_power: PowerAllocation, alpha2: float,
                    channels: ChannelRealization, params: SystemParams,
                    config: SolverConfig | None = None) -> PowerAllocation:
    """Single-instance MM step from a feasible iterate to the surrogate
    maximizer; never returns a surrogate value below the start."""
    gains = ChannelGains.from_realizations([channels])
    p_pt, p_it, p_j, _, _ = solve_surrogate_batch(
        rx, prev_power.p_pt[None, :], prev_power.p_it[None, :], prev_power.p_j[None, :],
        np.array([alpha2]), gains, params, config)
    return PowerAllocation(p_pt=p_pt[0], p_it=p_it[0], p_j=p_j[0])


def initial_iterate_batch(rx, alpha2, gains: ChannelGains, params: SystemParams):
    """Warm start shared with the heuristic solver: harvest-maximal power
    transfer, equal-split jamming over the useful set, equal information
    power over the sub-carriers with a positive rate advantage."""
    alpha2 = np.broadcast_to(np.asarray(alpha2, float), (gains.batch,))
    p_pt, p_eh = heuristic.heuristic_ppt_batch(gains, params)
    p_j = heuristic.heuristic_pj_batch(rx, alpha2, p_eh, gains, params)
    if rx is ReceiverType.TYPE_II:
        a = gains.hd2 / params.sigma_d_sq
    else:
        a = gains.hd2 / (p_j * gains.gd2 + params.sigma_d_sq)
    b = gains.he2 / (p_j * gains.ge2 + params.sigma_e_sq)
    active = a > b
    count = np.sum(active, axis=1)
    budget = np.maximum(params.p_s_total - (1.0 - alpha2) * np.sum(p_pt, axis=1), 0.0) / alpha2
    per = np.where(count > 0, budget / np.maximum(count, 1), 0.0)
    p_it = np.where(active, np.minimum(per[:, None], params.p_s_peak), 0.0)
    return p_pt, p_it, p_j


def solve_inner_mm_batch(rx: ReceiverType, alpha2, gains: ChannelGains, params: SystemParams,
                         config: SolverConfig | None = None) -> InnerBatchResult:
    """Batched MM solve; iterates until the fractional objective increase of
    every row falls below ``eps_m`` or the iteration cap hits."""
    cfg = config or SolverConfig()
    alpha2 = np.broadcast_to(np.asarray(alpha2, float), (gains.batch,)).copy()
    if np.any(alpha2 <= 0.0) or np.any(alpha2 >= 1.0):
        raise ValueError("inner solvers need 0 < alpha2 < 1; the boundary cases are handled by the outer search")

    p_pt, p_it, p_j = initial_iterate_batch(rx, alpha2, gains, params)
    obj = _true_objective_nats(rx, p_it, p_j, gains, params) / LN2
    traces = [[float(v)] for v in obj]
    flags = [set() for _ in range(gains.batch)]
    active = np.ones(gains.batch, dtype=bool)
    iterations = np.zeros(gains.batch, dtype=int)

    for _ in range(cfg.mm_max_iters):
        if not np.any(active):
            break
        idx = np.flatnonzero(active)
        sub = ChannelGains(hj2=gains.hj2[idx], hd2=gains.hd2[idx], he2=gains.he2[idx],
                           gd2=gains.gd2[idx], ge2=gains.ge2[idx])
        n_pt, n_it, n_j, step_flags, _ = solve_surrogate_batch(
            rx, p_pt[idx], p_it[idx], p_j[idx], alpha2[idx], sub, params, cfg)
        new_obj = _true_objective_nats(rx, n_it, n_j, sub, params) / LN2
        frac = (new_obj - obj[idx]) / np.maximum(np.abs(obj[idx]), 1e-12)

        p_pt[idx], p_it[idx], p_j[idx] = n_pt, n_it, n_j
        obj[idx] = new_obj
        iterations[idx] += 1
        for row, fl, tr in zip(idx, step_flags, new_obj):
            traces[row].append(float(tr))
            flags[row].update(fl)
        active[idx] = frac >= cfg.eps_m

    converged = ~active
    for i in np.flatnonzero(active):
        flags[i].add("mm-iteration-cap")

    gap = None
    from .dual import _rate_gap_batch  # local import keeps module load order simple
    rate_gap = _rate_gap_batch(rx, p_it, p_j, gains, params)
    inner_value = np.sum(rate_gap, axis=1)
    secrecy = alpha2 * np.sum(np.maximum(rate_gap, 0.0), axis=1)
    result = InnerBatchResult(
        p_pt=p_pt, p_it=p_it, p_j=p_j, secrecy=secrecy, inner_value=inner_value,
        dual_bound=None, iterations=iterations, converged=converged,
        flags=[tuple(sorted(f)) for f in flags])
    result.traces = [tuple(t) for t in traces]
    return result


def solve_inner_mm(rx: ReceiverType, alpha2: float, channels: ChannelRealization,
                   params: SystemParams, config: SolverConfig | None = None) -> Solution:
    """MM power allocation at a fixed time split; the per-iteration objective
    trace (time-scaled, bits) rides along in the diagnostics."""
    gains = ChannelGains.from_realizations([channels])
    result = solve_inner_mm_batch(rx, np.array([alpha2]), gains, params, config)
    trace = tuple(alpha2 * v for v in result.traces[0])
    diag = SolverDiagnostics(
        solver="mm", iterations=int(result.iterations[0]), converged=bool(result.converged[0]),
        primal_inner_value=float(result.inner_value[0]), flags=result.flags[0], trace=trace)
    power = PowerAllocation(p_pt=result.p_pt[0], p_it=result.p_it[0], p_j=result.p_j[0])
    return Solution(time=TimeSplit(alpha2=alpha2), power=power,
                    secrecy_rate=float(result.secrecy[0]), diagnostics=diag)
