"""Domain types and closed-form physics of the two-slot wireless-powered
cooperative-jamming OFDM link.

Each transmission block is split into a wireless power transfer slot
(fraction ``alpha1``) and an information slot (fraction ``alpha2``).  In the
second slot the source transmits confidential data over ``N`` parallel
sub-carriers while a cooperative jammer spends the energy it harvested in the
first slot on artificial noise directed at the eavesdropper.  Two destination
receiver types are modeled: one that treats the jamming as extra noise and
one that cancels the (a-priori known) jamming waveform before decoding.

Powers are in watts, rates in bits (per unit bandwidth, summed over
sub-carriers).  All types are immutable after construction and every
operation is a pure function, so concurrent use is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

LN2 = float(np.log(2.0))


class ReceiverType(Enum):
    """Destination receiver capability.

    ``TYPE_II`` knows the jamming waveform and cancels it before decoding;
    ``TYPE_I`` cannot and sees the jamming as additional noise.
    """

    TYPE_I = "type1"
    TYPE_II = "type2"


@dataclass(frozen=True)
class SystemParams:
    """Static problem constants.

    ``sigma_d_sq`` and ``sigma_e_sq`` are per-sub-carrier noise powers at the
    destination and the eavesdropper.  ``block_length`` is carried for
    reporting only: it cancels between the harvested energy and the jamming
    energy budget, so no solver ever sees it.
    """

    n_subcarriers: int
    p_s_total: float
    p_s_peak: float
    p_j_peak: float
    sigma_d_sq: float
    sigma_e_sq: float
    eta: float = 0.5
    block_length: float = 1.0

    def __post_init__(self):
        if int(self.n_subcarriers) != self.n_subcarriers or self.n_subcarriers < 1:
            raise ValueError(f"n_subcarriers must be a positive integer, got {self.n_subcarriers}")
        for name in ("p_s_total", "p_s_peak", "p_j_peak", "sigma_d_sq", "sigma_e_sq", "block_length"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class ChannelRealization:
    """The five complex channel vectors of one fading realization.

    ``h_j``, ``h_d``, ``h_e`` are source-to-jammer/destination/eavesdropper;
    ``g_d``, ``g_e`` are jammer-to-destination/eavesdropper.  Only squared
    magnitudes enter any formula.
    """

    h_j: np.ndarray
    h_d: np.ndarray
    h_e: np.ndarray
    g_d: np.ndarray
    g_e: np.ndarray

    def __post_init__(self):
        n = None
        for name in ("h_j", "h_d", "h_e", "g_d", "g_e"):
            vec = np.asarray(getattr(self, name), dtype=np.complex128)
            if vec.ndim != 1:
                raise ValueError(f"{name} must be a 1-D vector")
            if n is None:
                n = vec.shape[0]
            elif vec.shape[0] != n:
                raise ValueError("all channel vectors must share one length")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} contains non-finite entries")
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        if n == 0:
            raise ValueError("channel vectors must be non-empty")

    @property
    def n(self) -> int:
        return self.h_j.shape[0]

    # squared-magnitude views used throughout the solvers
    @property
    def h_j_sq(self) -> np.ndarray:
        return np.abs(self.h_j) ** 2

    @property
    def h_d_sq(self) -> np.ndarray:
        return np.abs(self.h_d) ** 2

    @property
    def h_e_sq(self) -> np.ndarray:
        return np.abs(self.h_e) ** 2

    @property
    def g_d_sq(self) -> np.ndarray:
        return np.abs(self.g_d) ** 2

    @property
    def g_e_sq(self) -> np.ndarray:
        return np.abs(self.g_e) ** 2


@dataclass(frozen=True)
class ChannelGains:
    """Squared channel magnitudes for a batch of realizations, shape (B, N).

    Internal working representation shared by the batched solver paths; a
    batch of one wraps a single :class:`ChannelRealization`.
    """

    hj2: np.ndarray
    hd2: np.ndarray
    he2: np.ndarray
    gd2: np.ndarray
    ge2: np.ndarray

    @classmethod
    def from_realizations(cls, realizations) -> "ChannelGains":
        def stack(attr):
            arr = np.stack([getattr(ch, attr) for ch in realizations])
            arr.setflags(write=False)
            return arr

        return cls(
            hj2=stack("h_j_sq"),
            hd2=stack("h_d_sq"),
            he2=stack("h_e_sq"),
            gd2=stack("g_d_sq"),
            ge2=stack("g_e_sq"),
        )

    @property
    def batch(self) -> int:
        return self.hj2.shape[0]

    @property
    def n(self) -> int:
        return self.hj2.shape[1]


@dataclass(frozen=True)
class TimeSplit:
    """Block time split; ``alpha1`` is derived so the two always sum to one."""

    alpha2: float

    def __post_init__(self):
        if not 0.0 <= self.alpha2 <= 1.0:
            raise ValueError(f"alpha2 must lie in [0, 1], got {self.alpha2}")

    @property
    def alpha1(self) -> float:
        return 1.0 - self.alpha2


@dataclass(frozen=True)
class PowerAllocation:
    """Per-sub-carrier powers: ``p_pt`` (power transfer), ``p_it``
    (information), ``p_j`` (jamming).

    Entries must be finite and non-negative; peak-power and coupling
    constraints depend on :class:`SystemParams` and are checked by
    :func:`check_feasible`.
    """

    p_pt: np.ndarray
    p_it: np.ndarray
    p_j: np.ndarray

    def __post_init__(self):
        n = None
        for name in ("p_pt", "p_it", "p_j"):
            vec = np.asarray(getattr(self, name), dtype=float)
            if vec.ndim != 1:
                raise ValueError(f"{name} must be a 1-D vector")
            if n is None:
                n = vec.shape[0]
            elif vec.shape[0] != n:
                raise ValueError("all power vectors must share one length")
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"{name} contains non-finite entries")
            if np.any(vec < 0.0):
                raise ValueError(f"{name} contains negative powers")
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)


@dataclass(frozen=True)
class SolverDiagnostics:
    """Bookkeeping attached to every solver output."""

    solver: str
    iterations: int = 0
    converged: bool = True
    dual_bound: float | None = None
    primal_inner_value: float | None = None
    rel_duality_gap: float | None = None
    flags: tuple[str, ...] = ()
    trace: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Solution:
    """A time split plus power allocation and the secrecy rate it achieves.

    ``secrecy_rate`` is the reported value: the information-slot fraction
    times the sum over sub-carriers of the clipped-at-zero rate advantage of
    the destination over the eavesdropper.
    """

    time: TimeSplit
    power: PowerAllocation
    secrecy_rate: float
    diagnostics: SolverDiagnostics

    def __post_init__(self):
        if not np.isfinite(self.secrecy_rate) or self.secrecy_rate < 0.0:
            raise ValueError(f"secrecy_rate must be finite and >= 0, got {self.secrecy_rate}")


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    violations: tuple[str, ...] = ()


def _power_vector(p, n, name):
    vec = np.asarray(p, dtype=float)
    if vec.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {vec.shape}")
    if np.any(vec < 0.0) or not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} entries must be finite and >= 0")
    return vec


def harvested_energy(time: TimeSplit, p_pt, channels: ChannelRealization, params: SystemParams) -> float:
    """Energy collected by the jammer during the power-transfer slot, joules."""
    p = _power_vector(p_pt, params.n_subcarriers, "p_pt")
    if channels.n != params.n_subcarriers:
        raise ValueError("channel length does not match n_subcarriers")
    return time.alpha1 * params.block_length * params.eta * float(p @ channels.h_j_sq)


def rate_sd(rx: ReceiverType, alpha2, p_it_n, p_j_n, h_d_sq, g_d_sq, params: SystemParams):
    """Per-sub-carrier rate to the destination, bits.

    A jamming-cancelling receiver sees only thermal noise; otherwise the
    jamming power raises the noise floor.
    """
    if rx is ReceiverType.TYPE_II:
        denom = params.sigma_d_sq
    else:
        denom = np.asarray(p_j_n, float) * np.asarray(g_d_sq, float) + params.sigma_d_sq
    return alpha2 * np.log2(1.0 + np.asarray(p_it_n, float) * np.asarray(h_d_sq, float) / denom)


def rate_se(alpha2, p_it_n, p_j_n, h_e_sq, g_e_sq, params: SystemParams):
    """Per-sub-carrier rate leaked to the eavesdropper, bits."""
    denom = np.asarray(p_j_n, float) * np.asarray(g_e_sq, float) + params.sigma_e_sq
    return alpha2 * np.log2(1.0 + np.asarray(p_it_n, float) * np.asarray(h_e_sq, float) / denom)


def per_carrier_rate_gap(rx: ReceiverType, p_it, p_j, channels: ChannelRealization, params: SystemParams) -> np.ndarray:
    """Raw per-sub-carrier rate advantage of the destination, bits, without
    the time-slot scaling and without clipping at zero."""
    p_it = np.asarray(p_it, float)
    p_j = np.asarray(p_j, float)
    if rx is ReceiverType.TYPE_II:
        denom_d = params.sigma_d_sq
    else:
        denom_d = p_j * channels.g_d_sq + params.sigma_d_sq
    sd = np.log2(1.0 + p_it * channels.h_d_sq / denom_d)
    se = np.log2(1.0 + p_it * channels.h_e_sq / (p_j * channels.g_e_sq + params.sigma_e_sq))
    return sd - se


def inner_objective(rx: ReceiverType, p_it, p_j, channels: ChannelRealization, params: SystemParams) -> float:
    """Sum of the raw per-sub-carrier rate gaps (solver-internal objective)."""
    return float(np.sum(per_carrier_rate_gap(rx, p_it, p_j, channels, params)))


def secrecy_rate(rx: ReceiverType, time: TimeSplit, power: PowerAllocation,
                 channels: ChannelRealization, params: SystemParams) -> float:
    """Reported secrecy rate: alpha2 times the clipped-at-zero sum of
    per-sub-carrier rate gaps, bits."""
    gap = per_carrier_rate_gap(rx, power.p_it, power.p_j, channels, params)
    return time.alpha2 * float(np.sum(np.maximum(gap, 0.0)))


def _exceeds(lhs: float, rhs: float, tol: float) -> bool:
    # relative tolerance so exact boundary points stay feasible at tol=0
    return lhs - rhs > tol * max(abs(lhs), abs(rhs))


def check_feasible(time: TimeSplit, power: PowerAllocation, channels: ChannelRealization,
                   params: SystemParams, tol: float = 1e-9) -> FeasibilityReport:
    """Verify the sum-power budget, the per-sub-carrier peaks, and the
    harvested-energy budget at relative tolerance ``tol``.

    The block length cancels from the energy budget, so the outcome does not
    depend on it.
    """
    v: list[str] = []
    n = params.n_subcarriers
    for name in ("p_pt", "p_it", "p_j"):
        vec = getattr(power, name)
        if vec.shape != (n,):
            raise ValueError(f"{name} must have shape ({n},)")
    a1, a2 = time.alpha1, time.alpha2

    spend = a1 * float(np.sum(power.p_pt)) + a2 * float(np.sum(power.p_it))
    if _exceeds(spend, params.p_s_total, tol):
        v.append(f"sum-power: {spend:.6g} > budget {params.p_s_total:.6g}")

    for name, peak in (("p_pt", params.p_s_peak), ("p_it", params.p_s_peak), ("p_j", params.p_j_peak)):
        worst = float(np.max(getattr(power, name), initial=0.0))
        if _exceeds(worst, peak, tol):
            v.append(f"{name}-peak: {worst:.6g} > {peak:.6g}")

    jam = a2 * float(np.sum(power.p_j))
    harvest = a1 * params.eta * float(power.p_pt @ channels.h_j_sq)
    if _exceeds(jam, harvest, tol):
        v.append(f"harvest: jamming energy {jam:.6g} > harvested {harvest:.6g}")

    return FeasibilityReport(ok=not v, violations=tuple(v))
