"""Seeded generation of fading realizations from a line geometry.

Every channel entry is drawn as a circularly-symmetric complex Gaussian whose
variance follows a power-law path loss in the link distance.  Generation uses
numpy's counter-based Philox engine keyed by ``(rng_seed,
realization_index)``, so realization ``k`` is bit-exact reproducible and
independent of how many other realizations were drawn before it.  For each
realization the five links are filled in the fixed order ``h_j, h_d, h_e,
g_d, g_e``; each link draws its N real parts, then its N imaginary parts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import ChannelRealization, SystemParams

DUMP_VERSION = 1
_LINK_ATTRS = ("h_j", "h_d", "h_e", "g_d", "g_e")


class Link(Enum):
    SJ = "sj"
    SD = "sd"
    SE = "se"
    JD = "jd"
    JE = "je"


@dataclass(frozen=True)
class Geometry:
    """Node layout: the jammer sits on the segment between the source and the
    co-located destination/eavesdropper directions, so the jammer-side
    distances are differences of the source-side ones."""

    d_sj: float
    d_sd: float
    d_se: float
    zeta0: float = 1e-3
    d0: float = 1.0
    kappa: float = 3.0

    def __post_init__(self):
        for name in ("d_sj", "d_sd", "d_se", "d0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.d_sj >= min(self.d_sd, self.d_se):
            raise ValueError("d_sj must be smaller than both d_sd and d_se")
        if self.zeta0 <= 0.0:
            raise ValueError("zeta0 must be positive")

    @property
    def d_jd(self) -> float:
        return self.d_sd - self.d_sj

    @property
    def d_je(self) -> float:
        return self.d_se - self.d_sj


@dataclass(frozen=True)
class Seed:
    """Key of one reproducible realization stream."""

    rng_seed: int
    realization_index: int = 0

    def __post_init__(self):
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit in 64 unsigned bits")
        if self.realization_index < 0:
            raise ValueError("realization_index must be non-negative")


def _link_distance(link: Link, geometry: Geometry) -> float:
    return {
        Link.SJ: geometry.d_sj,
        Link.SD: geometry.d_sd,
        Link.SE: geometry.d_se,
        Link.JD: geometry.d_jd,
        Link.JE: geometry.d_je,
    }[link]


def variance_for(link: Link, geometry: Geometry) -> float:
    """Channel-gain variance of one link: reference loss scaled by the
    distance power law."""
    d = _link_distance(link, geometry)
    if d <= 0.0:
        raise ValueError(f"non-positive distance for link {link.name}")
    return geometry.zeta0 * (d / geometry.d0) ** (-geometry.kappa)


_LINK_ORDER = (Link.SJ, Link.SD, Link.SE, Link.JD, Link.JE)


def sample_channels(geometry: Geometry, params: SystemParams, seed: Seed) -> ChannelRealization:
    """Draw one realization; same ``(rng_seed, realization_index)`` always
    yields bit-identical vectors."""
    gen = np.random.Generator(
        np.random.Philox(key=np.array([seed.rng_seed, seed.realization_index], dtype=np.uint64))
    )
    n = params.n_subcarriers
    vecs = []
    for link in _LINK_ORDER:
        scale = np.sqrt(variance_for(link, geometry) / 2.0)
        re = gen.standard_normal(n)
        im = gen.standard_normal(n)
        vecs.append(scale * (re + 1j * im))
    return ChannelRealization(*vecs)


def sample_many(geometry: Geometry, params: SystemParams, rng_seed: int, indices) -> list[ChannelRealization]:
    """Independent realizations for each index, in the given order."""
    return [sample_channels(geometry, params, Seed(rng_seed, int(i))) for i in indices]


def channel_digest(ch: ChannelRealization) -> str:
    """Short stable fingerprint of a realization, used to verify that paired
    schemes saw identical channels."""
    h = hashlib.sha256()
    for attr in _LINK_ATTRS:
        h.update(np.ascontiguousarray(getattr(ch, attr)).tobytes())
    return h.hexdigest()[:16]


def dump_channels(path, records) -> None:
    """Write ``(index, realization)`` pairs as a self-describing text file.

    Line format after the header: the realization index followed by
    ``re im`` pairs for every sub-carrier of every link, links in the order
    ``h_j, h_d, h_e, g_d, g_e``.
    """
    records = list(records)
    if not records:
        raise ValueError("no channel records to dump")
    n = records[0][1].n
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# wpcjam-channels v{DUMP_VERSION}\n")
        fh.write(f"# n_subcarriers={n} links={','.join(_LINK_ATTRS)} layout=index then re,im per sub-carrier per link\n")
        for index, ch in records:
            if ch.n != n:
                raise ValueError("all records must share one sub-carrier count")
            parts = [str(int(index))]
            for attr in _LINK_ATTRS:
                vec = getattr(ch, attr)
                for z in vec:
                    parts.append(repr(float(z.real)))
                    parts.append(repr(float(z.imag)))
            fh.write(" ".join(parts) + "\n")


def load_channels(path) -> list[tuple[int, ChannelRealization]]:
    """Read a file written by :func:`dump_channels`, bit-exact."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != f"# wpcjam-channels v{DUMP_VERSION}":
            raise ValueError(f"unsupported channel dump header: {header!r}")
        meta = fh.readline().strip()
        if not meta.startswith("# n_subcarriers="):
            raise ValueError("missing channel dump metadata line")
        n = int(meta.split("n_subcarriers=")[1].split()[0])
        records = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 1 + 10 * n:
                raise ValueError(f"malformed channel record with {len(fields)} fields")
            index = int(fields[0])
            vals = np.array([float(x) for x in fields[1:]])
            vecs = []
            for k in range(5):
                block = vals[k * 2 * n:(k + 1) * 2 * n]
                vecs.append(block[0::2] + 1j * block[1::2])
            records.append((index, ChannelRealization(*vecs)))
    return records
