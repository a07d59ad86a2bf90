"""Link budget and energy accounting.

All quantities are linear SI units. Noise given in dBm is converted once
with :func:`dbm_to_watts` when parameters are built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import DomainError


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


@dataclass(frozen=True)
class ChannelParams:
    theta: float = 2.0
    f: float = 2.4e9
    c: float = 3e8
    noise_power: float = dbm_to_watts(-110.0)
    bandwidth: float = 2e6
    tx_power: float = 0.1

    def __post_init__(self):
        for name in ("theta", "f", "c", "noise_power", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.tx_power < 0:
            raise ValueError("tx_power must be non-negative")


@dataclass(frozen=True)
class EnergyParams:
    E_elec: float = 1.5e-4
    xi_fs: float = 2.5e-8
    M: float = 2.0
    g: float = 9.8
    P_b: float = 9.1827
    P_I: float = 11.5274
    U_tip: float = 60.0
    v0: float = 2.4868
    d0: float = 0.5017
    rho: float = 1.205
    s0: float = 0.0832
    A0: float = 0.2827
    beta: float = 0.7
    E_max: float = 5000.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"{name} must be positive")
        if self.beta > 1:
            raise ValueError("beta must lie in (0, 1]")

    @property
    def budget(self) -> float:
        return self.beta * self.E_max


def path_loss(d: float, p: ChannelParams) -> float:
    """Free-space loss ``d**theta * (4*pi*f/c)**2`` (linear)."""
    if not d > 0:
        raise DomainError(f"distance must be positive, got {d}")
    return d ** p.theta * (4.0 * math.pi * p.f / p.c) ** 2


def snr(d: float, p: ChannelParams) -> float:
    return p.tx_power / (p.noise_power * path_loss(d, p))


def link_rate(d: float, p: ChannelParams) -> float:
    """Shannon rate in bit/s."""
    return p.bandwidth * math.log2(1.0 + snr(d, p))


def check_link_capacity(sizes: Iterable[float], rate: float, tau: float) -> bool:
    """True when the bits pushed over one link fit into one slot."""
    return sum(sizes) <= tau * rate


def comm_energy(
    received: Iterable[float],
    transmitted: Iterable[tuple[float, float]],
    ep: EnergyParams,
) -> float:
    """Radio energy for one slot.

    ``received`` holds demand sizes in bits, ``transmitted`` holds
    ``(size_bits, hop_distance_m)`` pairs.
    """
    e_re = sum(L * ep.E_elec for L in received)
    e_tr = 0.0
    for L, d in transmitted:
        if not d > 0:
            raise DomainError(f"transmission distance must be positive, got {d}")
        e_tr += L * (ep.E_elec + ep.xi_fs * d * d)
    return e_re + e_tr


def tx_energy(size_bits: float, d: float, ep: EnergyParams) -> float:
    return size_bits * (ep.E_elec + ep.xi_fs * d * d)


def rx_energy(size_bits: float, ep: EnergyParams) -> float:
    return size_bits * ep.E_elec


def hover_power(v: float, ep: EnergyParams) -> float:
    """Propulsion power at speed ``v`` using the printed induced-power term.

    The induced term is ``P_I * (sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^4))**0.5``
    exactly as stated; a negative radicand raises :class:`DomainError`.
    """
    if v < 0:
        raise DomainError("speed must be non-negative")
    v2 = v * v
    blade = ep.P_b * (1.0 + 3.0 * v2 / ep.U_tip**2)
    radicand = math.sqrt(1.0 + v2 * v2 / (4.0 * ep.v0**4)) - v2 / (2.0 * ep.v0**4)
    if radicand < 0:
        raise DomainError(f"induced-power radicand negative at v={v}")
    induced = ep.P_I * math.sqrt(radicand)
    parasite = 0.5 * ep.d0 * ep.rho * ep.s0 * ep.A0 * v2 * v
    return blade + induced + parasite


def mobility_energy(v: float, delta_z: float, tau: float, ep: EnergyParams, v_start: float | None = None, v_end: float | None = None) -> float:
    """Propulsion, kinetic and potential energy over one constant-speed slot.

    ``v`` is the cruise speed; ``v_start``/``v_end`` default to ``v`` so the
    kinetic term vanishes unless a speed change is given.
    """
    if not tau > 0:
        raise DomainError("tau must be positive")
    vs = v if v_start is None else v_start
    ve = v if v_end is None else v_end
    return hover_power(v, ep) * tau + 0.5 * ep.M * (ve * ve - vs * vs) + ep.g * ep.M * delta_z


def check_energy_budget(e_con: float, ep: EnergyParams) -> bool:
    return e_con <= ep.beta * ep.E_max
