"""Smartphone energy/latency model and battery accounting.

Per-byte costs in joules and link rates for 3G and Bluetooth:

    mode        download      upload       rate
    3G          0.001224      0.0003375    2 Mb/s
    Bluetooth   0.0001377     0.00012012   1 Mb/s
"""

from __future__ import annotations

import random
from dataclasses import dataclass

THREEG = "3g"
BLUETOOTH = "bluetooth"
UPLOAD = "upload"
DOWNLOAD = "download"


class Drained(Exception):
    """A debit exceeded the remaining charge; the battery is now empty."""

    def __init__(self, spent_j: float) -> None:
        super().__init__(f"battery drained after spending {spent_j:.6g} J")
        self.spent_j = spent_j


@dataclass(frozen=True)
class EnergyModel:
    threeg_download: float = 0.001224
    threeg_upload: float = 0.0003375
    bluetooth_download: float = 0.0001377
    bluetooth_upload: float = 0.00012012
    threeg_rate_bps: float = 2_000_000.0
    bluetooth_rate_bps: float = 1_000_000.0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if not value > 0:
                raise ValueError(f"energy model field {name} must be positive, got {value}")

    def coefficient(self, mode: str, direction: str) -> float:
        try:
            return {
                (THREEG, DOWNLOAD): self.threeg_download,
                (THREEG, UPLOAD): self.threeg_upload,
                (BLUETOOTH, DOWNLOAD): self.bluetooth_download,
                (BLUETOOTH, UPLOAD): self.bluetooth_upload,
            }[(mode, direction)]
        except KeyError:
            raise ValueError(f"unknown link {mode}/{direction}") from None

    def rate(self, mode: str) -> float:
        if mode == THREEG:
            return self.threeg_rate_bps
        if mode == BLUETOOTH:
            return self.bluetooth_rate_bps
        raise ValueError(f"unknown mode {mode!r}")


def tx_energy(m: EnergyModel, mode: str, direction: str, nbytes: float) -> float:
    if nbytes < 0:
        raise ValueError("byte count must be non-negative")
    return m.coefficient(mode, direction) * nbytes


def tx_time(m: EnergyModel, mode: str, nbytes: float) -> float:
    if nbytes < 0:
        raise ValueError("byte count must be non-negative")
    return nbytes * 8 / m.rate(mode)


QUANTA_PER_J = 100_000_000


def to_quanta(joules: float) -> int:
    """Joules rounded to the 10 nJ accounting grain used by every battery."""
    return round(joules * QUANTA_PER_J)


def to_joules(quanta: int) -> float:
    return quanta / QUANTA_PER_J


class Battery:
    """Phone battery; charge is kept in integer quanta so the ledger balances exactly."""

    __slots__ = ("_q", "_initial_q", "capacity_j", "drained")

    def __init__(self, remaining_j: float, capacity_j: float) -> None:
        if not 0 <= remaining_j <= capacity_j:
            raise ValueError(f"battery charge {remaining_j} outside [0, {capacity_j}]")
        self._q = self._initial_q = to_quanta(remaining_j)
        self.capacity_j = capacity_j
        self.drained = False

    @property
    def remaining_j(self) -> float:
        return to_joules(self._q)

    @property
    def remaining_q(self) -> int:
        return self._q

    @property
    def initial_q(self) -> int:
        return self._initial_q

    @property
    def spent_q(self) -> int:
        return self._initial_q - self._q

    @property
    def spent_j(self) -> float:
        return to_joules(self.spent_q)

    def __repr__(self) -> str:
        return f"Battery(remaining_j={self.remaining_j!r}, capacity_j={self.capacity_j!r}, drained={self.drained})"


def debit(b: Battery, joules: float) -> Battery:
    """Take ``joules`` from ``b``; overdrawing empties it and raises :class:`Drained`.

    A debit that lands exactly on zero also counts as draining the phone.
    """
    if joules < 0:
        raise ValueError("cannot debit a negative amount")
    q = to_quanta(joules)
    if q >= b._q and (q > 0 or b._q == 0):
        spent = b._q
        b._q = 0
        b.drained = True
        raise Drained(to_joules(spent))
    b._q -= q
    return b


@dataclass(frozen=True)
class BatteryParams:
    battery_mean_j: float = 1500.0
    battery_sd_j: float = 500.0
    battery_min_j: float = 100.0
    battery_max_j: float = 3000.0

    def __post_init__(self) -> None:
        if not 0 < self.battery_min_j <= self.battery_mean_j <= self.battery_max_j:
            raise ValueError("energy battery bounds must satisfy 0 < min <= mean <= max")
        if self.battery_sd_j < 0:
            raise ValueError("energy.battery_sd_j must be non-negative")


def sample_initial_battery(
    rng: random.Random,
    mean_j: float = 1500.0,
    sd_j: float = 500.0,
    min_j: float = 100.0,
    max_j: float = 3000.0,
) -> Battery:
    """Truncated-normal charge, resampled until it falls in ``[min_j, max_j]``."""
    if not 0 < min_j <= mean_j <= max_j:
        raise ValueError("need 0 < min_j <= mean_j <= max_j")
    if sd_j == 0:
        return Battery(remaining_j=mean_j, capacity_j=max_j)
    while True:
        x = rng.gauss(mean_j, sd_j)
        if min_j <= x <= max_j:
            return Battery(remaining_j=x, capacity_j=max_j)
