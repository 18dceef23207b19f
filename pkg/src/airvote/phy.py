"""Sign-to-subcarrier encoding and transmit power control.

Every gradient coordinate owns a pair of adjacent subcarriers in an OFDM
frame.  A device signals +1 by putting energy on the even bin of the pair
and -1 by using the odd bin; the amplitude carries a fresh unit-circle
randomization symbol so that simultaneous transmissions add up
non-coherently at the receiver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Per-coordinate transmit energy: the single active bin carries sqrt(2).
SYMBOL_ENERGY = 2.0


@dataclass(frozen=True)
class SubcarrierMap:
    """Coordinate-to-bin assignment; arrays are indexed by coordinate."""

    sym_plus: np.ndarray
    sub_plus: np.ndarray
    sym_minus: np.ndarray
    sub_minus: np.ndarray
    num_subcarriers: int
    num_symbols: int

    @property
    def num_coordinates(self) -> int:
        return self.sym_plus.size

    def grid_shape(self) -> tuple[int, int]:
        return (self.num_symbols, self.num_subcarriers)


def build_subcarrier_map(num_coordinates: int, num_subcarriers: int, num_symbols: int) -> SubcarrierMap:
    """Row-major layout: coordinate j sits on bins (j // (A/2), 2k) and
    (j // (A/2), 2k + 1) with k = j mod (A/2), i.e. adjacent even/odd
    subcarriers of the same symbol."""
    if num_coordinates < 1:
        raise ValueError("num_coordinates must be positive")
    if num_subcarriers < 2 or num_subcarriers % 2:
        raise ValueError("num_subcarriers must be a positive even number")
    if num_symbols < 1:
        raise ValueError("num_symbols must be positive")
    capacity = num_subcarriers * num_symbols
    if 2 * num_coordinates > capacity:
        raise ValueError(
            f"{num_coordinates} coordinates need {2 * num_coordinates} bins, "
            f"but a {num_symbols} x {num_subcarriers} frame provides {capacity}"
        )
    j = np.arange(num_coordinates)
    pairs_per_symbol = num_subcarriers // 2
    sym = j // pairs_per_symbol
    sub_even = 2 * (j % pairs_per_symbol)
    return SubcarrierMap(
        sym_plus=sym,
        sub_plus=sub_even,
        sym_minus=sym.copy(),
        sub_minus=sub_even + 1,
        num_subcarriers=num_subcarriers,
        num_symbols=num_symbols,
    )


def encode_signs(signs, mapping: SubcarrierMap, seed, randomize: bool = True) -> np.ndarray:
    """Frequency-domain frame for one device's sign vector.

    The bin matching each sign holds sqrt(SYMBOL_ENERGY) * exp(j*phi) with
    phi uniform on [0, 2*pi); the paired bin stays zero.  Transmit power is
    applied later, during superposition.  randomize=False pins every
    randomization symbol to 1 and exists only for detection-oracle tests.
    """
    signs = np.asarray(signs)
    if signs.size != mapping.num_coordinates:
        raise ValueError(
            f"{signs.size} signs for a map of {mapping.num_coordinates} coordinates"
        )
    if not np.all(np.abs(signs) == 1):
        raise ValueError("signs must be exactly -1 or +1")
    if randomize:
        rng = np.random.default_rng(seed)
        symbols = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=signs.size))
    else:
        symbols = np.ones(signs.size, dtype=np.complex128)
    frame = np.zeros(mapping.grid_shape(), dtype=np.complex128)
    amplitude = np.sqrt(SYMBOL_ENERGY) * symbols
    positive = signs > 0
    frame[mapping.sym_plus[positive], mapping.sub_plus[positive]] = amplitude[positive]
    frame[mapping.sym_minus[~positive], mapping.sub_minus[~positive]] = amplitude[~positive]
    return frame


# ---------------------------------------------------------------------------
# Dynamic power control
# ---------------------------------------------------------------------------

@dataclass
class PowerState:
    """Per-device transmit power multipliers; starts at 1 everywhere."""

    powers: np.ndarray
    round: int = 0

    def __post_init__(self):
        self.powers = np.asarray(self.powers, dtype=np.float64)


def initial_power_state(num_devices: int) -> PowerState:
    if num_devices < 1:
        raise ValueError("num_devices must be positive")
    return PowerState(np.ones(num_devices), 0)


def signed_agreement(reports, vote) -> np.ndarray:
    """Per-device mean of [matches vote] - [differs from vote], in [-1, 1].

    The power update uses only the magnitude of this statistic, so a device
    that opposes the vote everywhere is boosted exactly like one that agrees
    everywhere; this helper keeps the signed value observable.
    """
    reports = np.atleast_2d(np.asarray(reports))
    vote = np.asarray(vote)
    if reports.shape[1] != vote.size:
        raise ValueError("report length does not match vote length")
    agree = np.mean(reports == vote, axis=1)
    return 2.0 * agree - 1.0


def update_power(state: PowerState, reports, vote, power_cap: float | None = None) -> PowerState:
    """Raise each device's power by |signed agreement with the vote|.

    Increments lie in [0, 1], so powers never decrease; an optional cap
    clamps the growth (off by default).
    """
    increments = np.abs(signed_agreement(reports, vote))
    if increments.size != state.powers.size:
        raise ValueError(
            f"{increments.size} reports for a power state of {state.powers.size} devices"
        )
    powers = state.powers + increments
    if power_cap is not None:
        powers = np.minimum(powers, power_cap)
    return PowerState(powers, state.round + 1)


def mean_power(state: PowerState) -> float:
    """Average transmit power across devices."""
    if state.powers.size == 0:
        raise ValueError("empty power state")
    return float(np.mean(state.powers))
