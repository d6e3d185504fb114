"""Behavioral single-branch conduction model with device-to-device variation.

A branch is one FeFET in series with a resistor. Above threshold the series
resistor linearizes the on-current to vds/R (capped by the saturation
current); below threshold the branch is treated as fully off. Multi-level
behavior comes entirely from the stored threshold voltage, the applied gate
voltage and the drain multiple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ISAT = 10e-6  # far above any unit-current multiple in use
MIN_RESISTANCE_FACTOR = 0.01


@dataclass(frozen=True)
class FeFETState:
    """Electrical state of one programmed branch."""

    vth: float
    resistance: float
    isat: float = DEFAULT_ISAT

    def __post_init__(self) -> None:
        if self.resistance <= 0:
            raise ValueError("resistance must be positive")
        if self.isat <= 0:
            raise ValueError("isat must be positive")


@dataclass(frozen=True)
class VariationParams:
    """Gaussian device-to-device spread and the seed of its sampling stream."""

    sigma_vth: float = 0.0
    sigma_r_rel: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_vth < 0 or self.sigma_r_rel < 0:
            raise ValueError("sigmas must be nonnegative")


def conduct(vgs: float, vds: float, state: FeFETState) -> float:
    """Branch current: ohmic vds/R capped at saturation when on, else 0.

    The switch at vth is hard; subthreshold leakage is not modeled.
    """
    if vds < 0:
        raise ValueError("vds must be nonnegative")
    if vgs <= state.vth:
        return 0.0
    return min(state.isat, vds / state.resistance)


def sample_variation(
    nominal: FeFETState, params: VariationParams, rng: np.random.Generator
) -> FeFETState:
    """Draw one perturbed device state.

    Threshold shifts by N(0, sigma_vth); resistance scales by 1 + N(0,
    sigma_r_rel), clamped to 1% of nominal so it stays physical. Saturation
    current is unchanged. Zero sigmas consume no randomness and return the
    nominal state.
    """
    vth = nominal.vth
    if params.sigma_vth > 0:
        vth = vth + rng.normal(0.0, params.sigma_vth)
    factor = 1.0
    if params.sigma_r_rel > 0:
        factor = max(1.0 + rng.normal(0.0, params.sigma_r_rel), MIN_RESISTANCE_FACTOR)
    return FeFETState(vth=vth, resistance=nominal.resistance * factor, isat=nominal.isat)
