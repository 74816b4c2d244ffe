"""Link-budget physics: free-space loss and per-interaction losses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..scene import Material
from .config import SolverConfig

SPEED_OF_LIGHT = 299_792_458.0
VACUUM_PERMITTIVITY = 8.8541878128e-12


def fspl_db(distance, frequency):
    """20*log10(4*pi*d*f/c); vectorised over ``distance``."""
    return 20.0 * np.log10(4.0 * np.pi * np.asarray(distance, dtype=float) * frequency / SPEED_OF_LIGHT)


def wavelength(frequency: float) -> float:
    return SPEED_OF_LIGHT / frequency


def complex_permittivity(material: Material, frequency: float) -> complex:
    sigma = material.conductivity(frequency)
    return complex(material.relative_permittivity, -sigma / (2.0 * math.pi * frequency * VACUUM_PERMITTIVITY))


def reflection_power(material: Material, frequency: float, cos_incidence) -> np.ndarray:
    """Unpolarised Fresnel power reflectance, ``(|Gamma_TE|^2 + |Gamma_TM|^2) / 2``."""
    eta = complex_permittivity(material, frequency)
    c = np.clip(np.abs(np.asarray(cos_incidence, dtype=float)), 0.0, 1.0)
    root = np.sqrt(eta - (1.0 - c * c) + 0j)
    te = (c - root) / (c + root)
    tm = (eta * c - root) / (eta * c + root)
    return 0.5 * (np.abs(te) ** 2 + np.abs(tm) ** 2)


def transmission_loss_db(material: Material, cfg: SolverConfig) -> float:
    """Loss per wall crossing: normal-incidence Fresnel transmittance plus a fixed penalty."""
    t = 1.0 - float(reflection_power(material, cfg.frequency, 1.0))
    return 10.0 * math.log10(t) - cfg.wall_penalty_db


def specular_split(cfg: SolverConfig) -> float:
    """Fraction of reflected power kept by the specular lobe."""
    if cfg.diffuse_reflection:
        return 1.0 - cfg.scattering_coefficient ** 2
    return 1.0


@dataclass(frozen=True)
class Interaction:
    kind: str  # "specular" | "transmission" | "diffuse"
    cos_incidence: float = 1.0
    loss_db: float | None = None  # required for "diffuse"


def interaction_loss_db(it: Interaction, cfg: SolverConfig, material: Material) -> float:
    if it.kind == "specular":
        r = float(reflection_power(material, cfg.frequency, it.cos_incidence)) * specular_split(cfg)
        return 10.0 * math.log10(r) if r > 0 else -math.inf
    if it.kind == "transmission":
        return transmission_loss_db(material, cfg)
    if it.kind == "diffuse":
        if it.loss_db is None:
            raise ValueError("diffuse interaction needs an explicit loss_db")
        return min(0.0, float(it.loss_db))
    raise ValueError(f"unknown interaction kind {it.kind!r}")


def path_gain_db(total_length: float, interactions: Sequence[Interaction], cfg: SolverConfig,
                 material: Material) -> float:
    """Free-space gain over the unfolded length plus every interaction loss."""
    if not total_length > 0:
        raise ValueError("path length must be positive")
    g = -float(fspl_db(total_length, cfg.frequency))
    for it in interactions:
        g += interaction_loss_db(it, cfg, material)
    return g


def diffuse_loss_db(power_fraction, cos_scatter, r_in, r_out, frequency: float) -> np.ndarray:
    """Loss of a Lambertian scatterer relative to free space over ``r_in + r_out``.

    ``power_fraction`` is the share of isotropic transmit power the scatterer
    re-radiates.  A Lambertian lobe at distance ``r_out`` delivers
    ``P * cos / pi * lambda^2 / (4 pi r_out^2)`` to an isotropic receiver.
    The result is clamped at 0 dB so no diffuse path beats free space.
    """
    lam = wavelength(frequency)
    p = np.asarray(power_fraction, dtype=float)
    cos_s = np.asarray(cos_scatter, dtype=float)
    r_out = np.asarray(r_out, dtype=float)
    g = p * cos_s / np.pi * lam ** 2 / (4.0 * np.pi * r_out ** 2)
    fs = (lam / (4.0 * np.pi * (np.asarray(r_in, dtype=float) + r_out))) ** 2
    with np.errstate(divide="ignore"):
        return np.minimum(10.0 * np.log10(g / fs), 0.0)
