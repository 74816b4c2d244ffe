"""Antenna radiation patterns and device orientation.

Local frame: boresight along +x, zenith along +z.  A device with
orientation ``(azimuth, tilt, roll)`` maps local to world coordinates by

    R = Rz(azimuth) @ Ry(-tilt) @ Rx(roll)

so azimuth turns counter-clockwise from east, and negative tilt points the
boresight below the horizon.  Dipoles lie along the local z axis.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

GAIN_FLOOR_DBI = -300.0

HW_DIPOLE_PEAK = 1.643
TR38901_BEAMWIDTH = 65.0
TR38901_SLA = 30.0
TR38901_AMAX = 30.0
TR38901_GMAX = 8.0


class Pattern(str, enum.Enum):
    ISO = "iso"
    DIPOLE = "dipole"
    HW_DIPOLE = "hw_dipole"
    TR38901 = "tr38901"

    @classmethod
    def parse(cls, value) -> "Pattern":
        if isinstance(value, Pattern):
            return value
        key = str(value).strip().lower()
        for p in cls:
            if key in (p.value, p.name.lower()):
                return p
        raise ValueError(f"unknown antenna pattern {value!r}")


@dataclass(frozen=True)
class Orientation:
    azimuth: float = 0.0
    tilt: float = 0.0
    roll: float = 0.0

    def __post_init__(self) -> None:
        for name in ("azimuth", "tilt", "roll"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "azimuth", float(self.azimuth) % 360.0)

    def matrix(self) -> np.ndarray:
        """Local-to-world rotation."""
        return _rz(math.radians(self.azimuth)) @ _ry(-math.radians(self.tilt)) @ _rx(math.radians(self.roll))


@dataclass(frozen=True)
class AntennaConfig:
    pattern: Pattern = Pattern.ISO
    orientation: Orientation = field(default_factory=Orientation)

    def __post_init__(self) -> None:
        object.__setattr__(self, "pattern", Pattern.parse(self.pattern))

    def to_dict(self) -> dict:
        o = self.orientation
        return {"pattern": self.pattern.value, "azimuth": o.azimuth, "tilt": o.tilt, "roll": o.roll}

    @classmethod
    def from_dict(cls, d: dict, default: "AntennaConfig | None" = None) -> "AntennaConfig":
        base = default or cls()
        o = base.orientation
        return cls(
            Pattern.parse(d.get("pattern", base.pattern)),
            Orientation(float(d.get("azimuth", o.azimuth)), float(d.get("tilt", o.tilt)), float(d.get("roll", o.roll))),
        )


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def world_to_local(o: Orientation, world_dir) -> np.ndarray:
    """Rotate world direction(s) into the device frame (yaw, pitch, then roll)."""
    d = np.asarray(world_dir, dtype=float)
    return d @ o.matrix()


def local_to_world(o: Orientation, local_dir) -> np.ndarray:
    d = np.asarray(local_dir, dtype=float)
    return d @ o.matrix().T


def local_angles(local_dir) -> tuple[np.ndarray, np.ndarray]:
    """Zenith and azimuth angles in radians of local direction(s)."""
    d = np.asarray(local_dir, dtype=float)
    z = np.clip(d[..., 2] / np.linalg.norm(d, axis=-1), -1.0, 1.0)
    return np.arccos(z), np.arctan2(d[..., 1], d[..., 0])


def pattern_gain(pattern: Pattern, theta, phi) -> np.ndarray:
    """Linear power gain at local zenith ``theta`` and azimuth ``phi`` (radians)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if pattern is Pattern.ISO:
        return np.ones(np.broadcast(theta, phi).shape)
    if pattern is Pattern.DIPOLE:
        return 1.5 * np.sin(theta) ** 2 + 0.0 * phi
    if pattern is Pattern.HW_DIPOLE:
        s = np.sin(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = HW_DIPOLE_PEAK * (np.cos(0.5 * np.pi * np.cos(theta)) / s) ** 2
        return np.where(s > 1e-12, g, 0.0) + 0.0 * phi
    if pattern is Pattern.TR38901:
        return 10.0 ** (tr38901_gain_db(np.degrees(theta), np.degrees(phi)) / 10.0)
    raise ValueError(pattern)


def tr38901_gain_db(theta_deg, phi_deg) -> np.ndarray:
    """Single-element pattern in dBi; angles in degrees, ``phi`` wrapped to [-180, 180)."""
    theta_deg = np.asarray(theta_deg, dtype=float)
    phi = (np.asarray(phi_deg, dtype=float) + 180.0) % 360.0 - 180.0
    a_v = -np.minimum(12.0 * ((theta_deg - 90.0) / TR38901_BEAMWIDTH) ** 2, TR38901_SLA)
    a_h = -np.minimum(12.0 * (phi / TR38901_BEAMWIDTH) ** 2, TR38901_AMAX)
    return TR38901_GMAX - np.minimum(-(a_v + a_h), TR38901_AMAX)


def gain_dbi(cfg: AntennaConfig, world_dir) -> np.ndarray | float:
    """Gain in dBi toward world direction(s); dipole nulls floor at -300 dBi."""
    d = np.asarray(world_dir, dtype=float)
    if cfg.pattern is Pattern.ISO:
        return 0.0 if d.ndim == 1 else np.zeros(d.shape[:-1])
    theta, phi = local_angles(world_to_local(cfg.orientation, d))
    if cfg.pattern is Pattern.TR38901:
        g = tr38901_gain_db(np.degrees(theta), np.degrees(phi))
    else:
        lin = pattern_gain(cfg.pattern, theta, phi)
        with np.errstate(divide="ignore"):
            g = np.maximum(10.0 * np.log10(lin), GAIN_FLOOR_DBI)
    return float(g) if np.ndim(g) == 0 else g
