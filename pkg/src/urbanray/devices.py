from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .antenna import AntennaConfig, Orientation, Pattern
from .geodesy import GeoPoint, to_enu

DEFAULT_TX_POWER_DBM = 43.0
DEFAULT_UE_ALTITUDE = 1.5
DEFAULT_BS_TILT = -5.0


def default_station_antenna() -> AntennaConfig:
    return AntennaConfig(Pattern.ISO, Orientation(0.0, DEFAULT_BS_TILT, 0.0))


@dataclass(frozen=True)
class StationConfig:
    """A base station.  Height above ground lives in ``altitude``, not ``position.alt``."""

    id: str
    position: GeoPoint
    altitude: float
    antenna: AntennaConfig = field(default_factory=default_station_antenna)
    tx_power: float = DEFAULT_TX_POWER_DBM

    def __post_init__(self) -> None:
        if not self.altitude > 0:
            raise ValueError(f"station {self.id!r}: altitude must be > 0")

    def enu(self, origin: GeoPoint) -> np.ndarray:
        p = to_enu(self.position, origin)
        return np.array([p.x, p.y, self.altitude])

    def with_altitude(self, altitude: float) -> "StationConfig":
        return replace(self, altitude=float(altitude))

    def with_antenna(self, pattern=None, azimuth=None) -> "StationConfig":
        a = self.antenna
        o = a.orientation
        return replace(self, antenna=AntennaConfig(
            Pattern.parse(pattern) if pattern is not None else a.pattern,
            Orientation(float(azimuth) if azimuth is not None else o.azimuth, o.tilt, o.roll),
        ))

    def to_dict(self) -> dict:
        d = {"id": self.id, "lat": self.position.lat, "lon": self.position.lon, "altitude": self.altitude}
        d.update(self.antenna.to_dict())
        d["tx_power"] = self.tx_power
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StationConfig":
        return cls(
            id=str(d["id"]),
            position=GeoPoint(float(d["lat"]), float(d["lon"])),
            altitude=float(d["altitude"]),
            antenna=AntennaConfig.from_dict(d, default_station_antenna()),
            tx_power=float(d.get("tx_power", DEFAULT_TX_POWER_DBM)),
        )


@dataclass(frozen=True)
class UeConfig:
    id: str
    position: GeoPoint
    antenna: AntennaConfig = field(default_factory=AntennaConfig)

    def enu(self, origin: GeoPoint) -> np.ndarray:
        p = to_enu(self.position, origin)
        return np.array([p.x, p.y, p.z])

    def with_antenna(self, antenna: AntennaConfig) -> "UeConfig":
        return replace(self, antenna=antenna)
