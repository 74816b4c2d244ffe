from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class SolverConfig:
    """Path-solver knobs.

    The first eight fields carry the usual ray-tracer meaning; defaults are
    the values used for the Rome reproduction.  The remaining fields expose
    the interaction models behind the boolean flags.
    """

    max_num_paths_per_src: int = 10_000
    samples_per_src: int = 1_000_000
    max_depth: int = 3
    synthetic_array: bool = False  # accepted, no effect: all devices are single-element
    specular_reflection: bool = False
    diffuse_reflection: bool = True
    refraction: bool = True
    frequency: float = 1.2e9

    scattering_coefficient: float = 0.3
    diffuse_cell_size: float = 5.0  # 0 keeps every ray hit as its own scatterer
    wall_penalty_db: float = 5.0
    combine: str = "incoherent"

    def __post_init__(self) -> None:
        if int(self.max_num_paths_per_src) < 1:
            raise ValueError("max_num_paths_per_src must be positive")
        if int(self.samples_per_src) < 1:
            raise ValueError("samples_per_src must be positive")
        if int(self.max_depth) < 0:
            raise ValueError("max_depth must be non-negative")
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if not 0.0 <= self.scattering_coefficient <= 1.0:
            raise ValueError("scattering_coefficient must lie in [0, 1]")
        if self.diffuse_cell_size < 0:
            raise ValueError("diffuse_cell_size must be >= 0")
        if self.combine != "incoherent":
            raise ValueError("only incoherent path combination is implemented")
        object.__setattr__(self, "max_num_paths_per_src", int(self.max_num_paths_per_src))
        object.__setattr__(self, "samples_per_src", int(self.samples_per_src))
        object.__setattr__(self, "max_depth", int(self.max_depth))
        object.__setattr__(self, "frequency", float(self.frequency))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown solver fields: {sorted(unknown)}")
        return cls(**d)

    def with_field(self, name: str, value) -> "SolverConfig":
        if name not in {f.name for f in fields(self)}:
            raise ValueError(f"unknown solver field {name!r}")
        return replace(self, **{name: value})

    def key(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]
