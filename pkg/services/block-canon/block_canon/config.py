"""
Configuration: reads environment variables into a typed object.

LEARNING (Python):
  @dataclass(frozen=True) gives an immutable value object with __init__,
  __repr__ and __eq__ generated from the annotations.
  float("1e-12") parses scientific notation, so tolerances can be set as
  plain strings in the environment.
  The module-level constants below are the library defaults; Config only
  decides which values the command line starts from.
"""

import os
from dataclasses import dataclass

# Library-wide default tolerances (max-abs entry norms).
STRUCT_TOL = 1e-12
RECON_TOL = 1e-10
ASYM_TOL = 1e-10
PD_RTOL = 1e-12

ENV_PREFIX = "BLOCK_CANON_"


@dataclass(frozen=True)
class Config:
    # Tolerances
    struct_tol: float
    recon_tol: float
    asym_tol: float
    pd_rtol: float

    # Simulation / CLI
    seed: int
    log_level: str

    @classmethod
    def from_env(cls) -> "Config":
        env = os.environ
        return cls(
            struct_tol=float(env.get(f"{ENV_PREFIX}STRUCT_TOL", STRUCT_TOL)),
            recon_tol=float(env.get(f"{ENV_PREFIX}RECON_TOL", RECON_TOL)),
            asym_tol=float(env.get(f"{ENV_PREFIX}ASYM_TOL", ASYM_TOL)),
            pd_rtol=float(env.get(f"{ENV_PREFIX}PD_RTOL", PD_RTOL)),
            seed=int(env.get(f"{ENV_PREFIX}SEED", "0")),
            log_level=env.get(f"{ENV_PREFIX}LOG_LEVEL", "INFO").upper(),
        )
