"""Chain geometry, drive parameters, units, and the single-excitation index space.

Natural units throughout the package: the single-atom linewidth GAMMA0 = 1 sets
the frequency scale, the transition wavelength LAMBDA0 = 1 sets the length
scale (so k0 = 2*pi), and hbar = c = 1.  Atoms sit on the z axis at
z_n = n * lattice_const for n = 0 .. n_atoms - 1.  Each atom carries two
excited states labelled by a circular polarization s in {+1, -1}; the
corresponding dipole unit vectors are d_(+/-) = -/+ (x +/- i y) / sqrt(2),
both transverse to the chain axis.

Single-excitation amplitudes are flattened site-major with the plus state
first: flat index = 2 * site + (0 if s == +1 else 1).  Every matrix in the
package uses this ordering.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

GAMMA0 = 1.0
LAMBDA0 = 1.0
K0 = 2.0 * np.pi / LAMBDA0

#: Largest lattice constant (in units of LAMBDA0) at which strictly guided,
#: lossless collective modes can exist: half the transition wavelength.
SUBRADIANCE_LATTICE_LIMIT = 0.5


class ConfigError(ValueError):
    """Raised when a configuration value is rejected; names the bad field."""


class Polarization(enum.IntEnum):
    PLUS = +1
    MINUS = -1


POLARIZATIONS = (Polarization.PLUS, Polarization.MINUS)

# Circular dipole unit vectors in the Cartesian (x, y, z) basis.
DIPOLE_VECTORS = {
    Polarization.PLUS: np.array([-1.0, -1.0j, 0.0]) / np.sqrt(2.0),
    Polarization.MINUS: np.array([1.0, -1.0j, 0.0]) / np.sqrt(2.0),
}


def flatten_index(site: int, pol: Polarization) -> int:
    """Site-major flattening, plus before minus."""
    return 2 * site + (0 if pol == Polarization.PLUS else 1)


def unflatten_index(flat: int) -> tuple[int, Polarization]:
    site, rem = divmod(flat, 2)
    return site, Polarization.PLUS if rem == 0 else Polarization.MINUS


@dataclass(frozen=True)
class ChainConfig:
    """Geometry and drive parameters of the chain.

    Units: lattice_const in LAMBDA0; delta_shift (two-photon light shift) and
    detuning in GAMMA0; mixing_angle in radians; control_wavevector in units
    of 1/lattice_const, so the drive phase at site n is simply
    control_wavevector * n.
    """

    n_atoms: int
    lattice_const: float
    delta_shift: float = 10.0 / 3.0
    mixing_angle: float = 0.0
    control_wavevector: float = np.pi / 5.0
    detuning: float = 0.0
    gamma0: float = 1.0


@dataclass(frozen=True)
class ValidatedConfig:
    """ChainConfig plus derived constants, produced by :func:`validate`.

    control_wavevector_abs is the control wavevector in absolute units
    (1/LAMBDA0), i.e. control_wavevector / lattice_const.
    """

    n_atoms: int
    lattice_const: float
    delta_shift: float
    mixing_angle: float
    control_wavevector: float
    detuning: float
    gamma0: float
    k0: float
    control_wavevector_abs: float
    subradiant: bool

    def as_config(self) -> ChainConfig:
        return ChainConfig(
            n_atoms=self.n_atoms,
            lattice_const=self.lattice_const,
            delta_shift=self.delta_shift,
            mixing_angle=self.mixing_angle,
            control_wavevector=self.control_wavevector,
            detuning=self.detuning,
            gamma0=self.gamma0,
        )


def validate(config: ChainConfig) -> ValidatedConfig:
    """Check physicality and annotate the config with derived constants."""
    if not isinstance(config.n_atoms, (int, np.integer)) or config.n_atoms < 1:
        raise ConfigError(f"n_atoms must be a positive integer, got {config.n_atoms!r}")
    if not config.lattice_const > 0.0:
        raise ConfigError(f"lattice_const must be > 0, got {config.lattice_const!r}")
    if not np.isfinite(config.delta_shift):
        raise ConfigError(f"delta_shift must be finite, got {config.delta_shift!r}")
    if not np.isfinite(config.mixing_angle):
        raise ConfigError(f"mixing_angle must be finite, got {config.mixing_angle!r}")
    if not np.isfinite(config.control_wavevector):
        raise ConfigError(
            f"control_wavevector must be finite, got {config.control_wavevector!r}"
        )
    if not np.isfinite(config.detuning):
        raise ConfigError(f"detuning must be finite, got {config.detuning!r}")
    if config.gamma0 != 1.0:
        raise ConfigError(
            "gamma0 is the unit of frequency and must be 1.0, "
            f"got {config.gamma0!r}"
        )
    return ValidatedConfig(
        n_atoms=int(config.n_atoms),
        lattice_const=float(config.lattice_const),
        delta_shift=float(config.delta_shift),
        mixing_angle=float(config.mixing_angle),
        control_wavevector=float(config.control_wavevector),
        detuning=float(config.detuning),
        gamma0=1.0,
        k0=K0,
        control_wavevector_abs=float(config.control_wavevector) / float(config.lattice_const),
        subradiant=float(config.lattice_const) <= SUBRADIANCE_LATTICE_LIMIT,
    )


def positions(vc: ValidatedConfig) -> np.ndarray:
    """Atom z coordinates z_n = n * a, strictly increasing, length n_atoms."""
    return np.arange(vc.n_atoms) * vc.lattice_const


# --------------------------------------------------------------------------
# Flat key=value config files.  Exactly these keys are accepted; `seed` is
# carried alongside the chain parameters for the CLI and ensemble front ends.

_CONFIG_KEYS = (
    "n_atoms",
    "lattice_const",
    "delta_shift",
    "mixing_angle",
    "control_wavevector",
    "detuning",
    "seed",
)


def read_config(path: str | Path) -> tuple[ChainConfig, int | None]:
    """Parse a flat key=value config file; '#' starts a comment.

    Returns the chain config and the optional seed (None if absent).
    Unknown keys are rejected so typos cannot silently fall back to defaults.
    """
    text = Path(path).read_text()
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = val.strip()

    if "n_atoms" not in values or "lattice_const" not in values:
        raise ConfigError(f"{path}: n_atoms and lattice_const are required")

    def _num(key: str, cast):
        try:
            return cast(values[key])
        except ValueError as exc:
            raise ConfigError(f"{path}: bad value for {key}: {values[key]!r}") from exc

    kwargs = {"n_atoms": _num("n_atoms", int), "lattice_const": _num("lattice_const", float)}
    for key in ("delta_shift", "mixing_angle", "control_wavevector", "detuning"):
        if key in values:
            kwargs[key] = _num(key, float)
    seed = _num("seed", int) if "seed" in values else None
    return ChainConfig(**kwargs), seed


def write_config(path: str | Path, config: ChainConfig, seed: int | None = None) -> None:
    lines = []
    for f in fields(config):
        if f.name == "gamma0":
            continue
        lines.append(f"{f.name} = {getattr(config, f.name)!r}")
    if seed is not None:
        lines.append(f"seed = {seed}")
    Path(path).write_text("\n".join(lines) + "\n")


def with_mixing_angle(config: ChainConfig, mixing_angle: float) -> ChainConfig:
    """Copy of the config with only the drive mixing angle changed."""
    return replace(config, mixing_angle=mixing_angle)
