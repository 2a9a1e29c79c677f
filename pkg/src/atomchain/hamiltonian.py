"""Driven single-atom blocks, disorder potential, and the collective
non-Hermitian Hamiltonian on the single-excitation space.

The full generator is H = H_S + shift - (i/2) * decay + V, where H_S stacks
the Hermitian 2x2 driven-atom blocks, (shift, decay) come from
collective_couplings, and V is an optional diagonal disorder potential that
adds the same random energy to both polarizations of a site.  The
anti-Hermitian part of H is exactly -(i/2) * decay by construction, which is
the identity behind S-matrix unitarity.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .chain_model import ValidatedConfig
from .collective_couplings import CouplingMatrices

DISORDER_SHAPES = ("uniform", "gaussian")


@dataclass(frozen=True)
class DisorderRealization:
    """One draw of i.i.d. on-site energies with zero mean and variance W."""

    seed: object
    energies: np.ndarray
    variance_w: float


@dataclass(frozen=True)
class NonHermitianHamiltonian:
    matrix: np.ndarray
    config_fingerprint: str


def single_atom_block(vc: ValidatedConfig, site: int) -> np.ndarray:
    """Hermitian 2x2 drive block in the {plus, minus} basis at one site.

    Diagonal: (detuning + delta) - (delta/4) * (1 - s*cos(theta)), so the
    bare splitting between the two excited states is (delta/2) * cos(theta).
    Off-diagonal: the two-photon Raman coupling (delta/4) * sin(theta) with
    the running phase exp(-2i * k_c * z_n) in the (plus, minus) entry.
    """
    delta = vc.delta_shift
    theta = vc.mixing_angle
    phase = np.exp(-2.0j * vc.control_wavevector * site)
    coupling = (delta / 4.0) * np.sin(theta)
    diag = [
        (vc.detuning + delta) - (delta / 4.0) * (1.0 - s * np.cos(theta))
        for s in (+1, -1)
    ]
    return np.array(
        [[diag[0], coupling * phase], [coupling * np.conj(phase), diag[1]]],
        dtype=complex,
    )


def drive_hamiltonian(vc: ValidatedConfig) -> np.ndarray:
    """Block-diagonal stack of single_atom_block over all sites (Hermitian)."""
    n = vc.n_atoms
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    for site in range(n):
        h[2 * site : 2 * site + 2, 2 * site : 2 * site + 2] = single_atom_block(vc, site)
    return h


def disorder_sample(seed, w: float, n_atoms: int, shape: str = "uniform") -> DisorderRealization:
    """Draw i.i.d. on-site energies with zero mean and variance w.

    `shape` selects uniform on [-sqrt(3w), +sqrt(3w)] (default; a flat
    frequency band) or gaussian with standard deviation sqrt(w).  `seed`
    is anything numpy's default_rng accepts, including a SeedSequence, so
    ensembles can hand in spawned per-realization streams.
    """
    if w < 0.0:
        raise ValueError(f"disorder variance must be >= 0, got {w!r}")
    if shape not in DISORDER_SHAPES:
        raise ValueError(f"unknown disorder shape {shape!r}; choose from {DISORDER_SHAPES}")
    if w == 0.0:
        energies = np.zeros(n_atoms)
    else:
        rng = np.random.default_rng(seed)
        if shape == "uniform":
            half = np.sqrt(3.0 * w)
            energies = rng.uniform(-half, half, n_atoms)
        else:
            energies = rng.normal(0.0, np.sqrt(w), n_atoms)
    return DisorderRealization(seed=seed, energies=energies, variance_w=float(w))


def _fingerprint(vc: ValidatedConfig, disorder: DisorderRealization | None) -> str:
    h = hashlib.sha256(repr(vc).encode())
    if disorder is not None:
        h.update(np.ascontiguousarray(disorder.energies).tobytes())
    return h.hexdigest()[:16]


def assemble(
    vc: ValidatedConfig,
    couplings: CouplingMatrices,
    disorder: DisorderRealization | None = None,
) -> NonHermitianHamiltonian:
    """H = H_S + shift - (i/2) * decay + V on the flattened index space."""
    dim = 2 * vc.n_atoms
    if couplings.decay.shape != (dim, dim):
        raise ValueError(
            f"coupling matrices are {couplings.decay.shape}, config needs {(dim, dim)}"
        )
    h = drive_hamiltonian(vc) + couplings.shift - 0.5j * couplings.decay
    if disorder is not None:
        if disorder.energies.shape != (vc.n_atoms,):
            raise ValueError(
                f"disorder has {disorder.energies.shape[0]} sites, config has {vc.n_atoms}"
            )
        h[np.diag_indices_from(h)] += np.repeat(disorder.energies, 2)
    return NonHermitianHamiltonian(matrix=h, config_fingerprint=_fingerprint(vc, disorder))
