"""Exact collective-spin states in the Dicke basis.

Small-N reference implementation of the twist-rotate-accumulate-readout
interferometer.  Everything here is dense linear algebra on the (N+1)-dim
symmetric subspace, so it is only meant for N up to a few hundred; the
closed-form module is validated against these routines.
"""

from __future__ import annotations

from math import comb

import numpy as np

__all__ = [
    "jz_diag",
    "jplus",
    "jx",
    "jy",
    "coherent_x",
    "twisted_state",
    "rotated_state",
    "readout_state",
    "oracle_mean_jz",
    "oracle_mean_jz2",
    "oracle_xi",
]


def jz_diag(n_atoms: int) -> np.ndarray:
    """Diagonal of J_z, ordered m = -N/2 .. +N/2."""
    return np.arange(n_atoms + 1) - n_atoms / 2


def jplus(n_atoms: int) -> np.ndarray:
    """Raising operator J_+ in the Dicke basis."""
    s = n_atoms / 2
    m = jz_diag(n_atoms)[:-1]
    off = np.sqrt(s * (s + 1) - m * (m + 1))
    op = np.zeros((n_atoms + 1, n_atoms + 1))
    op[np.arange(1, n_atoms + 1), np.arange(n_atoms)] = off
    return op


def jx(n_atoms: int) -> np.ndarray:
    jp = jplus(n_atoms)
    return (jp + jp.T) / 2


def jy(n_atoms: int) -> np.ndarray:
    jp = jplus(n_atoms)
    return (jp - jp.T) / 2j


def coherent_x(n_atoms: int) -> np.ndarray:
    """Spin-coherent state polarized along +x (binomial amplitudes)."""
    amps = np.array(
        [comb(n_atoms, k) for k in range(n_atoms + 1)], dtype=float
    )
    psi = np.sqrt(amps) / 2 ** (n_atoms / 2)
    return psi.astype(complex)


def twisted_state(n_atoms: int, chi_t: float) -> np.ndarray:
    """Apply exp(-i chi_t J_z^2) to the x-polarized coherent state."""
    m = jz_diag(n_atoms)
    return np.exp(-1j * chi_t * m**2) * coherent_x(n_atoms)


def rotated_state(n_atoms: int, chi_t: float, alpha: float) -> np.ndarray:
    """Twisted state after the alignment pulse exp(-i alpha J_x)."""
    vals, vecs = np.linalg.eigh(jx(n_atoms))
    psi = twisted_state(n_atoms, chi_t)
    return vecs @ (np.exp(-1j * alpha * vals) * (vecs.conj().T @ psi))


def readout_state(
    n_atoms: int, chi_t: float, alpha: float, phi: float
) -> np.ndarray:
    """Full sequence: twist, align, accumulate phi about z, recombine.

    The recombination pulse is exp(+i (pi/2) J_x), which maps the accumulated
    phase onto the measured J_z population difference with a -sin(phi) fringe.
    """
    psi = rotated_state(n_atoms, chi_t, alpha)
    psi = np.exp(-1j * phi * jz_diag(n_atoms)) * psi
    vals, vecs = np.linalg.eigh(jx(n_atoms))
    return vecs @ (np.exp(+1j * (np.pi / 2) * vals) * (vecs.conj().T @ psi))


def _expval(psi: np.ndarray, diag: np.ndarray) -> float:
    return float(np.real(np.sum(diag * np.abs(psi) ** 2)))


def oracle_mean_jz(n_atoms: int, chi_t: float, alpha: float, phi: float) -> float:
    psi = readout_state(n_atoms, chi_t, alpha, phi)
    return _expval(psi, jz_diag(n_atoms))


def oracle_mean_jz2(n_atoms: int, chi_t: float, alpha: float, phi: float) -> float:
    psi = readout_state(n_atoms, chi_t, alpha, phi)
    return _expval(psi, jz_diag(n_atoms) ** 2)


def oracle_xi(n_atoms: int, chi_t: float, alpha: float) -> float:
    """Squeezing parameter sqrt(N) * dJ_y / <J_x> of the aligned state."""
    psi = rotated_state(n_atoms, chi_t, alpha)
    opy = jy(n_atoms)
    mean_y = np.real(psi.conj() @ (opy @ psi))
    mean_y2 = np.real(psi.conj() @ (opy @ (opy @ psi)))
    var_y = mean_y2 - mean_y**2
    opx = jx(n_atoms)
    mean_x = np.real(psi.conj() @ (opx @ psi))
    return float(np.sqrt(n_atoms * var_y) / mean_x)
