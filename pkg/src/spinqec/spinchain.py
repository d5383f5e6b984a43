"""Spin-chain Hamiltonians and single-excitation transition amplitudes.

The chain Hamiltonian is

    H = -sum_k J_k (X_k X_{k+1} + Y_k Y_{k+1}) - sum_k Jz_k Z_k Z_{k+1} + sum_k B_k Z_k

with sigma_z|0> = +|0> and |1> the excited spin.  Sites are 1-based and
site 1 is the most significant bit of a computational-basis index.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAX_FULL_SITES = 12


@dataclass(frozen=True)
class ChainSpec:
    """Couplings and fields of one N-site chain."""

    n_sites: int
    xx_couplings: np.ndarray
    zz_couplings: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 1:
            raise ValueError(f"n_sites must be positive, got {n}")
        xx = np.asarray(self.xx_couplings, dtype=float).reshape(-1)
        zz = np.asarray(self.zz_couplings, dtype=float).reshape(-1)
        b = np.asarray(self.fields, dtype=float).reshape(-1)
        if xx.size != n - 1 or zz.size != n - 1 or b.size != n:
            raise ValueError(
                f"array lengths must be ({n - 1}, {n - 1}, {n}), "
                f"got ({xx.size}, {zz.size}, {b.size})"
            )
        for arr in (xx, zz, b):
            arr.setflags(write=False)
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "xx_couplings", xx)
        object.__setattr__(self, "zz_couplings", zz)
        object.__setattr__(self, "fields", b)


def ideal_xxx_spec(n: int, coupling: float = 1.0) -> ChainSpec:
    """Uniform Heisenberg (XXX) chain with J_k = Jz_k = coupling/2 and no field."""
    if n < 2:
        raise ValueError(f"an XXX chain needs at least 2 sites, got {n}")
    if coupling <= 0:
        raise ValueError(f"coupling must be positive, got {coupling}")
    half = np.full(n - 1, coupling / 2.0)
    return ChainSpec(n, half, half.copy(), np.zeros(n))


def build_full_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Dense 2^N x 2^N Hamiltonian over the full Hilbert space (N <= 12)."""
    n = spec.n_sites
    if n > MAX_FULL_SITES:
        raise ValueError(f"full Hamiltonian limited to {MAX_FULL_SITES} sites, got {n}")
    dim = 1 << n
    states = np.arange(dim)
    # bits[:, j] is the occupation of site j+1
    bits = (states[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    z = 1 - 2 * bits

    diag = z @ spec.fields
    if n > 1:
        diag = diag - (z[:, :-1] * z[:, 1:]) @ spec.zz_couplings
    h = np.diag(diag.astype(complex))

    # XX + YY = 2 (s+ s- + s- s+): swaps anti-aligned neighbours with amplitude 2
    for k in range(n - 1):
        flip = (1 << (n - 1 - k)) | (1 << (n - 2 - k))
        differ = bits[:, k] != bits[:, k + 1]
        src = states[differ]
        h[src ^ flip, src] += -2.0 * spec.xx_couplings[k]
    return h


def excitation_index(n: int, site: int) -> int:
    """Computational-basis index of |site> (one flipped spin) in an n-site chain."""
    return 1 << (n - site)


@dataclass(frozen=True, eq=False)
class SubspaceHamiltonian:
    """Hamiltonian restricted to the one-excitation sector, ground energy removed.

    ``matrix[r-1, s-1] = <r|H|s> - E0 * delta_rs`` with ``E0 = <0|H|0>``.
    The eigendecomposition is computed lazily once and reused.
    """

    n: int
    matrix: np.ndarray
    ground_shift: float

    @cached_property
    def eig(self) -> tuple[np.ndarray, np.ndarray]:
        vals, vecs = np.linalg.eigh(self.matrix)
        vals.setflags(write=False)
        vecs.setflags(write=False)
        return vals, vecs

    def propagator(self, t: float) -> np.ndarray:
        """Full N x N matrix U[r-1, s-1] = f_{r,s}(t)."""
        vals, vecs = self.eig
        return (vecs * np.exp(-1j * vals * t)) @ vecs.T


def subspace_matrix(xx: np.ndarray, zz: np.ndarray, fields: np.ndarray) -> np.ndarray:
    """Ground-shifted one-excitation matrix; broadcasts over leading axes."""
    xx = np.asarray(xx, dtype=float)
    zz = np.asarray(zz, dtype=float)
    fields = np.asarray(fields, dtype=float)
    n = fields.shape[-1]
    lead = np.broadcast_shapes(xx.shape[:-1], zz.shape[:-1], fields.shape[:-1])
    h = np.zeros(lead + (n, n))
    # flipping site j reverses the two ZZ bonds touching it and its own Z term
    diag = -2.0 * np.broadcast_to(fields, lead + (n,))
    diag = diag.copy()
    diag[..., :-1] += 2.0 * zz
    diag[..., 1:] += 2.0 * zz
    idx = np.arange(n)
    h[..., idx, idx] = diag
    h[..., idx[:-1], idx[1:]] = -2.0 * xx
    h[..., idx[1:], idx[:-1]] = -2.0 * xx
    return h


def build_subspace_hamiltonian(spec: ChainSpec) -> SubspaceHamiltonian:
    ground = float(np.sum(spec.fields) - np.sum(spec.zz_couplings))
    mat = subspace_matrix(spec.xx_couplings, spec.zz_couplings, spec.fields)
    mat.setflags(write=False)
    return SubspaceHamiltonian(spec.n_sites, mat, ground)


@dataclass(frozen=True)
class TransitionAmplitude:
    value: complex

    @property
    def magnitude(self) -> float:
        return float(abs(self.value))

    @property
    def phase(self) -> float:
        """Phase in (-pi, pi]."""
        theta = float(np.angle(self.value))
        return np.pi if theta == -np.pi else theta

    @property
    def damping(self) -> float:
        return float(min(1.0, max(0.0, 1.0 - self.magnitude**2)))


def _check_site(h: SubspaceHamiltonian, site: int, name: str) -> None:
    if not 1 <= site <= h.n:
        raise ValueError(f"{name}={site} outside 1..{h.n}")


def amplitudes(h: SubspaceHamiltonian, s: int, r: int, times) -> np.ndarray:
    """Vectorised f_{r,s}(t) over an array of times."""
    _check_site(h, s, "s")
    _check_site(h, r, "r")
    vals, vecs = h.eig
    weights = vecs[r - 1] * vecs[s - 1]
    t = np.asarray(times, dtype=float)
    return np.exp(-1j * np.multiply.outer(t, vals)) @ weights


def transition_amplitude(h: SubspaceHamiltonian, s: int, r: int, t: float) -> TransitionAmplitude:
    """Amplitude for the excitation at site ``s`` to be found at site ``r`` after time ``t``."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return TransitionAmplitude(complex(amplitudes(h, s, r, t)))


def transition_row(h: SubspaceHamiltonian, s: int, t: float) -> np.ndarray:
    """Vector of f_{r,s}(t) for r = 1..N."""
    _check_site(h, s, "s")
    vals, vecs = h.eig
    return vecs @ (np.exp(-1j * vals * t) * vecs[s - 1])
