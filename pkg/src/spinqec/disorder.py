"""Static coupling disorder on XXX chains.

Bond k of realization m gets J_k = Jz_k = (Jbar/2)(1 + Delta_k) with
Delta_k ~ Uniform[-delta, delta].  Draws come from a Philox stream keyed by
(seed, m), so any realization can be regenerated on its own and ensembles do
not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .spinchain import (
    ChainSpec,
    TransitionAmplitude,
    build_subspace_hamiltonian,
    subspace_matrix,
    transition_amplitude,
)

DEFAULT_SEED = 0xC0FFEE
MAX_DENSITY_TERMS = 20  # 2**20 sign patterns
DEGENERATE_GAP = 1e-12
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class DisorderModel:
    delta: float
    mean_coupling: float = 1.0
    n_samples: int = 1000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError(f"disorder strength must be >= 0, got {self.delta}")
        if self.n_samples < 1:
            raise ValueError(f"need at least one sample, got {self.n_samples}")


def _check_ideal(base: ChainSpec, model: DisorderModel) -> None:
    half = model.mean_coupling / 2
    if base.n_sites < 2:
        raise ValueError("disordered chain needs at least 2 sites")
    if not (
        np.allclose(base.xx_couplings, half, rtol=0, atol=1e-15)
        and np.allclose(base.zz_couplings, half, rtol=0, atol=1e-15)
        and not np.any(base.fields)
    ):
        raise ValueError("base spec must be an ideal XXX chain with coupling equal to mean_coupling")


def unit_draws(seed: int, index: int, n_bonds: int) -> np.ndarray:
    """Uniform [0, 1) numbers for one realization; entry k belongs to bond k+1."""
    key = (int(seed) & _MASK64) | (int(index) << 64)
    return np.random.Generator(np.random.Philox(key=key)).random(n_bonds)


def sample_deltas(model: DisorderModel, n_bonds: int, indices=None) -> np.ndarray:
    """(M, n_bonds) array of coupling fluctuations for the given realization indices."""
    if indices is None:
        indices = range(model.n_samples)
    indices = list(indices)
    u = np.empty((len(indices), n_bonds))
    for row, m in enumerate(indices):
        u[row] = unit_draws(model.seed, m, n_bonds)
    return model.delta * (2.0 * u - 1.0)


def sample_disordered_spec(base: ChainSpec, model: DisorderModel, index: int) -> ChainSpec:
    _check_ideal(base, model)
    if model.delta == 0:
        return base
    deltas = sample_deltas(model, base.n_sites - 1, [index])[0]
    j = model.mean_coupling / 2 * (1 + deltas)
    return ChainSpec(base.n_sites, j, j.copy(), np.zeros(base.n_sites))


def exact_disordered_amplitude(base: ChainSpec, model: DisorderModel, index: int, s: int, r: int, t: float) -> TransitionAmplitude:
    spec = sample_disordered_spec(base, model, index)
    return transition_amplitude(build_subspace_hamiltonian(spec), s, r, t)


def batch_amplitudes(deltas: np.ndarray, mean_coupling: float, s: int, r: int, t: float, all_r: bool = False) -> np.ndarray:
    """Exact f_{r,s}(t) for a stack of realizations by batched diagonalisation.

    With ``all_r`` the whole column f_{., s} is returned, shape (M, N).
    """
    deltas = np.atleast_2d(deltas)
    n = deltas.shape[1] + 1
    j = mean_coupling / 2 * (1 + deltas)
    vals, vecs = np.linalg.eigh(subspace_matrix(j, j, np.zeros(n)))
    phases = np.exp(-1j * vals * t) * vecs[:, s - 1, :]
    if all_r:
        return np.einsum("mrk,mk->mr", vecs, phases)
    return np.einsum("mk,mk->m", vecs[:, r - 1, :], phases)


@dataclass(frozen=True)
class DysonCoefficients:
    """First-order expansion f(Delta) ~ base_amplitude + sum_i c[i] Delta_i."""

    c: np.ndarray
    base_amplitude: complex
    s: int
    r: int
    t: float
    n: int


def _time_integrals(vals: np.ndarray, t: float) -> np.ndarray:
    """I_ab = int_0^t exp(i (l_a - l_b) t') dt'."""
    gap = vals[:, None] - vals[None, :]
    small = np.abs(gap) < DEGENERATE_GAP
    safe = np.where(small, 1.0, gap)
    out = (np.exp(1j * safe * t) - 1) / (1j * safe)
    return np.where(small, t + 0j, out)


def bond_perturbation(n: int, bond: int, mean_coupling: float = 1.0) -> np.ndarray:
    """Ground-shifted one-excitation matrix of the disorder term with Delta_bond = 1."""
    j = np.zeros(n - 1)
    j[bond - 1] = mean_coupling / 2
    return subspace_matrix(j, j, np.zeros(n))


def dyson_first_order_coeffs(base: ChainSpec, s: int, r: int, t: float, mean_coupling: float | None = None) -> DysonCoefficients:
    """c_i = -i sum_k f_{r,k}(t) int_0^t <k| e^{iH0 t'} V_i e^{-iH0 t'} |s> dt'.

    Every time integral is done in closed form in the eigenbasis of the ideal
    one-excitation Hamiltonian.
    """
    n = base.n_sites
    if mean_coupling is None:
        mean_coupling = 2 * float(base.xx_couplings[0])
    _check_ideal(base, DisorderModel(0.0, mean_coupling))
    h = build_subspace_hamiltonian(base)
    vals, vecs = h.eig
    integrals = _time_integrals(vals, t)
    left = vecs[r - 1] * np.exp(-1j * vals * t)  # <r| e^{-iH0 t} in the eigenbasis
    right = vecs[s - 1]
    c = np.empty(n - 1, dtype=complex)
    for i in range(1, n):
        m = vecs.T @ bond_perturbation(n, i, mean_coupling) @ vecs
        c[i - 1] = -1j * left @ (m * integrals) @ right
    f0 = complex(left @ right)
    return DysonCoefficients(c, f0, s, r, float(t), n)


def perturbative_amplitude(coeffs: DysonCoefficients, deltas) -> np.ndarray | complex:
    deltas = np.asarray(deltas, dtype=float)
    if deltas.shape[-1] != coeffs.c.size:
        raise ValueError(f"expected {coeffs.c.size} fluctuations, got {deltas.shape[-1]}")
    out = coeffs.base_amplitude + deltas @ coeffs.c
    return complex(out) if np.ndim(out) == 0 else out


def _component(z, component: str):
    if component in ("re", "real"):
        return np.real(z)
    if component in ("im", "imag", "imaginary"):
        return np.imag(z)
    raise ValueError(f"component must be 're' or 'im', got {component!r}")


class AmplitudeDistribution:
    """Exact density of center + sum_i a_i Delta_i with Delta_i ~ U[-delta, delta].

    Written as the signed power sum over the 2^n sign patterns
    q = x - center + sum_i eps_i delta |a_i|, evaluated in units of the
    support half-width to keep the terms O(1).
    """

    def __init__(self, center: float, coefficients, delta: float, component: str = "re"):
        a = np.abs(np.asarray(coefficients, dtype=float))
        if delta <= 0:
            raise ValueError("delta must be positive for a density")
        keep = a > 1e-14 * a.max(initial=0.0)
        a = a[keep]
        if a.size == 0:
            raise ValueError("all coefficients vanish; the distribution is a point mass")
        if a.size > MAX_DENSITY_TERMS:
            raise ValueError(f"{a.size} effective terms exceeds the {MAX_DENSITY_TERMS}-term cap")
        self.component = component
        self.center = float(center)
        self.delta = float(delta)
        self.n_terms = int(a.size)
        self.dropped = int(np.count_nonzero(~keep))
        w = delta * a
        self.half_width = float(w.sum())
        self._omega = w / self.half_width
        signs = 1 - 2 * ((np.arange(1 << a.size)[:, None] >> np.arange(a.size)) & 1)
        self._shifts = signs @ self._omega
        self._parity = np.prod(signs, axis=1)
        self._scale = np.prod(2 * self._omega)
        self.normalization = 1.0
        lo, hi = self.support
        total, _ = quad(self.pdf, lo, hi, limit=500, epsabs=1e-13, epsrel=1e-12)
        self.normalization = float(total)

    @property
    def support(self) -> tuple[float, float]:
        return self.center - self.half_width, self.center + self.half_width

    def _q(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.half_width
        return np.add.outer(u, self._shifts)

    def pdf(self, x):
        n = self.n_terms
        q = self._q(x)
        terms = self._parity * q ** (n - 1) * np.sign(q)
        dens = terms.sum(axis=-1) / (2 * math.factorial(n - 1) * self._scale * self.half_width)
        dens = np.where(np.abs(np.asarray(x, dtype=float) - self.center) >= self.half_width, 0.0, dens)
        return dens / self.normalization

    def cdf(self, x):
        n = self.n_terms
        q = self._q(x)
        terms = self._parity * q**n * np.sign(q)
        val = 0.5 + terms.sum(axis=-1) / (2 * math.factorial(n) * self._scale)
        lo, hi = self.support
        x = np.asarray(x, dtype=float)
        val = np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, val))
        return np.clip(val / self.normalization, 0.0, 1.0)


def analytic_density(coeffs: DysonCoefficients, delta: float, component: str = "re") -> AmplitudeDistribution:
    center = _component(coeffs.base_amplitude, component)
    return AmplitudeDistribution(center, _component(coeffs.c, component), delta, component)


def disorder_moments(coeffs: DysonCoefficients, delta: float, n_samples: int, seed: int = DEFAULT_SEED, mean_coupling: float = 1.0) -> dict:
    """Monte Carlo moments of the exact amplitude next to the first-order predictions."""
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    model = DisorderModel(delta, mean_coupling, n_samples, seed)
    deltas = sample_deltas(model, coeffs.n - 1)
    exact = batch_amplitudes(deltas, mean_coupling, coeffs.s, coeffs.r, coeffs.t)
    pert = perturbative_amplitude(coeffs, deltas)
    return {
        "mean_exact": complex(exact.mean()),
        "mean_perturbative": complex(np.mean(pert)),
        "stderr_re": float(exact.real.std(ddof=1) / np.sqrt(n_samples)),
        "stderr_im": float(exact.imag.std(ddof=1) / np.sqrt(n_samples)),
        "var_re": float(exact.real.var(ddof=1)),
        "var_im": float(exact.imag.var(ddof=1)),
        "var_predicted_re": float(delta**2 / 3 * np.sum(coeffs.c.real**2)),
        "var_predicted_im": float(delta**2 / 3 * np.sum(coeffs.c.imag**2)),
    }


def disordered_amplitudes(base: ChainSpec, model: DisorderModel, s: int, r: int, t: float) -> np.ndarray:
    """Exact amplitude of every realization 0..M-1, in index order."""
    _check_ideal(base, model)
    deltas = sample_deltas(model, base.n_sites - 1)
    return batch_amplitudes(deltas, model.mean_coupling, s, r, t)


def disorder_averaged_amplitude(base: ChainSpec, model: DisorderModel, s: int, r: int, t: float) -> complex:
    if model.delta == 0:
        _check_ideal(base, model)
        return transition_amplitude(build_subspace_hamiltonian(base), s, r, t).value
    return complex(disordered_amplitudes(base, model, s, r, t).mean())
