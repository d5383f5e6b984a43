"""Kraus-form quantum channels.

Every channel records its completeness contract: ``sum_i K_i^dag K_i`` equals
either the identity (trace preserving) or a stated projector ``support``
(maps that are only defined on a subspace, such as a recovery whose
pseudo-inverse lives on the support of the noisy code projector).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .spinchain import TransitionAmplitude

MAX_DIM = 64
AMPLITUDE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """A list of ``d x d`` Kraus matrices, stored as a ``(k, d, d)`` array.

    ``support`` is None for trace-preserving maps, otherwise the projector
    that ``sum K^dag K`` reproduces.
    """

    kraus: np.ndarray
    support: np.ndarray | None = None

    def __post_init__(self):
        ops = np.asarray(self.kraus, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError(f"Kraus operators must be square matrices, got shape {ops.shape}")
        ops.setflags(write=False)
        object.__setattr__(self, "kraus", ops)
        if self.support is not None:
            sup = np.asarray(self.support, dtype=complex)
            if sup.shape != ops.shape[1:]:
                raise ValueError("support projector has the wrong shape")
            sup.setflags(write=False)
            object.__setattr__(self, "support", sup)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    @property
    def trace_preserving(self) -> bool:
        return self.support is None

    def completeness(self) -> np.ndarray:
        return np.einsum("kji,kjl->il", self.kraus.conj(), self.kraus)

    def completeness_error(self) -> float:
        target = np.eye(self.dim) if self.support is None else self.support
        return float(np.abs(self.completeness() - target).max())

    def __len__(self) -> int:
        return self.kraus.shape[0]


def identity_channel(dim: int = 2) -> QuantumChannel:
    return QuantumChannel(np.eye(dim)[None])


def channel_from_amplitude(f) -> QuantumChannel:
    """Transfer channel of one chain: E0 = diag(1, f), E1 = sqrt(1-|f|^2)|0><1|."""
    if isinstance(f, TransitionAmplitude):
        f = f.value
    f = complex(f)
    if abs(f) > 1 + AMPLITUDE_SLACK:
        raise ValueError(f"|f| = {abs(f)} exceeds 1")
    e0 = np.array([[1, 0], [0, f]], dtype=complex)
    e1 = np.array([[0, np.sqrt(max(0.0, 1 - abs(f) ** 2))], [0, 0]], dtype=complex)
    return QuantumChannel(np.stack([e0, e1]))


def amplitude_damping(p: float) -> QuantumChannel:
    if not 0 <= p <= 1:
        raise ValueError(f"damping probability must lie in [0, 1], got {p}")
    e0 = np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex)
    e1 = np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)
    return QuantumChannel(np.stack([e0, e1]))


def phase_gate(theta: float) -> np.ndarray:
    """diag(1, exp(-i theta)).

    Left-multiplying the Kraus operators of ``channel_from_amplitude(|f| e^{i theta})``
    by this gate yields the real amplitude-damping channel with ``p = 1 - |f|^2``.
    """
    return np.diag([1.0, np.exp(-1j * theta)])


def rotate_output(ch: QuantumChannel, unitary: np.ndarray) -> QuantumChannel:
    """Channel followed by a unitary: Kraus U K_i."""
    return QuantumChannel(np.einsum("ij,kjl->kil", unitary, ch.kraus), ch.support)


def tensor_power(ch: QuantumChannel, k: int) -> QuantumChannel:
    """k-fold tensor product; Kraus order is lexicographic in the factor indices."""
    if k < 1:
        raise ValueError(f"tensor power must be >= 1, got {k}")
    if ch.dim**k > MAX_DIM:
        raise ValueError(f"dimension {ch.dim}**{k} exceeds {MAX_DIM}")
    ops = [
        reduce(np.kron, (ch.kraus[i] for i in idx))
        for idx in itertools.product(range(len(ch)), repeat=k)
    ]
    support = None if ch.support is None else reduce(np.kron, [ch.support] * k)
    return QuantumChannel(np.stack(ops), support)


def apply(ch: QuantumChannel, rho) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape[-2:] != (ch.dim, ch.dim):
        raise ValueError(f"state of shape {rho.shape} does not match channel dim {ch.dim}")
    return np.einsum("kij,...jl,kml->...im", ch.kraus, rho, ch.kraus.conj())


def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """``second`` after ``first``; Kraus set {R_j E_i}, ordered with j major."""
    if second.dim != first.dim:
        raise ValueError(f"dimension mismatch: {second.dim} vs {first.dim}")
    ops = second.kraus[:, None] @ first.kraus[None, :]
    ops = ops.reshape(-1, first.dim, first.dim)
    # the first map fixes the input domain contract
    return QuantumChannel(ops, first.support)


def choi(ch: QuantumChannel) -> np.ndarray:
    """Unnormalised Choi matrix sum_{ij} |i><j| (x) Phi(|i><j|)."""
    d = ch.dim
    # vec(K) with the input index first gives the Choi column for each Kraus
    vecs = ch.kraus.transpose(0, 2, 1).reshape(len(ch), d * d)
    return vecs.T @ vecs.conj()


def minimal_kraus(ch: QuantumChannel, tol: float = 1e-15) -> QuantumChannel:
    """Equivalent channel with at most d^2 Kraus operators, from the Choi eigenvectors."""
    d = ch.dim
    c = choi(ch)
    vals, vecs = np.linalg.eigh((c + c.conj().T) / 2)
    keep = vals > tol * max(vals.max(), 0.0)
    if not np.any(keep):
        return QuantumChannel(np.zeros((1, d, d)), ch.support)
    ops = (vecs[:, keep] * np.sqrt(vals[keep])).T.reshape(-1, d, d).transpose(0, 2, 1)
    return QuantumChannel(ops, ch.support)


def channels_equal(a: QuantumChannel, b: QuantumChannel, tol: float = 1e-12) -> bool:
    if a.dim != b.dim:
        return False
    return float(np.abs(choi(a) - choi(b)).max()) < tol


def is_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if np.abs(rho - rho.conj().T).max() > tol:
        return False
    if abs(np.trace(rho) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -tol)


def pure_state(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=complex)
    return np.outer(v, v.conj())
