"""Codes, channel-adapted (Petz) recovery and worst-case fidelity."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.optimize import minimize

from .channel import QuantumChannel, apply, compose, minimal_kraus, pure_state
from .spinchain import TransitionAmplitude

# quadratic infidelity coefficients of the small-p reference curves
QUADRATIC_COEFF = {"four": 7.0 / 4.0, "five": 15.0 / 8.0}

GRID_THETA = 65
GRID_PHI = 65


@dataclass(frozen=True, eq=False)
class CodeSpace:
    n_physical: int
    logical_zero: np.ndarray
    logical_one: np.ndarray
    name: str = ""

    @property
    def basis(self) -> np.ndarray:
        """(2^n, 2) isometry whose columns are |0_L>, |1_L>."""
        return np.stack([self.logical_zero, self.logical_one], axis=1)

    @property
    def projector(self) -> np.ndarray:
        v = self.basis
        return v @ v.conj().T

    @property
    def dim(self) -> int:
        return 1 << self.n_physical


def _ket(bits: str) -> np.ndarray:
    v = np.zeros(1 << len(bits), dtype=complex)
    v[int(bits, 2)] = 1.0
    return v


def four_qubit_code() -> CodeSpace:
    zero = (_ket("0000") + _ket("1111")) / np.sqrt(2)
    one = (_ket("1100") + _ket("0011")) / np.sqrt(2)
    return CodeSpace(4, zero, one, "four")


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

FIVE_QUBIT_STABILIZERS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")


def pauli_string(label: str) -> np.ndarray:
    return reduce(np.kron, (_PAULI[c] for c in label))


def five_qubit_code() -> CodeSpace:
    """The [[5,1,3]] code: |0_L> projected from |00000>, |1_L> = X^5 |0_L>."""
    proj = np.eye(32, dtype=complex)
    for g in FIVE_QUBIT_STABILIZERS:
        proj = proj @ (np.eye(32) + pauli_string(g)) / 2
    zero = proj @ _ket("00000")
    zero /= np.linalg.norm(zero)
    one = pauli_string("XXXXX") @ zero
    return CodeSpace(5, zero, one, "five")


def get_code(code_id: str) -> CodeSpace:
    if code_id == "four":
        return four_qubit_code()
    if code_id == "five":
        return five_qubit_code()
    raise ValueError(f"unknown code {code_id!r}; expected 'four' or 'five'")


def bloch_coefficients(theta, phi):
    """a = cos(theta/2), b = exp(-i phi) sin(theta/2)."""
    return np.cos(np.asarray(theta) / 2), np.exp(-1j * np.asarray(phi)) * np.sin(np.asarray(theta) / 2)


def _check_normalised(a: complex, b: complex) -> None:
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-10:
        raise ValueError(f"|a|^2 + |b|^2 = {abs(a) ** 2 + abs(b) ** 2}, expected 1")


def encode(a: complex, b: complex, code: CodeSpace) -> np.ndarray:
    _check_normalised(a, b)
    return pure_state(a * code.logical_zero + b * code.logical_one)


def psd_inverse_sqrt(m: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """M^{-1/2} on the support of a PSD matrix.

    Eigenvalues at or below ``rank_tol * max eigenvalue`` are treated as zero.
    """
    m = np.asarray(m, dtype=complex)
    if np.abs(m - m.conj().T).max() > 1e-10:
        raise ValueError("matrix is not Hermitian")
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    top = vals.max(initial=0.0)
    keep = vals > rank_tol * top if top > 0 else np.zeros_like(vals, dtype=bool)
    inv = np.zeros_like(vals)
    inv[keep] = vals[keep] ** -0.5
    return (vecs * inv) @ vecs.conj().T


def support_projector(m: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    vals, vecs = np.linalg.eigh((m + m.conj().T) / 2)
    keep = vals > rank_tol * vals.max(initial=0.0)
    return vecs[:, keep] @ vecs[:, keep].conj().T


def petz_recovery(ch: QuantumChannel, code: CodeSpace, rank_tol: float = 1e-12) -> QuantumChannel:
    """Channel-adapted recovery with Kraus R_i = P E_i^dag E(P)^{-1/2}.

    The result satisfies sum R^dag R = projector onto supp E(P), recorded as
    its support contract.
    """
    if ch.dim != code.dim:
        raise ValueError(f"channel dimension {ch.dim} does not match code dimension {code.dim}")
    p = code.projector
    noisy = apply(ch, p)
    inv_sqrt = psd_inverse_sqrt(noisy, rank_tol)
    ops = np.einsum("ab,kcb,cd->kad", p, ch.kraus.conj(), inv_sqrt)
    return QuantumChannel(ops, support_projector(noisy, rank_tol))


def logical_kraus(noise: QuantumChannel, rec: QuantumChannel, code: CodeSpace) -> np.ndarray:
    """Kraus operators of rec o noise compressed to the code basis, shape (k, 2, 2)."""
    v = code.basis
    full = compose(rec, noise).kraus
    return np.einsum("ai,kab,bj->kij", v.conj(), full, v)


def logical_channel(noise: QuantumChannel, rec: QuantumChannel, code: CodeSpace) -> QuantumChannel:
    """rec o noise as a qubit channel on the logical basis (valid for code inputs)."""
    return QuantumChannel(logical_kraus(noise, rec, code))


def _fidelity_from_kraus(ops: np.ndarray, a, b) -> np.ndarray:
    c = np.stack(np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)), axis=-1)
    amp = np.einsum("...i,kij,...j->...k", c.conj(), ops, c)
    return np.sum(np.abs(amp) ** 2, axis=-1)


def composite_fidelity(noise: QuantumChannel, rec: QuantumChannel, code: CodeSpace, a: complex, b: complex) -> float:
    """<psi| (rec o noise)(|psi><psi|) |psi> for psi = a|0_L> + b|1_L>."""
    _check_normalised(a, b)
    return float(_fidelity_from_kraus(logical_kraus(noise, rec, code), a, b))


@dataclass(frozen=True)
class FidelityReport:
    f_sq_min: float
    argmin_theta: float
    argmin_phi: float
    method: dict = field(default_factory=dict)


def worst_case_from_kraus(ops: np.ndarray, grid: tuple[int, int] = (GRID_THETA, GRID_PHI), xatol: float = 1e-10) -> FidelityReport:
    """Minimise the input-output fidelity of a qubit channel over pure inputs.

    Coarse grid over theta in [0, pi], phi in [0, 2 pi), then Nelder-Mead
    from the best grid point.
    """
    ops = minimal_kraus(QuantumChannel(ops)).kraus
    thetas = np.linspace(0, np.pi, grid[0])
    phis = np.linspace(0, 2 * np.pi, grid[1], endpoint=False)
    tt, pp = np.meshgrid(thetas, phis, indexing="ij")
    vals = _fidelity_from_kraus(ops, *bloch_coefficients(tt, pp))
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    grid_min = float(vals[i, j])

    def objective(x):
        return float(_fidelity_from_kraus(ops, *bloch_coefficients(x[0], x[1])))

    res = minimize(
        objective,
        x0=[thetas[i], phis[j]],
        method="Nelder-Mead",
        options={"xatol": xatol, "fatol": 1e-15, "maxiter": 4000, "initial_simplex": _simplex(thetas[i], phis[j], np.pi / grid[0])},
    )
    if res.fun <= grid_min:
        best, theta, phi = float(res.fun), float(res.x[0]), float(res.x[1])
    else:
        best, theta, phi = grid_min, float(thetas[i]), float(phis[j])
    theta, phi = _canonical_angles(theta, phi)
    method = {"grid": grid, "grid_min": grid_min, "refine": "nelder-mead", "xatol": xatol, "nit": int(res.nit)}
    return FidelityReport(best, theta, phi, method)


def _simplex(theta: float, phi: float, h: float) -> np.ndarray:
    return np.array([[theta, phi], [theta + h, phi], [theta, phi + h]])


def _canonical_angles(theta: float, phi: float) -> tuple[float, float]:
    # fold onto theta in [0, pi], phi in [0, 2 pi) describing the same ray
    theta = theta % (2 * np.pi)
    if theta > np.pi:
        theta = 2 * np.pi - theta
        phi = phi + np.pi
    return theta, phi % (2 * np.pi)


def worst_case_fidelity(noise: QuantumChannel, rec: QuantumChannel, code: CodeSpace) -> FidelityReport:
    return worst_case_from_kraus(logical_kraus(noise, rec, code))


def worst_case_fidelity_noqec(f) -> float:
    """Single-chain worst case after phase compensation: |f|^2."""
    if isinstance(f, TransitionAmplitude):
        f = f.value
    if abs(f) > 1 + 1e-12:
        raise ValueError(f"|f| = {abs(f)} exceeds 1")
    return float(min(1.0, abs(f) ** 2))


def approx_fidelity_curves(p: float, code_id: str) -> float:
    """Small-p reference 1 - alpha p^2 (not clamped)."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    try:
        alpha = QUADRATIC_COEFF[code_id]
    except KeyError:
        raise ValueError(f"unknown code {code_id!r}") from None
    return 1.0 - alpha * p * p


def adaptive_worst_case(p: float, code_id: str) -> float:
    """Exact F^2_min of Petz recovery for real amplitude damping with parameter p on every qubit."""
    from .channel import amplitude_damping, tensor_power

    code = get_code(code_id)
    noise = tensor_power(amplitude_damping(p), code.n_physical)
    return worst_case_fidelity(noise, petz_recovery(noise, code), code).f_sq_min


def fit_quadratic_coefficient(code_id: str, ps=(0.005, 0.01, 0.02)) -> tuple[float, np.ndarray]:
    """Extrapolate (1 - F^2_min)/p^2 to p -> 0.

    The ratio is fitted as c0 + c1 sqrt(p) + c2 p: the five-qubit ratio has a
    sqrt(p) correction, and the same model is used for both codes.  Returns
    c0 and the sampled ratios.
    """
    ps = np.asarray(ps, dtype=float)
    ratios = np.array([(1 - adaptive_worst_case(p, code_id)) / p**2 for p in ps])
    design = np.stack([np.ones_like(ps), np.sqrt(ps), ps], axis=1)
    coef, *_ = np.linalg.lstsq(design, ratios, rcond=None)
    return float(coef[0]), ratios
