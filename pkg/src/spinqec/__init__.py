"""Spin-chain state transfer as a noisy channel, with adaptive error correction."""
from .channel import QuantumChannel, amplitude_damping, channel_from_amplitude, compose, tensor_power
from .disorder import DisorderModel, dyson_first_order_coeffs
from .qec import four_qubit_code, five_qubit_code, petz_recovery, worst_case_fidelity
from .spinchain import ChainSpec, build_subspace_hamiltonian, ideal_xxx_spec, transition_amplitude

__all__ = [
    "ChainSpec",
    "DisorderModel",
    "QuantumChannel",
    "amplitude_damping",
    "build_subspace_hamiltonian",
    "channel_from_amplitude",
    "compose",
    "dyson_first_order_coeffs",
    "five_qubit_code",
    "four_qubit_code",
    "ideal_xxx_spec",
    "petz_recovery",
    "tensor_power",
    "transition_amplitude",
    "worst_case_fidelity",
]
