import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinqec.channel import (
    QuantumChannel,
    amplitude_damping,
    apply,
    channel_from_amplitude,
    channels_equal,
    choi,
    compose,
    identity_channel,
    is_density_matrix,
    minimal_kraus,
    phase_gate,
    pure_state,
    rotate_output,
    tensor_power,
)
from spinqec.spinchain import TransitionAmplitude


def random_density(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


amplitude_values = st.builds(
    lambda r, th: r * np.exp(1j * th), st.floats(0, 1), st.floats(-np.pi, np.pi)
)


def test_unit_amplitude_is_identity():
    ch = channel_from_amplitude(1.0)
    assert np.allclose(ch.kraus[0], np.eye(2))
    assert np.allclose(ch.kraus[1], 0)


def test_zero_amplitude_total_damping():
    ch = channel_from_amplitude(0.0)
    rho = random_density(np.random.default_rng(0), 2)
    assert np.allclose(apply(ch, rho), np.diag([1, 0]))


def test_accepts_transition_amplitude():
    a = channel_from_amplitude(TransitionAmplitude(0.3 + 0.4j))
    b = channel_from_amplitude(0.3 + 0.4j)
    assert np.array_equal(a.kraus, b.kraus)


def test_amplitude_too_large():
    with pytest.raises(ValueError):
        channel_from_amplitude(1.0 + 1e-9)
    channel_from_amplitude(1.0 + 1e-13)


def test_real_amplitude_is_amplitude_damping():
    f = 0.9
    assert np.allclose(channel_from_amplitude(f).kraus, amplitude_damping(1 - f * f).kraus)


@pytest.mark.parametrize("p", [-0.1, 1.1])
def test_damping_range(p):
    with pytest.raises(ValueError):
        amplitude_damping(p)


def test_damping_on_excited_state():
    assert np.allclose(apply(amplitude_damping(0.19), np.diag([0, 1])), np.diag([0.19, 0.81]))
    assert channels_equal(amplitude_damping(0.0), identity_channel(2))


def test_phase_gate_values():
    assert np.allclose(phase_gate(0.0), np.eye(2))
    assert np.allclose(phase_gate(2 * np.pi), np.eye(2))


def test_phase_gate_removes_phase():
    ch = rotate_output(channel_from_amplitude(0.9 * np.exp(0.7j)), phase_gate(0.7))
    assert np.abs(ch.kraus - amplitude_damping(0.19).kraus).max() < 1e-12


def test_output_matches_reduced_state_formula():
    # rho_out = [[1 - |f b|^2, a b* f*], [a* b f, |f b|^2]] for input a|0> + b|1>
    f = 0.6 - 0.5j
    a, b = 0.6, 0.8j
    out = apply(channel_from_amplitude(f), pure_state([a, b]))
    expected = np.array([
        [1 - abs(f * b) ** 2, a * np.conj(b) * np.conj(f)],
        [np.conj(a) * b * f, abs(f * b) ** 2],
    ])
    assert np.allclose(out, expected)


def test_tensor_power_structure():
    f = 0.8 * np.exp(0.3j)
    ch = channel_from_amplitude(f)
    assert channels_equal(tensor_power(ch, 1), ch)
    four = tensor_power(ch, 4)
    assert len(four) == 16 and four.dim == 16
    # index 0b0111 is E0 (x) E1 (x) E1 (x) E1 in lexicographic order
    op = four.kraus[0b0111]
    assert op[0b0000, 0b0111] == pytest.approx((1 - abs(f) ** 2) ** 1.5)
    assert four.completeness_error() < 1e-12


def test_tensor_power_of_identity():
    assert channels_equal(tensor_power(identity_channel(2), 3), identity_channel(8))


def test_tensor_power_limits():
    with pytest.raises(ValueError):
        tensor_power(amplitude_damping(0.1), 0)
    with pytest.raises(ValueError):
        tensor_power(amplitude_damping(0.1), 7)


def test_tensor_power_on_product_states():
    rng = np.random.default_rng(5)
    ch = channel_from_amplitude(0.7 + 0.2j)
    states = [random_density(rng, 2) for _ in range(3)]
    joint = np.kron(np.kron(states[0], states[1]), states[2])
    out = apply(tensor_power(ch, 3), joint)
    singles = [apply(ch, s) for s in states]
    assert np.allclose(out, np.kron(np.kron(singles[0], singles[1]), singles[2]))


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        apply(amplitude_damping(0.1), np.eye(4) / 4)


def test_compose_damping():
    a = compose(amplitude_damping(0.2), amplitude_damping(0.3))
    assert len(a) == 4
    assert channels_equal(a, amplitude_damping(1 - 0.8 * 0.7))
    assert channels_equal(compose(identity_channel(2), amplitude_damping(0.3)), amplitude_damping(0.3))


def test_compose_matches_sequential_application():
    rng = np.random.default_rng(1)
    e = channel_from_amplitude(0.6 + 0.3j)
    r = channel_from_amplitude(0.9j)
    rho = random_density(rng, 2)
    assert np.abs(apply(compose(r, e), rho) - apply(r, apply(e, rho))).max() < 1e-12


def test_compose_counts_and_mismatch():
    e = tensor_power(amplitude_damping(0.1), 4)
    assert len(compose(e, e)) == 256
    with pytest.raises(ValueError):
        compose(e, amplitude_damping(0.1))


def test_minimal_kraus_equivalent():
    e = tensor_power(channel_from_amplitude(0.7 + 0.1j), 2)
    big = compose(e, e)
    small = minimal_kraus(big)
    assert len(small) <= 16
    assert channels_equal(small, big)


def test_choi_of_identity():
    c = choi(identity_channel(2))
    # unnormalised maximally entangled projector
    assert np.allclose(c, np.outer([1, 0, 0, 1], [1, 0, 0, 1]))


def test_support_contract():
    proj = np.diag([1.0, 0.0])
    ch = QuantumChannel(np.array([[[1, 0], [0, 0]]]), proj)
    assert not ch.trace_preserving
    assert ch.completeness_error() == 0
    with pytest.raises(ValueError):
        QuantumChannel(np.eye(2)[None], np.eye(3))


@settings(max_examples=40, deadline=None)
@given(f=amplitude_values, seed=st.integers(0, 2**32 - 1))
def test_channel_properties(f, seed):
    ch = channel_from_amplitude(f)
    assert ch.completeness_error() < 1e-10
    assert np.linalg.eigvalsh(choi(ch)).min() > -1e-9
    rho = random_density(np.random.default_rng(seed), 2)
    out = apply(ch, rho)
    assert is_density_matrix(out, tol=1e-9)


@settings(max_examples=20, deadline=None)
@given(f=amplitude_values, g=amplitude_values)
def test_tensor_power_completeness(f, g):
    ch = tensor_power(compose(channel_from_amplitude(g), channel_from_amplitude(f)), 2)
    assert ch.completeness_error() < 1e-10
    assert np.linalg.eigvalsh(choi(ch)).min() > -1e-9


def test_apply_preserves_positivity_batch():
    rng = np.random.default_rng(2)
    ch = tensor_power(channel_from_amplitude(0.8 - 0.3j), 2)
    rhos = np.stack([random_density(rng, 4) for _ in range(100)])
    out = apply(ch, rhos)
    assert np.abs(out - out.conj().transpose(0, 2, 1)).max() < 1e-12
    assert np.linalg.eigvalsh(out).min() > -1e-9
    assert np.allclose(np.trace(out, axis1=1, axis2=2), 1)
