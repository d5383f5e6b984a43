"""Acceptance checks shared by ``spinqec selftest`` and the test suite.

Each check returns a :class:`CriterionResult` carrying the measured numbers,
so failures report how far off they are instead of just a boolean.
"""
from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .channel import amplitude_damping, channel_from_amplitude, choi, compose, tensor_power
from .disorder import (
    DEFAULT_SEED,
    DisorderModel,
    analytic_density,
    batch_amplitudes,
    disorder_moments,
    dyson_first_order_coeffs,
    perturbative_amplitude,
    sample_deltas,
)
from .protocols import (
    DISORDER_T_MAX,
    break_even_scan,
    closed_form_repeated,
    disorder_averaged_qec,
    ideal_optimal_time,
    localization_profile,
    repeated_identical_rounds,
    repeated_qec_fidelity,
    single_shot_qec,
)
from .qec import QUADRATIC_COEFF, fit_quadratic_coefficient, four_qubit_code, petz_recovery, worst_case_fidelity
from .spinchain import ChainSpec, build_full_hamiltonian, build_subspace_hamiltonian, excitation_index, ideal_xxx_spec, transition_amplitude, transition_row


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail}"


def random_spec(rng: np.random.Generator, n: int) -> ChainSpec:
    return ChainSpec(n, rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n))


def disorder_t_star(n: int = 8) -> float:
    return ideal_optimal_time(n, t_max=DISORDER_T_MAX)[0]


def criterion_1(seed: int = DEFAULT_SEED) -> CriterionResult:
    """Subspace amplitudes against full-space evolution with the ground-energy phase removed."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for n in range(2, 9):
        for _ in range(10):
            spec = random_spec(rng, n)
            t = rng.uniform(0, 10)
            s, r = (int(x) for x in rng.integers(1, n + 1, 2))
            h_full = build_full_hamiltonian(spec)
            vals, vecs = np.linalg.eigh(h_full)
            u = (vecs * np.exp(-1j * vals * t)) @ vecs.conj().T
            e0 = h_full[0, 0].real
            oracle = u[excitation_index(n, r), excitation_index(n, s)] * np.exp(1j * e0 * t)
            got = transition_amplitude(build_subspace_hamiltonian(spec), s, r, t).value
            worst = max(worst, abs(got - oracle))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 30
    return CriterionResult(1, "oracle equivalence", ok, {"max_error": worst, "seconds": elapsed},
                           f"max |f - oracle| = {worst:.2e} (< 1e-10), {elapsed:.1f} s (< 30 s)")


def criterion_2(seed: int = DEFAULT_SEED) -> CriterionResult:
    """Row normalisation and unitarity of the one-excitation propagator up to 64 sites."""
    rng = np.random.default_rng(seed + 1)
    worst_norm = worst_unitary = 0.0
    for n in (2, 3, 8, 17, 33, 64):
        h = build_subspace_hamiltonian(random_spec(rng, n))
        for t in rng.uniform(0, 50, 20):
            u = h.propagator(t)
            for s in (1, n):
                worst_norm = max(worst_norm, abs(np.sum(np.abs(transition_row(h, s, t)) ** 2) - 1))
            worst_unitary = max(worst_unitary, float(np.abs(u @ u.conj().T - np.eye(n)).max()))
    ok = max(worst_norm, worst_unitary) < 1e-10
    return CriterionResult(2, "unitarity", ok, {"row_norm_error": worst_norm, "unitarity_error": worst_unitary},
                           f"row norm err {worst_norm:.1e}, |UU^dag - I| {worst_unitary:.1e} (< 1e-10)")


def _angle_to_half_pi(x: float) -> float:
    # distance of x from the family pi/2 + n pi
    return abs(x % np.pi - np.pi / 2)


def criterion_3(seed: int = DEFAULT_SEED) -> CriterionResult:
    start = time.perf_counter()
    c0, ratios = fit_quadratic_coefficient("four")
    code = four_qubit_code()
    noise = tensor_power(amplitude_damping(0.01), 4)
    report = worst_case_fidelity(noise, petz_recovery(noise, code), code)
    dtheta = _angle_to_half_pi(report.argmin_theta)
    dphi = _angle_to_half_pi(report.argmin_phi)
    elapsed = time.perf_counter() - start
    ok = abs(c0 - 1.75) <= 0.02 and max(dtheta, dphi) <= 1e-3 and elapsed < 120
    return CriterionResult(3, "four-qubit quadratic coefficient", ok,
                           {"coefficient": c0, "ratios": ratios.tolist(), "dtheta": dtheta, "dphi": dphi, "seconds": elapsed},
                           f"c0 = {c0:.4f} (1.75 +- 0.02), argmin offset ({dtheta:.1e}, {dphi:.1e}) rad, {elapsed:.1f} s")


def criterion_4(seed: int = DEFAULT_SEED) -> CriterionResult:
    c0, ratios = fit_quadratic_coefficient("five")
    ok = abs(c0 - 1.875) <= 0.02
    return CriterionResult(4, "five-qubit quadratic coefficient", ok, {"coefficient": c0, "ratios": ratios.tolist()},
                           f"c0 = {c0:.4f} (1.875 +- 0.02)")


def criterion_5(seed: int = DEFAULT_SEED) -> CriterionResult:
    """Choi matrix of recovery o noise does not depend on the amplitude phase."""
    code = four_qubit_code()
    worst = 0.0
    for mag in (0.7, 0.9, 0.99):
        chois = []
        for theta in (0.0, 0.7, np.pi / 3, 2.1, np.pi):
            noise = tensor_power(channel_from_amplitude(mag * np.exp(1j * theta)), 4)
            chois.append(choi(compose(petz_recovery(noise, code), noise)))
        worst = max(worst, max(float(np.abs(c - chois[0]).max()) for c in chois))
    ok = worst < 1e-10
    return CriterionResult(5, "phase independence", ok, {"max_choi_diff": worst}, f"max Choi difference {worst:.1e} (< 1e-10)")


def criterion_6(seed: int = DEFAULT_SEED) -> CriterionResult:
    targets = {"four": 4 / 7, "five": 8 / 15}
    measured, parts, ok = {}, [], True
    for code_id, target in targets.items():
        scan = break_even_scan(code_id)
        measured[code_id] = {"crossings": scan.crossings, "min_gap": float(scan.gap.min()), "max_gap": float(scan.gap.max())}
        hit = any(abs(x - target) <= 0.03 for x in scan.crossings)
        ok &= hit
        if scan.crossings:
            parts.append(f"{code_id}: crossing at {', '.join(f'{x:.3f}' for x in scan.crossings)} (target {target:.3f})")
        else:
            parts.append(f"{code_id}: no crossing on p in [0.01, 0.99], QEC - bare gap in [{scan.gap.min():.3f}, {scan.gap.max():.3f}] (target {target:.3f})")
    return CriterionResult(6, "break-even thresholds", ok, measured, "; ".join(parts))


def criterion_7(seed: int = DEFAULT_SEED) -> CriterionResult:
    start = time.perf_counter()
    base = ideal_xxx_spec(8)
    t = disorder_t_star(8)
    coeffs = dyson_first_order_coeffs(base, 1, 8, t)
    eps = 1e-5
    eye = np.eye(7)
    fd = (batch_amplitudes(eps * eye, 1.0, 1, 8, t) - batch_amplitudes(-eps * eye, 1.0, 1, 8, t)) / (2 * eps)
    fd_err = float(np.abs(fd - coeffs.c).max())
    mom = disorder_moments(coeffs, 0.001, 100_000, seed)
    rel_re = abs(mom["var_re"] / mom["var_predicted_re"] - 1)
    rel_im = abs(mom["var_im"] / mom["var_predicted_im"] - 1)
    elapsed = time.perf_counter() - start
    ok = fd_err < 1e-6 and rel_re < 0.05 and rel_im < 0.05 and elapsed < 300
    return CriterionResult(7, "Dyson coefficients", ok,
                           {"t": t, "fd_error": fd_err, "var_rel_re": rel_re, "var_rel_im": rel_im, "seconds": elapsed},
                           f"t* = {t:.4f}, finite-difference err {fd_err:.1e} (< 1e-6), variance rel err re {rel_re:.3f} im {rel_im:.3f} (< 0.05)")


def ks_distance(samples: np.ndarray, cdf) -> float:
    x = np.sort(np.asarray(samples))
    m = x.size
    c = cdf(x)
    return float(max(np.max(np.arange(1, m + 1) / m - c), np.max(c - np.arange(m) / m)))


def criterion_8(seed: int = DEFAULT_SEED) -> CriterionResult:
    base = ideal_xxx_spec(8)
    t = disorder_t_star(8)
    coeffs = dyson_first_order_coeffs(base, 1, 8, t)
    delta = 0.001
    model = DisorderModel(delta, n_samples=100_000, seed=seed)
    pert = perturbative_amplitude(coeffs, sample_deltas(model, 7))
    measured, ok = {}, True
    for comp, vals in (("re", pert.real), ("im", pert.imag)):
        dist = analytic_density(coeffs, delta, comp)
        ks = ks_distance(vals, dist.cdf)
        lo, hi = dist.support
        total, _ = quad(dist.pdf, lo, hi, limit=500, epsabs=1e-13)
        measured[comp] = {"ks": ks, "raw_norm": dist.normalization, "integral": total}
        ok &= ks <= 0.01 and abs(dist.normalization - 1) <= 1e-6 and abs(total - 1) <= 1e-6
    detail = ", ".join(
        f"{c}: KS {m['ks']:.4f} (<= 0.01), raw integral {m['raw_norm']:.8f}" for c, m in measured.items()
    )
    return CriterionResult(8, "analytic distribution", ok, measured, detail)


def criterion_9(seed: int = DEFAULT_SEED, n_samples: int = 1000, threads: int = 1) -> CriterionResult:
    start = time.perf_counter()
    base = ideal_xxx_spec(8)
    t = disorder_t_star(8)
    values = {}
    for delta in (0.001, 0.01, 0.06, 0.1):
        rec = disorder_averaged_qec(base, DisorderModel(delta, n_samples=n_samples, seed=seed), t=t, threads=threads)
        values[delta] = (rec.f_sq_min, rec.stderr)
    elapsed = time.perf_counter() - start
    ok = (
        all(values[d][0] >= 0.8 for d in (0.001, 0.01))
        and all(values[d][0] < 0.5 for d in (0.06, 0.1))
        and elapsed < 600
    )
    detail = ", ".join(f"delta={d:g}: {v:.4f}+-{e:.4f}" for d, (v, e) in values.items())
    return CriterionResult(9, "disorder-averaged QEC", ok,
                           {"t": t, "values": {str(d): v for d, v in values.items()}, "seconds": elapsed},
                           f"{detail} (>= 0.8 below 0.01, < 0.5 from 0.06), {elapsed:.0f} s")


LOCALIZATION_DELTAS = (0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1)


def localization_crossing(deltas, probs, level: float = 0.43) -> float | None:
    """First delta where the curve falls through ``level``, by linear interpolation."""
    for i in range(len(deltas) - 1):
        if probs[i] >= level > probs[i + 1]:
            w = (probs[i] - level) / (probs[i] - probs[i + 1])
            return float(deltas[i] + w * (deltas[i + 1] - deltas[i]))
    return None


def criterion_10(seed: int = DEFAULT_SEED, n_samples: int = 1000) -> CriterionResult:
    base = ideal_xxx_spec(8)
    t = disorder_t_star(8)
    probs = [
        float(localization_profile(base, DisorderModel(d, n_samples=n_samples, seed=seed), t).mean_prob[-1])
        for d in LOCALIZATION_DELTAS
    ]
    monotone = bool(np.all(np.diff(probs) < 0))
    cross = localization_crossing(LOCALIZATION_DELTAS, probs)
    ok = monotone and cross is not None and 0.04 <= cross <= 0.09
    where = "none" if cross is None else f"{cross:.4f}"
    return CriterionResult(10, "localization threshold", ok, {"t": t, "probs": probs, "crossing": cross, "monotone": monotone},
                           f"crossing of 0.43 at delta = {where} (in [0.04, 0.09]), monotone = {monotone}")


def criterion_11(seed: int = DEFAULT_SEED) -> CriterionResult:
    measured, ok, parts = {"lengths": {}, "closed_form": []}, True, []
    for length in (16, 24, 32):
        repeated = repeated_qec_fidelity(length).f_sq_min
        single = single_shot_qec(length)
        # not part of the verdict: last hop at its own optimal time
        variant = repeated_qec_fidelity(length, rest_at_own_optimum=True).f_sq_min
        measured["lengths"][length] = (repeated, single, variant)
        ok &= repeated > single
        parts.append(f"L={length}: repeated {repeated:.4f} vs single-shot {single:.4f} (last hop at own t*: {variant:.4f})")
    worst_rel = 0.0
    alpha = QUADRATIC_COEFF["four"]
    for p in (0.02, 0.05, 0.1):
        for k in (1, 2, 5, 10):
            sim = 1 - repeated_identical_rounds(p, k)
            closed = closed_form_repeated(p, alpha, k)
            rel = abs(sim - closed) / sim
            measured["closed_form"].append((p, k, sim, closed))
            worst_rel = max(worst_rel, rel)
    ok &= worst_rel <= 0.2
    return CriterionResult(11, "repeated QEC", ok, {**measured, "worst_rel": worst_rel},
                           f"{'; '.join(parts)}; closed form rel err {worst_rel:.3f} (<= 0.2)")


def criterion_12(seed: int = DEFAULT_SEED) -> CriterionResult:
    """Write the selftest artifacts twice and compare bytes."""
    from .cli import write_artifacts

    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        write_artifacts(Path(a), seed)
        write_artifacts(Path(b), seed)
        names = sorted(p.name for p in Path(a).glob("*.csv"))
        same = names == sorted(p.name for p in Path(b).glob("*.csv")) and all(
            (Path(a) / n).read_bytes() == (Path(b) / n).read_bytes() for n in names
        )
    ok = bool(names) and same
    return CriterionResult(12, "reproducibility", ok, {"files": names}, f"{len(names)} CSV files byte-identical = {same}")


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
}


def run_criterion(number: int, seed: int = DEFAULT_SEED) -> CriterionResult:
    start = time.perf_counter()
    try:
        result = CRITERIA[number](seed)
    except Exception as exc:  # reported as a failure, not a crash
        result = CriterionResult(number, CRITERIA[number].__name__, False, {}, f"raised {type(exc).__name__}: {exc}")
    result.seconds = time.perf_counter() - start
    return result


def run_all(numbers=None, seed: int = DEFAULT_SEED, echo=print) -> list[CriterionResult]:
    results = []
    for k in sorted(CRITERIA) if numbers is None else numbers:
        res = run_criterion(k, seed)
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results

