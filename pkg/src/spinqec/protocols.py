"""End-to-end transfer experiments built on the chain, channel and code layers."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .channel import QuantumChannel, channel_from_amplitude, compose, minimal_kraus, tensor_power
from .disorder import DisorderModel, batch_amplitudes, disordered_amplitudes, sample_deltas, _check_ideal
from .qec import (
    QUADRATIC_COEFF,
    CodeSpace,
    get_code,
    logical_kraus,
    petz_recovery,
    worst_case_from_kraus,
    worst_case_fidelity_noqec,
)
from .spinchain import SubspaceHamiltonian, amplitudes, build_subspace_hamiltonian, ideal_xxx_spec

DEFAULT_T_MAX = 4000.0
DEFAULT_STEP = 0.05
# optimal-time window for disordered runs; see README ("Choice of t*")
DISORDER_T_MAX = 100.0
SEGMENT_LENGTH = 8


@dataclass
class ExperimentRecord:
    n: int
    s: int
    r: int
    t: float
    delta: float = 0.0
    code: str = ""
    n_samples: int = 0
    seed: int | None = None
    f_sq: float = math.nan
    f_sq_min: float = math.nan
    stderr: float = 0.0
    t_star: float = math.nan
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


def find_optimal_time(h: SubspaceHamiltonian, s: int, r: int, t_max: float = DEFAULT_T_MAX, coarse_step: float = DEFAULT_STEP) -> tuple[float, float]:
    """Time in (0, t_max] maximising |f_{r,s}(t)|.

    A coarse scan is followed by golden-section refinement of every coarse
    local maximum that could still hold the global one; ties within 1e-9
    go to the earliest time.
    """
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    if coarse_step <= 0:
        raise ValueError(f"coarse_step must be positive, got {coarse_step}")
    n_steps = max(1, int(math.ceil(t_max / coarse_step)))
    times = np.linspace(t_max / n_steps, t_max, n_steps)
    mags = np.abs(amplitudes(h, s, r, times))

    # |f''| <= ||H||^2, so a grid point is at most this far below a nearby peak
    norm = float(np.abs(h.eig[0]).max())
    slack = 0.5 * (coarse_step * norm) ** 2 + 1e-12
    best = float(mags.max())
    padded = np.concatenate([[-np.inf], mags, [-np.inf]])
    is_peak = (padded[1:-1] >= padded[:-2]) & (padded[1:-1] >= padded[2:])
    candidates = np.flatnonzero(is_peak & (mags >= best - slack))

    def neg_mag(t):
        return -abs(complex(amplitudes(h, s, r, t)))

    t_star, f_star = float(times[np.argmax(mags)]), best
    for i in candidates:
        lo = times[i - 1] if i > 0 else 0.0
        hi = times[i + 1] if i + 1 < times.size else t_max
        res = minimize_scalar(neg_mag, bracket=None, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
        t_c, f_c = float(res.x), -float(res.fun)
        if f_c < mags[i]:
            t_c, f_c = float(times[i]), float(mags[i])
        if f_c > f_star + 1e-9 or (abs(f_c - f_star) <= 1e-9 and t_c < t_star):
            t_star, f_star = t_c, f_c
    return t_star, f_star


def ideal_optimal_time(n: int, t_max: float = DEFAULT_T_MAX, coarse_step: float = DEFAULT_STEP, coupling: float = 1.0) -> tuple[float, float]:
    h = build_subspace_hamiltonian(ideal_xxx_spec(n, coupling))
    return find_optimal_time(h, 1, n, t_max, coarse_step)


def qec_logical_kraus(f_noise: complex, code: CodeSpace, f_recovery: complex | None = None) -> np.ndarray:
    """Logical Kraus operators of R(f_recovery) o E(f_noise)^{(x)n} on ``code``."""
    noise = tensor_power(channel_from_amplitude(f_noise), code.n_physical)
    if f_recovery is None or f_recovery == f_noise:
        rec_noise = noise
    else:
        rec_noise = tensor_power(channel_from_amplitude(f_recovery), code.n_physical)
    return logical_kraus(noise, petz_recovery(rec_noise, code), code)


def qec_worst_case(f_noise: complex, code: CodeSpace, f_recovery: complex | None = None) -> float:
    return worst_case_from_kraus(qec_logical_kraus(f_noise, code, f_recovery)).f_sq_min


def fidelity_vs_length(n_values, codes=("four", "five"), t_max: float = DEFAULT_T_MAX, coarse_step: float = DEFAULT_STEP) -> list[ExperimentRecord]:
    """Per chain length: t*, no-QEC |f|^2 and worst-case fidelity of each code at t*."""
    code_objs = {c: get_code(c) for c in codes}
    records = []
    for n in n_values:
        if n < 2:
            raise ValueError(f"chain length must be >= 2, got {n}")
        h = build_subspace_hamiltonian(ideal_xxx_spec(n))
        t_star, _ = find_optimal_time(h, 1, n, t_max, coarse_step)
        f = complex(amplitudes(h, 1, n, t_star))
        extra = {f"fmin_{c}": qec_worst_case(f, code) for c, code in code_objs.items()}
        records.append(
            ExperimentRecord(
                n, 1, n, t_star, f_sq=worst_case_fidelity_noqec(f), t_star=t_star,
                f_sq_min=extra.get("fmin_four", math.nan), code=",".join(codes), extra=extra,
            )
        )
    return records


def closed_form_repeated(p: float, alpha: float, k: int) -> float:
    """Infidelity after k rounds when one round leaves 1 - alpha p^2."""
    return 1.0 - (1.0 - alpha * p * p) ** k


def compose_logical(channels: list[QuantumChannel]) -> QuantumChannel:
    """Apply qubit channels in list order."""
    out = channels[0]
    for ch in channels[1:]:
        out = compose(ch, out)
        # Kraus counts grow multiplicatively; compress through the Choi matrix
        out = minimal_kraus(out)
    return out


def repeated_qec_fidelity(total_length: int, segment_length: int = SEGMENT_LENGTH, code_id: str = "four",
                          t_max: float = DEFAULT_T_MAX, coarse_step: float = DEFAULT_STEP,
                          rest_at_own_optimum: bool = False) -> ExperimentRecord:
    """Stitched transfer over ``total_length`` sites with recovery after every hop.

    k full hops over ``segment_length`` sites (k largest with
    segment_length * k < L) are followed by one hop over the remaining
    L - (segment_length - 1) k sites, all at the optimal time of the segment
    chain.  With ``rest_at_own_optimum`` the last hop instead waits for the
    optimal time of its own length.  Per-hop logical channels are composed;
    the no-QEC comparison stitches bare transfer channels.
    """
    if total_length < segment_length:
        raise ValueError(f"total length {total_length} shorter than segment {segment_length}")
    code = get_code(code_id)
    t_seg, _ = ideal_optimal_time(segment_length, t_max, coarse_step)
    k = (total_length - 1) // segment_length
    hops = [segment_length] * k
    rest = total_length - (segment_length - 1) * k
    if rest > 1:
        hops.append(rest)

    qec_hops, bare_hops, amps = [], [], []
    for i, n in enumerate(hops):
        h = build_subspace_hamiltonian(ideal_xxx_spec(n))
        t_hop = t_seg
        if rest_at_own_optimum and i == len(hops) - 1 and n != segment_length:
            t_hop, _ = find_optimal_time(h, 1, n, t_max, coarse_step)
        f = complex(amplitudes(h, 1, n, t_hop))
        amps.append(f)
        qec_hops.append(QuantumChannel(qec_logical_kraus(f, code)))
        bare_hops.append(channel_from_amplitude(f))
    fmin_qec = worst_case_from_kraus(compose_logical(qec_hops).kraus).f_sq_min
    fmin_bare = worst_case_from_kraus(compose_logical(bare_hops).kraus).f_sq_min

    p_seg = 1 - abs(amps[0]) ** 2
    alpha = QUADRATIC_COEFF[code_id]
    return ExperimentRecord(
        total_length, 1, total_length, t_seg, code=code_id, f_sq_min=fmin_qec, t_star=t_seg,
        f_sq=fmin_bare,
        extra={
            "hops": hops,
            "rounds": len(hops),
            "p_segment": p_seg,
            "p_hops": [1 - abs(f) ** 2 for f in amps],
            "p_new_closed_form": closed_form_repeated(p_seg, alpha, len(hops)),
            "fmin_noqec_stitched": fmin_bare,
        },
    )


def single_shot_qec(total_length: int, code_id: str = "four", t_max: float = DEFAULT_T_MAX, coarse_step: float = DEFAULT_STEP) -> float:
    h = build_subspace_hamiltonian(ideal_xxx_spec(total_length))
    t_star, _ = find_optimal_time(h, 1, total_length, t_max, coarse_step)
    return qec_worst_case(complex(amplitudes(h, 1, total_length, t_star)), get_code(code_id))


def repeated_identical_rounds(p: float, k: int, code_id: str = "four") -> float:
    """Worst-case fidelity after k identical QEC rounds on a real damping channel."""
    ch = QuantumChannel(qec_logical_kraus(math.sqrt(1 - p), get_code(code_id)))
    return worst_case_from_kraus(compose_logical([ch] * k).kraus).f_sq_min


def _map_ordered(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def disorder_averaged_qec(base, model: DisorderModel, code_id: str = "four", s: int = 1, r: int | None = None,
                          t: float | None = None, threads: int = 1, t_max: float = DISORDER_T_MAX) -> ExperimentRecord:
    """<F^2_min>_delta with a recovery built once from the disorder-averaged amplitude.

    For every realization the per-realization worst case of R_avg o E^{(x)n}
    is computed; the record holds their mean and standard error.
    """
    _check_ideal(base, model)
    n = base.n_sites
    r = n if r is None else r
    if t is None:
        t, _ = find_optimal_time(build_subspace_hamiltonian(base), s, r, t_max)
    code = get_code(code_id)
    if model.delta == 0:
        f = complex(amplitudes(build_subspace_hamiltonian(base), s, r, t))
        amps = np.full(model.n_samples, f)
        f_avg = f
    else:
        amps = disordered_amplitudes(base, model, s, r, t)
        f_avg = complex(amps.mean())
    rec = petz_recovery(tensor_power(channel_from_amplitude(f_avg), code.n_physical), code)
    v = code.basis

    def one(f):
        noise = tensor_power(channel_from_amplitude(f), code.n_physical)
        ops = np.einsum("ai,kab,bj->kij", v.conj(), compose(rec, noise).kraus, v)
        return worst_case_from_kraus(ops).f_sq_min

    if model.delta == 0:
        fids = np.full(model.n_samples, one(amps[0]))
    else:
        fids = np.array(_map_ordered(one, list(amps), threads))
    stderr = float(fids.std(ddof=1) / math.sqrt(fids.size)) if fids.size > 1 else 0.0
    return ExperimentRecord(
        n, s, r, float(t), model.delta, code_id, model.n_samples, model.seed,
        f_sq=float(np.mean(np.abs(amps) ** 2)), f_sq_min=float(fids.mean()), stderr=stderr,
        extra={"f_avg_re": f_avg.real, "f_avg_im": f_avg.imag},
    )


@dataclass
class LocalizationProfile:
    delta: float
    t: float
    mean_prob: np.ndarray
    stderr: np.ndarray
    slope: float | None
    intercept: float | None
    loc_length: float | None


def localization_profile(base, model: DisorderModel, t: float, s: int = 1) -> LocalizationProfile:
    """Disorder-averaged |f_{n,s}(t)|^2 for every site n plus an exponential fit.

    The fit is log <|f_n|^2> = -(slope n + intercept) over sites above 1e-6;
    the localization length is the site distance over which the fitted
    curve drops by 1/e, i.e. 1/slope.
    """
    if model.n_samples < 100:
        raise ValueError("localization profile needs at least 100 realizations")
    _check_ideal(base, model)
    deltas = sample_deltas(model, base.n_sites - 1)
    col = batch_amplitudes(deltas, model.mean_coupling, s, s, t, all_r=True)
    probs = np.abs(col) ** 2
    mean = probs.mean(axis=0)
    stderr = probs.std(axis=0, ddof=1) / math.sqrt(model.n_samples)
    sites = np.arange(1, base.n_sites + 1)
    mask = mean > 1e-6
    slope = intercept = loc = None
    if np.count_nonzero(mask) >= 2:
        k, b = np.polyfit(sites[mask], np.log(mean[mask]), 1)
        slope, intercept = float(-k), float(-b)
        loc = float(1.0 / slope) if slope > 0 else None
    return LocalizationProfile(model.delta, float(t), mean, stderr, slope, intercept, loc)


@dataclass
class BreakEvenScan:
    code: str
    p: np.ndarray
    gap: np.ndarray  # F^2_min(QEC) - (1 - p)
    crossings: list


def break_even_scan(code_id: str = "four", p_grid=None) -> BreakEvenScan:
    """Locate p where the exact adaptive-QEC worst case meets the bare value 1 - p.

    Sign changes of the gap on ``p_grid`` are refined with Brent's method.
    An empty ``crossings`` list means QEC stays on one side throughout.
    """
    from scipy.optimize import brentq

    from .qec import adaptive_worst_case

    p = np.linspace(0.01, 0.99, 99) if p_grid is None else np.asarray(p_grid, dtype=float)

    def gap(x):
        return adaptive_worst_case(float(x), code_id) - (1 - float(x))

    g = np.array([gap(x) for x in p])
    crossings = []
    for i in np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0):
        crossings.append(float(brentq(gap, p[i], p[i + 1], xtol=1e-8)))
    return BreakEvenScan(code_id, p, g, crossings)
