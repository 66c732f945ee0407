"""Two-level dynamics under control fields plus noise.

Provides the error-coefficient integrals of the single-axis model, the
geometric Magnus quantities (endpoint displacement and projected-area vector),
and deterministic Monte Carlo robustness sweeps. All sweeps derive one RNG
stream per strength point from (seed, point index), so serial, batched and
threaded evaluation give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvelib import projected_areas
from .errors import InvalidInput, StepTooCoarse, WrongModel
from .numerics import cumulative_simpson, integrate_simpson, map_points
from .propagator import cf4_su2, conjugated_pauli_vector, trace_fidelity
from .pulsesynth import (
    ControlFields,
    EvolutionOperator,
    _impulse_unitary,
    _node_coefficients,
    _segment_bounds,
    curve_from_fields,
    propagate_fields,
)

INFIDELITY_FLOOR = 1e-15
SLOPE_WINDOW = (1e-10, 1e-2)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise channel plus the strength grid of a robustness sweep.

    kind: "quasistatic-z" (energy fluctuation in the driving frame),
    "quasistatic-x" (gap fluctuation in the LZ frame), or "amplitude"
    (drive fluctuation dOmega = Omega^f_power * eta; f_power=0 is a constant
    offset). distribution "fixed" evaluates each strength once; "normal"
    averages samples_per_point draws from N(0, strength).
    """

    kind: str
    strengths: np.ndarray
    samples_per_point: int = 100
    distribution: str = "normal"
    f_power: int = 1

    def __post_init__(self):
        if self.kind not in ("quasistatic-z", "quasistatic-x", "amplitude"):
            raise InvalidInput(f"unknown noise kind '{self.kind}'")
        if self.distribution not in ("fixed", "normal"):
            raise InvalidInput("distribution must be 'fixed' or 'normal'")
        if self.samples_per_point < 1:
            raise InvalidInput("samples_per_point must be >= 1")
        s = np.atleast_1d(np.asarray(self.strengths, dtype=float))
        if s.size == 0 or not np.all(np.isfinite(s)):
            raise InvalidInput("strength grid must be nonempty and finite")
        object.__setattr__(self, "strengths", s)


@dataclass(frozen=True)
class ErrorReport:
    """Geometric error quantities and the fitted infidelity scaling of a sweep."""

    closure_residual: float
    projected_areas: np.ndarray
    g1: complex | None
    g2: complex | None
    sweep: tuple
    fitted_slope: float | None
    slope_window: tuple | None
    seed: int | None


def default_strength_grid(lo_exponent: float = -3.0, decades: float = 3.0,
                          per_decade: int = 16) -> np.ndarray:
    """Logarithmic strength grid, 16 points per decade across 3 decades."""
    n = int(round(per_decade * decades)) + 1
    return np.logspace(lo_exponent, lo_exponent + decades, n)


def evolve(fields: ControlFields, noise=None, n_steps: int | None = None,
           store_all: bool = False, max_step_phase: float = 0.1) -> EvolutionOperator:
    """Propagate the control Hamiltonian, optionally with one noise draw.

    noise is a (kind, value) pair with a scalar value, e.g.
    ("quasistatic-z", 0.02); amplitude noise takes ("amplitude", eta, f_power).
    Raises StepTooCoarse when ||H|| dt exceeds max_step_phase radians anywhere
    on the grid.
    """
    if noise is not None and np.asarray(noise[1]).ndim != 0:
        raise InvalidInput("evolve takes one noise draw; sweeps handle batches")
    fields = _resampled(fields, n_steps)
    _check_resolution(fields, noise, max_step_phase)
    t, u = propagate_fields(fields, noise=noise, store_all=store_all)
    if not store_all:
        u = u[None, ...]
        t = t[-1:]
    return EvolutionOperator(t=t, unitaries=u)


def _resampled(fields: ControlFields, n_steps: int | None) -> ControlFields:
    if n_steps is None or n_steps + 1 == fields.t.size:
        return fields
    from scipy.interpolate import CubicSpline

    t_new = np.linspace(fields.t[0], fields.t[-1], n_steps + 1)
    series = {name: CubicSpline(fields.t, getattr(fields, name))(t_new)
              for name in ("omega", "phi", "delta")}
    return ControlFields(t=t_new, frame=fields.frame, impulses=fields.impulses,
                         breakpoints=fields.breakpoints, **series)


def _check_resolution(fields: ControlFields, noise, max_step_phase: float):
    h = fields.spacing()
    kind, value = (None, 0.0) if noise is None else (noise[0], noise[1])
    eps = float(np.max(np.abs(value))) if value is not None else 0.0
    om = np.abs(fields.omega)
    if kind == "amplitude":
        f_pow = noise[2] if len(noise) > 2 else 1
        om = om + (np.ones_like(om) if f_pow == 0 else np.abs(fields.omega) ** f_pow) * eps
        eps = 0.0
    norm = np.sqrt((om / 2) ** 2 + (fields.delta / 2) ** 2) + eps
    if float(np.max(norm)) * h > max_step_phase:
        raise StepTooCoarse(f"||H|| dt = {float(np.max(norm)) * h:.3f} rad exceeds "
                            f"{max_step_phase} rad; refine the grid")


def g_coefficients(fields: ControlFields, order: int = 2) -> list[complex]:
    """Error-expansion integrals g_1(T), g_2(T) of the single-axis model.

    g_n(t) = int_0^t e^{i phi} g_{n-1}^* dt' with g_0 = 1; valid only for
    resonant driving (phi = delta = 0). Impulses enter as exact phase jumps,
    applied per segment so the integrand just before a flip is unaffected.
    """
    if order < 1 or order > 2:
        raise InvalidInput("only orders 1 and 2 are implemented")
    if not fields.is_resonant():
        raise WrongModel("g coefficients are defined for the resonant single-axis model")
    h = fields.spacing()
    segments, _ = _segment_bounds(fields)
    base = cumulative_simpson(fields.omega, h)
    seg_phase = []
    offset = 0.0
    for (i0, i1, angle, _skip) in segments:
        offset += angle
        seg_phase.append(np.exp(1j * (base[i0:i1 + 1] + offset)))
    out = []
    g_prev = [np.ones(i1 - i0 + 1, dtype=complex) for (i0, i1, _a, _s) in segments]
    for _ in range(order):
        g_segs = []
        g_run = 0.0 + 0.0j
        for e_seg, gp in zip(seg_phase, g_prev):
            g_seg = g_run + cumulative_simpson(e_seg * gp.conj(), h)
            g_run = g_seg[-1]
            g_segs.append(g_seg)
        out.append(complex(g_run))
        g_prev = g_segs
    return out


def magnus_error(fields: ControlFields, noise_axis: str | None = None):
    """Leading Magnus data of the interaction-picture error: (r(T), int r x dr).

    The first vector is the net displacement of the error curve (first-order
    coefficient); the second is the second-order commutator integral, twice
    the projected-area vector.
    """
    if noise_axis is None:
        noise_axis = "x" if fields.frame == "lz" else "z"
    h = fields.spacing()
    segments, _ = _segment_bounds(fields)
    u = np.eye(2, dtype=complex)
    r_end = np.zeros(3)
    area = np.zeros(3)
    for (i0, i1, angle, skip) in segments:
        if angle:
            u = _impulse_unitary(angle) @ u
        a_lo, a_hi = _node_coefficients(fields, i0, i1, skip_first=skip)
        traj = cf4_su2(h, a_lo, a_hi, store_all=True, u0=u)
        rdot = conjugated_pauli_vector(traj, noise_axis)
        r_seg = r_end + cumulative_simpson(rdot, h)
        area = area + integrate_simpson(np.cross(r_seg, rdot), h)
        r_end = r_seg[-1]
        u = traj[-1]
    return r_end, area


def fit_loglog_slope(strengths: np.ndarray, infidelities: np.ndarray,
                     window=SLOPE_WINDOW):
    """Least-squares slope of log10(infidelity) vs log10(strength).

    Fitted over the largest contiguous run of points whose infidelity lies in
    the window. Returns (slope, (lo, hi)) or (None, None) when no usable run
    of at least three points exists.
    """
    s = np.asarray(strengths, dtype=float)
    f = np.asarray(infidelities, dtype=float)
    ok = (f > window[0]) & (f < window[1]) & (s > 0)
    best = (0, 0)
    i = 0
    while i < ok.size:
        if not ok[i]:
            i += 1
            continue
        j = i
        while j < ok.size and ok[j]:
            j += 1
        if j - i > best[1] - best[0]:
            best = (i, j)
        i = j
    i, j = best
    if j - i < 3:
        return None, None
    slope = np.polyfit(np.log10(s[i:j]), np.log10(f[i:j]), 1)[0]
    return float(slope), (float(s[i]), float(s[j - 1]))


def _sweep_point(fields, target, noise: NoiseSpec, rng_seed: int, index: int) -> float:
    strength = float(noise.strengths[index])
    if noise.distribution == "fixed":
        values = np.array([strength])
    else:
        rng = np.random.default_rng([rng_seed, index])
        values = rng.normal(0.0, strength, noise.samples_per_point)
    tag = ("amplitude", values, noise.f_power) if noise.kind == "amplitude" else (noise.kind, values)
    _, u = propagate_fields(fields, noise=tag)
    fid = trace_fidelity(u, target)
    return float(np.mean(np.clip(1.0 - fid, 0.0, 1.0)))


def infidelity_sweep(fields: ControlFields, target: np.ndarray, noise: NoiseSpec,
                     rng_seed: int) -> ErrorReport:
    """Mean gate infidelity versus noise strength, with fitted log-log slope.

    Fidelity is |Tr(target^dag U(T))|^2 / 4. Deterministic for a given seed;
    strength points are independent and may run in parallel (SCQC_THREADS).
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != (2, 2):
        raise InvalidInput("target must be a 2x2 unitary")
    if noise.kind != "amplitude":
        # 5 sigma headroom covers the tails of normal draws
        _check_resolution(fields, (noise.kind, 5.0 * float(np.max(np.abs(noise.strengths)))), 0.5)
    means = map_points(lambda i: _sweep_point(fields, target, noise, rng_seed, i),
                       range(noise.strengths.size))
    sweep = tuple((float(s), m) for s, m in zip(noise.strengths, means))
    slope, window = (None, None)
    if not all(m < INFIDELITY_FLOOR for m in means):
        slope, window = fit_loglog_slope(noise.strengths, np.array(means))
    closure, areas, g1, g2 = _geometry_summary(fields)
    return ErrorReport(closure_residual=closure, projected_areas=areas,
                       g1=g1, g2=g2, sweep=sweep, fitted_slope=slope,
                       slope_window=window, seed=rng_seed)


def _geometry_summary(fields: ControlFields):
    curve = curve_from_fields(fields)
    areas = projected_areas(curve)
    closure = float(np.linalg.norm(curve.points[-1] - curve.points[0]))
    g1 = g2 = None
    if fields.is_resonant():
        g1, g2 = g_coefficients(fields, order=2)
    return closure, areas, g1, g2


def lz_probability(fields: ControlFields, noise: NoiseSpec, rng_seed: int):
    """Mean unwanted-transition probability |<1|U(T)|0>|^2 per noise sigma."""
    if fields.frame != "lz":
        raise WrongModel("LZ probabilities require fields in the LZ frame")
    if noise.kind != "quasistatic-x":
        raise WrongModel("LZ noise rides on sigma_x (kind 'quasistatic-x')")

    def point(i):
        sigma = float(noise.strengths[i])
        if noise.distribution == "fixed" or sigma == 0.0:
            values = np.array([sigma])
        else:
            rng = np.random.default_rng([rng_seed, i])
            values = rng.normal(0.0, sigma, noise.samples_per_point)
        _, u = propagate_fields(fields, noise=("quasistatic-x", values))
        return float(np.mean(np.abs(u[..., 1, 0]) ** 2))

    probs = map_points(point, range(noise.strengths.size))
    return [(float(s), p) for s, p in zip(noise.strengths, probs)]


def amplitude_noise_constraint(fields: ControlFields, f_kind) -> float:
    """The drive-noise cancellation integral int_0^T f[Omega(t)] dt.

    f_kind "unity" gives exactly T (a constant offset can never cancel);
    an integer k gives int Omega^k dt, strictly positive for even k.
    """
    if f_kind == "unity":
        return fields.duration
    if isinstance(f_kind, tuple):
        f_kind = f_kind[1]
    if not isinstance(f_kind, (int, np.integer)) or f_kind < 0:
        raise InvalidInput("f_kind must be 'unity' or a nonnegative integer power")
    if f_kind == 0:
        return fields.duration
    h = fields.spacing()
    return float(integrate_simpson(fields.omega ** int(f_kind), h))
