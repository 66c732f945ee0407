"""Time-dependent noise machinery: filter functions and flat-filter pulses.

The filter response f(w, T) = int e^{i(phi - w t)} dt is evaluated by
quadrature away from w = 0 and by its moment (Taylor) series near w = 0,
where direct quadrature loses all significant digits once several
derivatives have been cancelled. The normalized moments
M_l = T^{-1} int (t/T)^l e^{i phi} dt double as the derivative-flatness
residuals, and their iterated integrals are the hierarchy of plane curves
whose simultaneous closure enforces the flatness order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvelib import Curve
from .errors import CoverageError, FrequencyRangeTooWide, InvalidInput, NoConvergence
from .numerics import cumulative_simpson

MOMENT_TOL = 1e-8
_TAYLOR_SWITCH = 0.5  # |w T| below this uses the moment series
_TAYLOR_TERMS = 28


@dataclass(frozen=True)
class PhaseProfile:
    """Accumulated drive phase phi(t) = int Omega dt' on a uniform grid.

    Jumps (ideal pi flips) are marked via breakpoints; the sample stored at a
    jump node is the left limit. coeffs holds the sine-series coefficients of
    Omega when the profile was built from them.
    """

    t: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    coeffs: tuple = ()
    breakpoints: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        om = np.asarray(self.omega, dtype=float)
        if t.ndim != 1 or phi.shape != t.shape or om.shape != t.shape:
            raise InvalidInput("phi and omega must be sampled on the time grid")
        if abs(phi[0]) > 1e-12:
            raise InvalidInput("phase must start at zero")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def spacing(self) -> float:
        dt = np.diff(self.t)
        h = float(dt[0])
        if not np.allclose(dt, h, rtol=1e-9):
            raise InvalidInput("profile requires a uniform grid")
        return h


@dataclass(frozen=True)
class FilterProfile:
    """Sampled filter response f(w) and F(w) = |f(w)|^2 + |f(-w)|^2."""

    omega: np.ndarray
    f_values: np.ndarray
    F_values: np.ndarray
    k_achieved: int
    derivative_residuals: np.ndarray
    duration: float

    def __post_init__(self):
        F = np.asarray(self.F_values, dtype=float)
        if np.any(F < -1e-12):
            raise InvalidInput("filter values must be nonnegative")
        bound = 2.0 * self.duration ** 2 * (1 + 1e-9)
        if np.any(F > bound):
            raise InvalidInput("filter exceeds the Cauchy-Schwarz bound 2 T^2")


@dataclass(frozen=True)
class SpectrumSpec:
    """Noise power spectrum with hard frequency cutoffs."""

    kind: str
    amplitude: float = 1.0
    alpha: float = 1.0
    omega_lo: float = 0.0
    omega_hi: float = 0.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("one-over-f", "white", "table"):
            raise InvalidInput("spectrum kind must be one-over-f, white or table")
        if not (0 < self.omega_lo < self.omega_hi):
            raise InvalidInput("cutoffs must satisfy 0 < omega_lo < omega_hi")
        if self.amplitude < 0:
            raise InvalidInput("amplitude must be nonnegative")

    def values(self, omega: np.ndarray) -> np.ndarray:
        w = np.abs(np.asarray(omega, dtype=float))
        if self.kind == "white":
            s = np.full_like(w, self.amplitude)
        elif self.kind == "one-over-f":
            s = self.amplitude / np.maximum(w, 1e-300) ** self.alpha
        else:
            wt, st = np.array(self.table).T
            s = np.interp(w, wt, st)
        return np.where((w >= self.omega_lo) & (w <= self.omega_hi), s, 0.0)


def default_one_over_f(duration: float, amplitude: float = 1.0, alpha: float = 1.0) -> SpectrumSpec:
    return SpectrumSpec(kind="one-over-f", amplitude=amplitude, alpha=alpha,
                        omega_lo=2 * np.pi / (100 * duration),
                        omega_hi=2 * np.pi * 50 / duration)


def profile_from_coefficients(coeffs, duration: float, n_samples: int = 2049) -> PhaseProfile:
    """Phase profile of Omega(t) = sum_j c_j sin(j pi t / T).

    The sine ansatz vanishes at both ends and integrates in closed form, so
    phi carries no quadrature error.
    """
    c = np.asarray(coeffs, dtype=float)
    t = np.linspace(0.0, duration, n_samples)
    j = np.arange(1, c.size + 1)
    om = np.sin(np.outer(t, j) * np.pi / duration) @ c
    phi = (1.0 - np.cos(np.outer(t, j) * np.pi / duration)) @ (c * duration / (j * np.pi))
    return PhaseProfile(t=t, phi=phi, omega=om, coeffs=tuple(c))


def _segments(profile: PhaseProfile):
    t = profile.t
    h = profile.spacing()
    nodes = {0, t.size - 1}
    for b in profile.breakpoints:
        i = int(round((b - t[0]) / h))
        if 0 < i < t.size - 1:
            nodes.add(i)
    idx = sorted(nodes)
    return list(zip(idx[:-1], idx[1:]))


def _segment_integral(profile: PhaseProfile, values: np.ndarray):
    """Integral of a series that may jump at the profile breakpoints.

    The sample at a jump node holds the left limit; the right limit is
    extrapolated linearly from the two samples after it.
    """
    h = profile.spacing()
    total = np.zeros(values.shape[1:], dtype=values.dtype)
    for (i0, i1) in _segments(profile):
        seg = np.array(values[i0:i1 + 1])
        if i0 != 0 and i1 - i0 >= 2:
            seg[0] = 2.0 * seg[1] - seg[2]
        total = total + cumulative_simpson(seg, h)[-1]
    return total


def moments(profile: PhaseProfile, count: int) -> np.ndarray:
    """Normalized phase moments M_l = T^{-1} int (t/T)^l e^{i phi} dt, l < count."""
    T = profile.duration
    e = np.exp(1j * profile.phi)
    powers = (profile.t / T)[:, None] ** np.arange(count)[None, :]
    return _segment_integral(profile, e[:, None] * powers) / T


def derivative_residuals(profile: PhaseProfile, k: int) -> np.ndarray:
    """|d^l f / d(wT)^l| at w=0 (normalized by T), for l = 0 .. k-1.

    Uses the moment identity instead of numerical differentiation in w.
    """
    if k < 1:
        raise InvalidInput("k must be at least 1")
    return np.abs(moments(profile, k))


def filter_function(profile: PhaseProfile, omegas) -> FilterProfile:
    """Filter response on the requested angular-frequency grid.

    Quadrature away from zero; the moment series inside |wT| < 0.5 where a
    flat filter falls below quadrature roundoff. Frequencies must satisfy the
    sampling bound (max|Omega| + |w|) h < 0.5.
    """
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    T = profile.duration
    h = profile.spacing()
    if (float(np.max(np.abs(profile.omega))) + float(np.max(np.abs(w)))) * h >= 0.5:
        raise FrequencyRangeTooWide("phase samples too coarse for the requested frequencies")

    mom = moments(profile, _TAYLOR_TERMS)

    def f_at(ws):
        out = np.empty(ws.size, dtype=complex)
        small = np.abs(ws) * T < _TAYLOR_SWITCH
        if small.any():
            powers = (-1j * np.outer(ws[small], np.ones(_TAYLOR_TERMS)) * T) ** np.arange(_TAYLOR_TERMS)
            fact = np.cumprod(np.concatenate([[1.0], np.arange(1, _TAYLOR_TERMS)]))
            out[small] = T * (powers / fact) @ mom
        if (~small).any():
            phase = profile.phi[:, None] - np.outer(profile.t, ws[~small])
            out[~small] = _segment_integral(profile, np.exp(1j * phase))
        return out

    f_pos = f_at(w)
    f_neg = f_at(-w)
    F = np.abs(f_pos) ** 2 + np.abs(f_neg) ** 2
    resid = np.abs(mom)
    k_achieved = 0
    while k_achieved < _TAYLOR_TERMS and resid[k_achieved] <= MOMENT_TOL:
        k_achieved += 1
    return FilterProfile(omega=w, f_values=f_pos, F_values=F, k_achieved=k_achieved,
                         derivative_residuals=resid, duration=T)


def curve_hierarchy(profile: PhaseProfile, k: int) -> list[Curve]:
    """Plane curves r_0 .. r_{k-1}: iterated time integrals of e^{i phi}.

    All k curves close together exactly when the first k filter derivatives
    vanish; only r_0 is arc-length parameterized.
    """
    if k < 1:
        raise InvalidInput("k must be at least 1")
    h = profile.spacing()
    out = []
    integrand = np.exp(1j * profile.phi)
    for m in range(k):
        if m == 0:
            r = np.zeros(profile.t.size, dtype=complex)
            for (i0, i1) in _segments(profile):
                seg = np.array(integrand[i0:i1 + 1])
                if i0 != 0 and i1 - i0 >= 2:
                    seg[0] = 2.0 * seg[1] - seg[2]
                r[i0:i1 + 1] = r[i0] + cumulative_simpson(seg, h)
        else:
            r = cumulative_simpson(integrand, h)
        out.append(Curve(t=profile.t, points=np.stack([r.real, r.imag], axis=1),
                         is_arclength=(m == 0)))
        integrand = r
    return out


def hierarchy_tolerance(duration: float, m: int, base: float = 1e-6) -> float:
    """Closure tolerance for r_m: iterated integrals scale as T^{m+1}."""
    return base * duration ** (m + 1)


def _newton_residual(coeffs, k, target, duration, n_samples):
    prof = profile_from_coefficients(coeffs, duration, n_samples)
    m = moments(prof, k)
    rot = (prof.phi[-1] - target) / np.pi
    return np.concatenate([m.view(float), [rot]]), prof


def newton_construct(k: int, target_rotation: float, n_coeffs: int, seed: int,
                     duration: float = 1.0, n_samples: int = 2049,
                     max_iters: int = 200, tol: float = 1e-9,
                     n_starts: int = 8) -> PhaseProfile:
    """Solve for a sine-series pulse with k vanishing filter derivatives.

    Damped Gauss-Newton on the stacked residual (k complex moments as 2k
    reals, plus the rotation constraint), central-difference Jacobian,
    backtracking line search, multi-start with deterministic seeding. The
    lowest-residual converged start wins; ties go to the lowest start index.
    """
    if k < 1 or k > 8:
        raise InvalidInput("flatness order k must lie in 1..8")
    if n_coeffs < k + 2:
        raise InvalidInput("need at least k + 2 sine coefficients")

    def solve(c0):
        c = np.array(c0, dtype=float)
        r, _ = _newton_residual(c, k, target_rotation, duration, n_samples)
        best = np.linalg.norm(r)
        for _ in range(max_iters):
            if np.max(np.abs(r)) <= tol * 1e-3:
                break
            jac = np.empty((r.size, c.size))
            for j in range(c.size):
                step = 1e-6 * max(abs(c[j]), 1.0)
                cp, cm = c.copy(), c.copy()
                cp[j] += step
                cm[j] -= step
                rp, _ = _newton_residual(cp, k, target_rotation, duration, n_samples)
                rm, _ = _newton_residual(cm, k, target_rotation, duration, n_samples)
                jac[:, j] = (rp - rm) / (2 * step)
            delta = np.linalg.lstsq(jac, -r, rcond=None)[0]
            scale = 1.0
            for _ in range(30):
                r_try, _ = _newton_residual(c + scale * delta, k, target_rotation,
                                            duration, n_samples)
                if np.linalg.norm(r_try) < np.linalg.norm(r):
                    c = c + scale * delta
                    r = r_try
                    break
                scale *= 0.5
            else:
                break
            best = min(best, np.linalg.norm(r))
        return c, float(np.max(np.abs(r)))

    bound = 4.0 * np.pi / duration
    smooth = np.zeros(n_coeffs)
    smooth[0] = np.pi * target_rotation / (2.0 * duration)
    starts = [smooth]
    for s in range(1, n_starts):
        # perturbations of growing size around the smooth seed keep early
        # starts on the low-bandwidth solution branch
        rng = np.random.default_rng([seed, s])
        amp = min(bound, 0.25 * s * np.pi / duration)
        starts.append(smooth + rng.uniform(-amp, amp, n_coeffs))

    results = []
    for c0 in starts:
        c, resid = solve(c0)
        results.append((resid, c))
        if resid <= tol:
            break
    best_resid, best_c = min(results, key=lambda rc: rc[0])
    if best_resid > tol:
        raise NoConvergence(best_resid)
    return profile_from_coefficients(best_c, duration, n_samples)


def spectral_infidelity(filt: FilterProfile, spectrum: SpectrumSpec) -> float:
    """Leading-order infidelity (1/3) int dw/2pi S(w) F(w, T).

    Trapezoid over the spectrum's cutoff window using the even symmetry of
    both S and F; the filter grid must cover the window.
    """
    w = filt.omega
    if float(np.min(w)) > spectrum.omega_lo or float(np.max(w)) < spectrum.omega_hi:
        raise CoverageError("filter grid does not cover the spectrum support")
    lo, hi = spectrum.omega_lo, spectrum.omega_hi
    inside = (w >= lo) & (w <= hi)
    grid = np.concatenate([[lo], w[inside], [hi]])
    grid = np.unique(grid)
    F = np.interp(grid, w, filt.F_values)
    s = spectrum.values(grid)
    val = np.trapezoid(s * F, grid) / (3.0 * np.pi)
    return float(max(val, 0.0))
