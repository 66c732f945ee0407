"""Mapping between space curves and control Hamiltonians.

Forward direction: extract drive envelope, phase and detuning from curvature
and torsion. Reverse direction: integrate the driven Schrodinger equation and
accumulate the noise-conjugate displacement to recover the curve. The
holonomic (parallel-transport) field extraction lives here too.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .curvelib import (
    FRAME_TOL,
    Curve,
    frenet_series,
    signed_curvature_series,
    standardize_pose,
)
from .errors import (
    DistributionalPulseWarning,
    InvalidInput,
    NotArclength,
    UndefinedFrame,
    UnsupportedCurve,
)
from .numerics import cumulative_simpson, derivative_uniform, unwrap_angle
from .propagator import cf4_su2, conjugated_pauli_vector, su2_exp

OPERATOR_TOL = 1e-6
_POLE_TOL = 1e-5


@dataclass(frozen=True)
class ControlFields:
    """Drive envelope, phase and detuning series on a uniform grid over [0, T].

    frame selects the Hamiltonian convention:
      "driving": H = Omega/2 (cos Phi sx + sin Phi sy) + Delta/2 sz
      "lz":      H = Omega/2 sz + Delta/2 sx  (phi ignored)
    impulses are exact delta-function x-rotations (time, angle) on top of the
    sampled series; breakpoints mark discontinuities of the smooth series so
    integration never interpolates across them.
    """

    t: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    delta: np.ndarray
    frame: str = "driving"
    impulses: tuple = ()
    breakpoints: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        series = {}
        for name in ("omega", "phi", "delta"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != t.shape:
                raise InvalidInput(f"{name} must match the time grid")
            if not np.all(np.isfinite(v)):
                raise InvalidInput(f"{name} contains non-finite values")
            series[name] = v
        if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
            raise InvalidInput("time grid must be strictly increasing")
        if t[-1] - t[0] <= 0:
            raise InvalidInput("duration must be positive")
        if self.frame not in ("driving", "lz"):
            raise InvalidInput("frame must be 'driving' or 'lz'")
        object.__setattr__(self, "t", t)
        for name, v in series.items():
            object.__setattr__(self, name, v)
        object.__setattr__(self, "impulses", tuple((float(a), float(b)) for a, b in self.impulses))
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def is_resonant(self, tol: float = 1e-12) -> bool:
        """Single-axis model: driving frame with phi = delta = 0."""
        return (self.frame == "driving"
                and float(np.max(np.abs(self.phi))) <= tol
                and float(np.max(np.abs(self.delta))) <= tol)

    def spacing(self) -> float:
        dt = np.diff(self.t)
        h = float(dt[0])
        if not np.allclose(dt, h, rtol=1e-9):
            raise InvalidInput("operation requires a uniform pulse grid")
        return h


@dataclass(frozen=True)
class EvolutionOperator:
    """Time series of unitaries, optionally with the (theta, zeta, lambda) angles."""

    t: np.ndarray
    unitaries: np.ndarray
    params: dict | None = None

    def __post_init__(self):
        u = np.asarray(self.unitaries, dtype=complex)
        if u.ndim != 3 or u.shape[0] != np.asarray(self.t).size:
            raise InvalidInput("unitaries must be a (n, k, k) series on the grid")
        gram = np.swapaxes(u.conj(), -1, -2) @ u - np.eye(u.shape[-1])
        defect = float(np.max(np.linalg.norm(gram, axis=(-2, -1))))
        if defect > 1e-8:
            raise InvalidInput(f"series is not unitary (defect {defect:.2e})")
        object.__setattr__(self, "unitaries", u)
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))

    @property
    def final(self) -> np.ndarray:
        return self.unitaries[-1]


@dataclass(frozen=True)
class HolonomyRecord:
    """Bloch path (theta, phi) of the cyclic state with its geometric phase alpha.

    transport_rate is the worst pointwise parallel-transport violation
    |alpha' + (1-cos theta)/2 phi'| in rad/time; transport_defect is the worst
    accumulated deviation (its running integral) in rad.
    """

    t: np.ndarray
    theta: np.ndarray
    phi_angle: np.ndarray
    alpha: np.ndarray
    solid_angle: float
    transport_rate: float = 0.0
    transport_defect: float = 0.0


# ---------------------------------------------------------------------------
# propagation plumbing


def _segment_bounds(fields: ControlFields):
    """Grid index ranges of smooth segments plus the impulse applied before each.

    Series samples are left-continuous at breakpoints: the sample stored at a
    jump node belongs to the segment ending there, so the following segment
    must extrapolate across it (flagged by skip_first).
    """
    t = fields.t
    h = fields.spacing()
    cuts = {0, t.size - 1}
    break_nodes = set()
    impulse_at = {}
    for tb in fields.breakpoints:
        i = int(round((tb - t[0]) / h))
        if 0 < i < t.size - 1:
            cuts.add(i)
            break_nodes.add(i)
    for ti, angle in fields.impulses:
        i = int(round((ti - t[0]) / h))
        if not (0 <= i < t.size) or abs(t[i] - ti) > h / 2 + 1e-12:
            raise InvalidInput("impulse times must lie on the pulse grid")
        cuts.add(i)
        impulse_at[i] = impulse_at.get(i, 0.0) + angle
    idx = sorted(cuts)
    segments = []
    for a, b in zip(idx[:-1], idx[1:]):
        segments.append((a, b, impulse_at.get(a, 0.0), a in break_nodes))
    final_impulse = impulse_at.get(t.size - 1, 0.0)
    return segments, final_impulse


def _node_coefficients(fields: ControlFields, i0: int, i1: int, noise=None,
                       skip_first: bool = False):
    """Hamiltonian Pauli vectors at the CF4 Gauss nodes of grid steps [i0, i1].

    With skip_first the segment starts at a jump whose node sample belongs to
    the previous segment; the spline then excludes it and extrapolates.
    Returns (a_lo, a_hi) with shape (steps, 3), or (batch, steps, 3) when the
    noise value is an array.
    """
    t = fields.t[i0:i1 + 1]
    h = float(t[1] - t[0])
    lo = t[:-1] + (0.5 - np.sqrt(3) / 6) * h
    hi = t[:-1] + (0.5 + np.sqrt(3) / 6) * h
    j0 = i0 + 1 if skip_first and i1 - i0 >= 4 else i0

    def sample(series):
        if i1 - j0 + 1 >= 4:
            f = CubicSpline(fields.t[j0:i1 + 1], series[j0:i1 + 1], extrapolate=True)
        else:
            f = lambda x: np.interp(x, t, series[i0:i1 + 1])
        return f(lo), f(hi)

    om_lo, om_hi = sample(fields.omega)
    ph_lo, ph_hi = sample(fields.phi)
    de_lo, de_hi = sample(fields.delta)

    kind, value = (None, 0.0) if noise is None else noise
    value = np.asarray(value, dtype=float)
    batched = value.ndim == 1
    if kind == "amplitude":
        f_pow = noise[2] if len(noise) > 2 else 1
        def bump(om):
            fv = np.ones_like(om) if f_pow == 0 else om ** f_pow
            return om[None, :] + fv[None, :] * value[:, None] if batched else om + fv * value
        om_lo, om_hi = bump(om_lo), bump(om_hi)
        ph_lo = ph_lo[None, :] if batched else ph_lo
        de_lo = de_lo[None, :] if batched else de_lo
        ph_hi = ph_hi[None, :] if batched else ph_hi
        de_hi = de_hi[None, :] if batched else de_hi

    def assemble(om, ph, de):
        if fields.frame == "lz":
            ax = 0.5 * de * np.ones_like(om)
            ay = np.zeros_like(om)
            az = 0.5 * om
        else:
            ax = 0.5 * om * np.cos(ph)
            ay = 0.5 * om * np.sin(ph)
            az = 0.5 * de * np.ones_like(om)
        return np.stack([ax, ay, az], axis=-1)

    a_lo = assemble(om_lo, ph_lo, de_lo)
    a_hi = assemble(om_hi, ph_hi, de_hi)
    if kind in ("quasistatic-z", "quasistatic-x"):
        unit = np.array([0.0, 0.0, 1.0]) if kind == "quasistatic-z" else np.array([1.0, 0.0, 0.0])
        if batched:
            shift = value[:, None, None] * unit
            a_lo = a_lo[None, ...] + shift
            a_hi = a_hi[None, ...] + shift
        else:
            a_lo = a_lo + float(value) * unit
            a_hi = a_hi + float(value) * unit
    elif kind not in (None, "amplitude"):
        raise InvalidInput(f"unknown noise kind '{kind}'")
    return a_lo, a_hi


def _impulse_unitary(angle: float) -> np.ndarray:
    return su2_exp(np.array([angle / 2.0, 0.0, 0.0]))


def propagate_fields(fields: ControlFields, noise=None, store_all: bool = False):
    """Propagate the control (plus optional noise) across the pulse grid.

    Impulses are applied as exact rotations at their grid node; with store_all
    the reported unitary at an impulse node is the post-impulse one.
    Returns (t, U) where U is (n, 2, 2), or batched (m, n, 2, 2) for an array
    noise value; without store_all only the final unitary.
    """
    if fields.impulses and noise is not None and noise[0] == "amplitude":
        raise InvalidInput("amplitude noise on impulse sequences is not supported")
    if fields.frame == "lz" and fields.impulses:
        raise InvalidInput("impulses are defined in the driving frame only")
    h = fields.spacing()
    segments, final_impulse = _segment_bounds(fields)
    value = None if noise is None else np.asarray(noise[1], dtype=float)
    batched = value is not None and value.ndim == 1
    shape = (value.size,) if batched else ()
    u = np.broadcast_to(np.eye(2, dtype=complex), shape + (2, 2)).copy()
    n = fields.t.size
    if store_all:
        traj = np.empty(shape + (n, 2, 2), dtype=complex)
        traj[..., 0, :, :] = u

    for (i0, i1, angle, skip) in segments:
        if angle:
            u = _impulse_unitary(angle) @ u
            if store_all:
                traj[..., i0, :, :] = u
        a_lo, a_hi = _node_coefficients(fields, i0, i1, noise, skip_first=skip)
        out = cf4_su2(h, a_lo, a_hi, store_all=store_all, u0=u)
        if store_all:
            traj[..., i0:i1 + 1, :, :] = out
            u = out[..., -1, :, :]
        else:
            u = out
    if final_impulse:
        u = _impulse_unitary(final_impulse) @ u
        if store_all:
            traj[..., n - 1, :, :] = u
    return (fields.t, traj) if store_all else (fields.t, u)


# ---------------------------------------------------------------------------
# fields -> curve


def curve_from_fields(fields: ControlFields, noise_axis: str | None = None) -> Curve:
    """Space curve traced by the noise operator in the control's frame.

    Integrates U_c, accumulates the Pauli coefficients of the conjugated noise
    axis; the result is arc-length parameterized by construction.
    """
    if noise_axis is None:
        noise_axis = "x" if fields.frame == "lz" else "z"
    if noise_axis not in ("x", "z"):
        raise InvalidInput("noise_axis must be 'x' (LZ frame) or 'z' (driving frame)")
    h = fields.spacing()
    segments, final_impulse = _segment_bounds(fields)
    n = fields.t.size
    pts = np.zeros((n, 3))
    u = np.eye(2, dtype=complex)
    offset = np.zeros(3)
    for (i0, i1, angle, skip) in segments:
        if angle:
            u = _impulse_unitary(angle) @ u
        a_lo, a_hi = _node_coefficients(fields, i0, i1, skip_first=skip)
        traj = cf4_su2(h, a_lo, a_hi, store_all=True, u0=u)
        rdot = conjugated_pauli_vector(traj, noise_axis)
        seg = cumulative_simpson(rdot, h)
        pts[i0:i1 + 1] = offset + seg
        offset = pts[i1]
        u = traj[-1]
    return Curve(t=fields.t, points=pts, is_arclength=True)


# ---------------------------------------------------------------------------
# curve -> fields


def fields_from_plane_curve(curve: Curve) -> ControlFields:
    """Resonant drive whose envelope is the signed curvature of a plane curve.

    Tangent reversals (retraced lines) cannot be held by the sampled series;
    they come back as exact pi impulses and a DistributionalPulseWarning.
    """
    if curve.dim != 2:
        raise InvalidInput("expected a plane curve")
    if not curve.is_arclength:
        raise NotArclength("plane curve must be arc-length parameterized")
    h = curve.spacing()
    chords = np.diff(curve.points, axis=0)
    norms = np.linalg.norm(chords, axis=1)
    dots = np.einsum("ij,ij->i", chords[:-1], chords[1:]) / (norms[:-1] * norms[1:])
    reversals = np.where(dots < -0.5)[0] + 1  # chord pair (i-1, i) reverses at node i
    omega = signed_curvature_series(curve)
    impulses = []
    for i in reversals:
        impulses.append((float(curve.t[i]), np.pi))
        lo, hi = max(0, i - 2), min(curve.t.size, i + 3)
        omega[lo:hi] = 0.0
    if impulses:
        warnings.warn("tangent reversals represented as impulse rotations",
                      DistributionalPulseWarning, stacklevel=2)
    zeros = np.zeros_like(omega)
    return ControlFields(t=curve.t - curve.t[0], omega=omega, phi=zeros, delta=zeros,
                         impulses=tuple(impulses))


def _frenet_or_raise(curve: Curve, frame_tol: float):
    data = frenet_series(curve, frame_tol)
    bad = ~data["defined"]
    if bad.any():
        raise UndefinedFrame(f"curvature below tolerance at {int(bad.sum())} samples "
                             "(straight segments have no Frenet frame)")
    return data


def fields_from_space_curve(curve: Curve, delta_choice="zero-phi",
                            frame_tol: float = FRAME_TOL) -> ControlFields:
    """Extract (omega, phi, delta) from a 3D curve's curvature and torsion.

    The curve fixes omega = kappa and the combination dPhi/dt - Delta = tau;
    delta_choice resolves the frame freedom: "zero-phi" puts everything in the
    detuning, or a caller-supplied Delta series is integrated into Phi.
    """
    if curve.dim != 3:
        raise InvalidInput("expected a 3D space curve")
    if not curve.is_arclength:
        raise NotArclength("space curve must be arc-length parameterized")
    h = curve.spacing()
    data = _frenet_or_raise(curve, frame_tol)
    omega = data["kappa"]
    tau = data["torsion"]
    t = curve.t - curve.t[0]
    if isinstance(delta_choice, str):
        if delta_choice != "zero-phi":
            raise InvalidInput("delta_choice must be 'zero-phi' or a Delta series")
        phi = np.zeros_like(omega)
        delta = -tau
    else:
        delta = np.asarray(delta_choice, dtype=float)
        if delta.shape != t.shape:
            raise InvalidInput("Delta series must match the curve grid")
        phi = cumulative_simpson(tau + delta, h)
    return ControlFields(t=t, omega=omega, phi=phi, delta=delta)


def _filled_unwrapped(t, raw, good, anchor0: float | None):
    """Unwrap an angle series over its valid samples and fill the rest."""
    tg, vg = t[good], unwrap_angle(raw[good])
    if anchor0 is not None and not good[0]:
        tg = np.concatenate([[t[0]], tg])
        vg = np.concatenate([[anchor0], vg])
    filled = PchipInterpolator(tg, vg)(t)
    filled[good] = vg[-good.sum():] if anchor0 is None or good[0] else vg[1:]
    return filled


def evolution_from_curve(curve: Curve, delta_integral: np.ndarray | None = None,
                         frame_tol: float = FRAME_TOL) -> EvolutionOperator:
    """Reconstruct the evolution operator encoded by a 3D space curve.

    theta and zeta are read from the tangent components, the remaining phase
    from the integrated torsion plus the quadrant-aware arctan of the second
    derivatives; the frame choice enters through the supplied integral of the
    detuning. The curve is rigidly moved to the reference pose first.
    """
    if curve.dim != 3:
        raise InvalidInput("expected a 3D space curve")
    if not curve.is_arclength:
        raise NotArclength("space curve must be arc-length parameterized")
    curve = standardize_pose(curve)
    h = curve.spacing()
    t = curve.t - curve.t[0]
    d1 = derivative_uniform(curve.points, h, 1)
    d2 = derivative_uniform(curve.points, h, 2)
    d1 /= np.linalg.norm(d1, axis=1, keepdims=True)

    theta = np.arccos(np.clip(d1[:, 2], -1.0, 1.0))
    sin_theta = np.sin(theta)
    good = sin_theta > _POLE_TOL
    zeta = _filled_unwrapped(t, np.arctan2(-d1[:, 0], d1[:, 1]), good, anchor0=0.0)

    data = _frenet_or_raise(curve, frame_tol)
    tau_int = cumulative_simpson(data["torsion"], h)

    num = d2[:, 0] * d1[:, 1] - d2[:, 1] * d1[:, 0]
    den = d2[:, 2]
    mag = np.hypot(num, den)
    good_a = good & (mag > _POLE_TOL * np.max(mag))
    arct = _filled_unwrapped(t, np.arctan2(-num, -den), good_a, anchor0=0.0)
    lam = -tau_int + arct

    if delta_integral is None:
        delta_integral = np.zeros_like(t)
    delta_integral = np.asarray(delta_integral, dtype=float)
    if delta_integral.shape != t.shape:
        raise InvalidInput("delta_integral must be a series on the curve grid")

    half = theta / 2.0
    u = np.empty((t.size, 2, 2), dtype=complex)
    u[:, 0, 0] = np.exp(0.5j * (zeta + lam)) * np.cos(half)
    u[:, 0, 1] = -1j * np.exp(-0.5j * (zeta - lam)) * np.sin(half)
    u[:, 1, 0] = -1j * np.exp(0.5j * (zeta - lam)) * np.sin(half)
    u[:, 1, 1] = np.exp(-0.5j * (zeta + lam)) * np.cos(half)
    rot = np.exp(-0.5j * delta_integral)
    u[:, 0, :] *= rot[:, None]
    u[:, 1, :] *= rot.conj()[:, None]
    params = {"theta": theta, "zeta": zeta, "lam": lam, "delta_integral": delta_integral}
    return EvolutionOperator(t=t, unitaries=u, params=params)


# ---------------------------------------------------------------------------
# doubly geometric gates


def holonomy_from_evolution(t: np.ndarray, unitaries: np.ndarray) -> HolonomyRecord:
    """Bloch path and geometric phase of the state starting at |0>.

    The pointwise parallel-transport rate is evaluated as |Im <psi|dpsi/dt>|,
    which equals |alpha' + (1-cos theta)/2 phi'| without the polar-coordinate
    singularities; its running integral gives the accumulated defect in rad.
    """
    h = float(t[1] - t[0])
    psi = np.asarray(unitaries)[:, :, 0]
    c0, c1 = psi[:, 0], psi[:, 1]
    theta = 2.0 * np.arctan2(np.abs(c1), np.abs(c0))
    good0 = np.abs(c0) > 1e-6
    alpha = _filled_unwrapped(t, np.angle(c0), good0, anchor0=0.0)
    good1 = np.abs(c1) > 1e-6
    rel = np.angle(c1 * np.exp(-1j * alpha))
    phi = _filled_unwrapped(t, rel, good1, anchor0=None)
    dpsi = derivative_uniform(psi, h, 1)
    rate = np.imag(np.einsum("ij,ij->i", psi.conj(), dpsi))
    rate[:2] = rate[2]
    rate[-2:] = rate[-3]
    defect = cumulative_simpson(rate, h)
    solid = -2.0 * float(alpha[-1] - alpha[0])
    return HolonomyRecord(t=t, theta=theta, phi_angle=phi, alpha=alpha,
                          solid_angle=solid,
                          transport_rate=float(np.max(np.abs(rate[2:-2]))),
                          transport_defect=float(np.max(np.abs(defect))))


def dog_fields_from_closed_curve(curve: Curve, frame_tol: float = FRAME_TOL,
                                 z_band: float = 1e-3):
    """Holonomic control fields of a smooth closed space curve.

    Omega is the curvature, Delta = (x'y'' - y'x'')/z' with removable
    singularities interpolated where the tangent crosses the equator, and
    Phi integrates tau + Delta. Returns the fields together with the
    parallel-transport record of the generated evolution.
    """
    if curve.dim != 3:
        raise InvalidInput("expected a 3D space curve")
    if not curve.is_arclength:
        raise NotArclength("space curve must be arc-length parameterized")
    curve = standardize_pose(curve)
    h = curve.spacing()
    t = curve.t - curve.t[0]
    data = _frenet_or_raise(curve, frame_tol)
    d1 = derivative_uniform(curve.points, h, 1)
    d2 = derivative_uniform(curve.points, h, 2)
    num = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    zdot = d1[:, 2]
    bad = np.abs(zdot) < z_band * np.max(np.abs(zdot))
    run = _longest_run(bad)
    if run > max(16, 0.05 * t.size):
        raise UnsupportedCurve("tangent z-component vanishes on an extended interval")
    delta = np.zeros_like(zdot)
    delta[~bad] = num[~bad] / zdot[~bad]
    if bad.any():
        idx = np.arange(t.size, dtype=float)
        delta[bad] = np.interp(idx[bad], idx[~bad], delta[~bad])
    phi = cumulative_simpson(data["torsion"] + delta, h)
    fields = ControlFields(t=t, omega=data["kappa"], phi=phi, delta=delta)
    _, traj = propagate_fields(fields, store_all=True)
    record = holonomy_from_evolution(t, traj)
    return fields, record


def _longest_run(mask: np.ndarray) -> int:
    best = cur = 0
    for m in mask:
        cur = cur + 1 if m else 0
        best = max(best, cur)
    return best


def dog_gate(record: HolonomyRecord) -> np.ndarray:
    """diag(e^{i alpha(T)}, e^{-i alpha(T)}), the holonomic z-rotation."""
    a = record.alpha[-1] - record.alpha[0]
    return np.diag([np.exp(1j * a), np.exp(-1j * a)])


def holonomy_phase(record: HolonomyRecord) -> float:
    """Accumulated geometric phase alpha(T) - alpha(0), wrapped to (-pi, pi]."""
    a = record.alpha[-1] - record.alpha[0]
    return float(np.angle(np.exp(1j * a)))


def lz_fields_from_curve(curve: Curve, gap: float, frame_tol: float = FRAME_TOL) -> ControlFields:
    """Sweep profile of a constant-torsion curve in the LZ frame.

    The signed curvature (continuous-normal convention) gives -Omega; the
    constant gap rides on sigma_x.
    """
    from .curvelib import signed_curvature_3d

    if curve.dim == 2:
        ks = signed_curvature_series(curve)
    else:
        ks, _ = signed_curvature_3d(curve, frame_tol)
    t = curve.t - curve.t[0]
    omega = -ks
    return ControlFields(t=t, omega=omega, phi=np.zeros_like(omega),
                         delta=np.full_like(omega, float(gap)), frame="lz")
