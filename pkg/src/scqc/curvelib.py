"""Discrete differential geometry of sampled plane and space curves.

Curves are stored as samples on uniform grids; derivatives come from 5-point
stencils (one-sided at the ends), which keeps third derivatives (needed for
torsion) usable at ~10^3 samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import DegenerateCurve, InvalidInput, NotArclength, NotOnSphere, UndefinedFrame
from .numerics import cumulative_simpson, derivative_uniform, integrate_simpson

ARCLENGTH_TOL = 1e-6
FRAME_TOL = 1e-9
TORSION_TOL = 1e-3
INTEGRATION_TOL = 1e-6

MIN_SAMPLES = 8


@dataclass(frozen=True)
class Curve:
    """Sampled curve r(t) in 2 or 3 dimensions."""

    t: np.ndarray
    points: np.ndarray
    is_arclength: bool = False

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if t.ndim != 1 or pts.ndim != 2 or pts.shape[0] != t.size:
            raise InvalidInput("curve needs t (n,) and points (n, dim)")
        if pts.shape[1] not in (2, 3):
            raise InvalidInput("curve dimension must be 2 or 3")
        if t.size < MIN_SAMPLES:
            raise InvalidInput(f"curve needs at least {MIN_SAMPLES} samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(pts))):
            raise InvalidInput("curve samples must be finite")
        if np.any(np.diff(t) <= 0):
            raise InvalidInput("curve times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def spacing(self) -> float:
        """Grid step; raises unless the grid is uniform."""
        dt = np.diff(self.t)
        h = float(dt[0])
        if not np.allclose(dt, h, rtol=1e-9, atol=1e-12 * max(1.0, abs(h))):
            raise InvalidInput("operation requires a uniform time grid")
        return h


@dataclass(frozen=True)
class FrenetFrame:
    """Orthonormal frame and curvatures at one instant (tangent first)."""

    t: float
    e_vectors: tuple
    curvatures: tuple


@dataclass(frozen=True)
class SphericalCurve:
    """Curve of unit 3-vectors, optionally arc-length parameterized."""

    t: np.ndarray
    points: np.ndarray
    is_arclength: bool = False

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        pts = np.asarray(self.points, dtype=float)
        if t.ndim != 1 or pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] != t.size:
            raise InvalidInput("spherical curve needs t (n,) and points (n, 3)")
        norms = np.linalg.norm(pts, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-8:
            raise NotOnSphere(f"samples off the unit sphere by {np.max(np.abs(norms - 1.0)):.2e}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "points", pts)

    def spacing(self) -> float:
        dt = np.diff(self.t)
        h = float(dt[0])
        if not np.allclose(dt, h, rtol=1e-9, atol=1e-12 * max(1.0, abs(h))):
            raise InvalidInput("operation requires a uniform grid")
        return h


def arc_length(curve) -> float:
    """Total length from refined chord sums (Richardson on midpoint splits)."""
    pts = curve.points
    chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return float(np.sum(chord))


def curve_speed(curve: Curve) -> np.ndarray:
    """|dr/dt| from stencil derivatives on the uniform grid."""
    h = curve.spacing()
    return np.linalg.norm(derivative_uniform(curve.points, h, 1), axis=1)


def _refined_cumlength(pts: np.ndarray, interp_s: np.ndarray, splines) -> np.ndarray:
    """Cumulative arc length along sample points, Richardson-refined.

    chord(h) underestimates arc by kappa^2 h^2/24; evaluating the interpolant
    at segment midpoints and combining (4*half - full)/3 removes that term.
    """
    full = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    mid_s = 0.5 * (interp_s[:-1] + interp_s[1:])
    mid = np.stack([f(mid_s) for f in splines], axis=1)
    half = np.linalg.norm(mid - pts[:-1], axis=1) + np.linalg.norm(pts[1:] - mid, axis=1)
    seg = (4.0 * half - full) / 3.0
    out = np.zeros(pts.shape[0])
    np.cumsum(seg, out=out[1:])
    return out


def reparameterize_arclength(curve: Curve, tol: float = ARCLENGTH_TOL, n_samples: int | None = None) -> Curve:
    """Resample a curve so time equals arc length (unit speed within tol)."""
    pts = curve.points
    chord = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = float(np.sum(chord))
    if total <= 0 or np.any(chord <= 1e-14 * max(total, 1.0)):
        raise DegenerateCurve("repeated or coincident samples give zero-length segments")
    n_out = n_samples or pts.shape[0]

    s = np.zeros(pts.shape[0])
    np.cumsum(chord, out=s[1:])
    for _ in range(6):
        # monotone-cubic refinement of the cumulative chord length, then a
        # C^2 resample of the coordinates against it
        splines = [PchipInterpolator(s, pts[:, k]) for k in range(pts.shape[1])]
        s_ref = _refined_cumlength(pts, s, splines)
        splines = [CubicSpline(s_ref, pts[:, k]) for k in range(pts.shape[1])]
        s_new = np.linspace(0.0, s_ref[-1], n_out)
        pts = np.stack([f(s_new) for f in splines], axis=1)
        s = s_new
        out = Curve(t=s_new, points=pts, is_arclength=True)
        dev = float(np.max(np.abs(curve_speed(out) - 1.0)))
        if dev <= tol:
            return out
    return out


def _derivs(curve: Curve, orders=(1, 2, 3)):
    h = curve.spacing()
    return [derivative_uniform(curve.points, h, m) for m in orders]


def signed_curvature_series(curve: Curve) -> np.ndarray:
    """Signed curvature x'y'' - x''y' of a 2D arc-length curve."""
    if curve.dim != 2:
        raise InvalidInput("signed curvature is a plane-curve quantity")
    if not curve.is_arclength:
        raise NotArclength("curve must be arc-length parameterized")
    d1, d2 = _derivs(curve, orders=(1, 2))
    return d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]


def signed_curvature_2d(curve: Curve, t: float) -> float:
    """Signed curvature at the grid sample nearest t."""
    series = signed_curvature_series(curve)
    i = int(np.argmin(np.abs(curve.t - t)))
    return float(series[i])


def frenet_series(curve: Curve, frame_tol: float = FRAME_TOL):
    """Tangent, normal, curvature (and binormal/torsion in 3D) on the grid.

    Returns a dict of arrays; normal/binormal/torsion entries are NaN where
    the curvature falls below frame_tol.
    """
    if not curve.is_arclength:
        raise NotArclength("Frenet data requires an arc-length curve")
    d1, d2, d3 = _derivs(curve)
    tangent = d1 / np.linalg.norm(d1, axis=1, keepdims=True)
    # remove the tangential component before normalizing the normal
    d2_perp = d2 - np.einsum("ij,ij->i", d2, tangent)[:, None] * tangent
    kappa = np.linalg.norm(d2_perp, axis=1)
    defined = kappa > frame_tol
    normal = np.full_like(tangent, np.nan)
    normal[defined] = d2_perp[defined] / kappa[defined, None]
    out = {"t": curve.t, "tangent": tangent, "kappa": kappa, "normal": normal, "defined": defined}
    if curve.dim == 3:
        cross = np.cross(d1, d2)
        denom = np.einsum("ij,ij->i", cross, cross)
        torsion = np.full(curve.t.shape, np.nan)
        torsion[defined] = np.einsum("ij,ij->i", cross[defined], d3[defined]) / denom[defined]
        binormal = np.full_like(tangent, np.nan)
        binormal[defined] = np.cross(tangent[defined], normal[defined])
        out["torsion"] = torsion
        out["binormal"] = binormal
    return out


def frenet_frame(curve: Curve, t: float, frame_tol: float = FRAME_TOL, signed: bool = False) -> FrenetFrame:
    """Frenet frame at the grid sample nearest t.

    With signed=True (2D only) the normal is the +90-degree rotation of the
    tangent and the curvature carries its sign, the convention used for
    sweeps whose curvature crosses zero.
    """
    if signed:
        if curve.dim != 2:
            raise InvalidInput("signed frame convention is 2D only")
        i = int(np.argmin(np.abs(curve.t - t)))
        d1 = _derivs(curve, orders=(1,))[0]
        tang = d1[i] / np.linalg.norm(d1[i])
        normal = np.array([-tang[1], tang[0]])
        k = signed_curvature_series(curve)[i]
        return FrenetFrame(t=float(curve.t[i]), e_vectors=(tang, normal), curvatures=(float(k),))
    data = frenet_series(curve, frame_tol)
    i = int(np.argmin(np.abs(curve.t - t)))
    if not data["defined"][i]:
        raise UndefinedFrame(f"curvature {data['kappa'][i]:.3e} below tolerance at t={t}")
    if curve.dim == 2:
        return FrenetFrame(t=float(curve.t[i]), e_vectors=(data["tangent"][i], data["normal"][i]),
                           curvatures=(float(data["kappa"][i]),))
    return FrenetFrame(
        t=float(curve.t[i]),
        e_vectors=(data["tangent"][i], data["normal"][i], data["binormal"][i]),
        curvatures=(float(data["kappa"][i]), float(data["torsion"][i])),
    )


def closure_residual(curve) -> float:
    """|r(T) - r(0)|, the magnitude of the uncancelled leading-order error."""
    return float(np.linalg.norm(curve.points[-1] - curve.points[0]))


def projected_areas(curve: Curve) -> np.ndarray:
    """Signed areas (1/2) oint r x dr of the three Cartesian projections.

    2D curves report their single signed area in the z slot.
    """
    h = curve.spacing()
    pts = curve.points
    d1 = derivative_uniform(pts, h, 1)
    if curve.dim == 2:
        integrand = pts[:, 0] * d1[:, 1] - pts[:, 1] * d1[:, 0]
        return np.array([0.0, 0.0, 0.5 * integrate_simpson(integrand, h)])
    integrand = np.cross(pts, d1)
    return 0.5 * np.asarray(integrate_simpson(integrand, h))


_CANONICAL_2D = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
_CANONICAL_3D = (np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]), np.array([-1.0, 0.0, 0.0]))


def curve_from_curvature(t: np.ndarray, kappa: np.ndarray, torsion: np.ndarray | None = None,
                         dim2: bool = False, initial_frame: FrenetFrame | None = None) -> Curve:
    """Integrate the Frenet-Serret system at unit speed.

    kappa (and torsion in 3D) are signed series on a uniform grid; negative
    curvature means the rotating frame bends the other way, which is how
    sweeps through zero are represented.
    """
    t = np.asarray(t, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(kappa))):
        raise InvalidInput("NaN or Inf in curvature inputs")
    if t.ndim != 1 or kappa.shape != t.shape:
        raise InvalidInput("kappa must be sampled on the time grid")
    h = float(t[1] - t[0])
    if not np.allclose(np.diff(t), h, rtol=1e-9):
        raise InvalidInput("curvature must be sampled on a uniform grid")

    if dim2:
        # the plane Frenet system reduces exactly to the tangent-angle quadrature
        e1 = initial_frame.e_vectors[0] if initial_frame else _CANONICAL_2D[0]
        psi0 = float(np.arctan2(e1[1], e1[0]))
        psi = psi0 + cumulative_simpson(kappa, h)
        vel = np.stack([np.cos(psi), np.sin(psi)], axis=1)
        pts = cumulative_simpson(vel, h)
        return Curve(t=t - t[0], points=pts, is_arclength=True)

    if torsion is None:
        raise InvalidInput("3D integration needs a torsion series")
    torsion = np.asarray(torsion, dtype=float)
    if torsion.shape != t.shape or not np.all(np.isfinite(torsion)):
        raise InvalidInput("torsion must be finite and sampled on the time grid")

    if initial_frame is not None:
        frame = np.stack([np.asarray(v, dtype=float) for v in initial_frame.e_vectors])
        if frame.shape != (3, 3):
            raise InvalidInput("3D initial frame needs three vectors")
    else:
        frame = np.stack(_CANONICAL_3D)

    k_s = CubicSpline(t, kappa)
    tau_s = CubicSpline(t, torsion)

    def rhs(kv, tv, state):
        T, N, B = state
        return np.stack([kv * N, -kv * T + tv * B, -tv * N])

    n = t.size
    pts = np.zeros((n, 3))
    tangents = np.zeros((n, 3))
    tangents[0] = frame[0]
    state = frame
    for i in range(n - 1):
        t0 = t[i]
        k1 = rhs(kappa[i], torsion[i], state)
        km, tm = float(k_s(t0 + 0.5 * h)), float(tau_s(t0 + 0.5 * h))
        k2 = rhs(km, tm, state + 0.5 * h * k1)
        k3 = rhs(km, tm, state + 0.5 * h * k2)
        k4 = rhs(kappa[i + 1], torsion[i + 1], state + h * k3)
        state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        # Gram-Schmidt keeps the frame from drifting off orthonormality
        q, _ = np.linalg.qr(state.T)
        state = (q * np.sign(np.einsum("ij,ji->i", state, q))[:, None].T).T
        tangents[i + 1] = state[0]
    pts = cumulative_simpson(tangents, h)
    return Curve(t=t - t[0], points=pts, is_arclength=True)


def binormal_to_curve(b: SphericalCurve, gap: float) -> Curve:
    """Constant-torsion space curve -(1/gap) int b x db from a binormal indicatrix.

    The output torsion equals -gap; it closes exactly when the three projected
    areas of b vanish.
    """
    if gap == 0:
        raise InvalidInput("gap must be nonzero")
    if not b.is_arclength:
        raise NotArclength("binormal indicatrix must be arc-length parameterized")
    h = b.spacing()
    db = derivative_uniform(b.points, h, 1)
    integrand = np.cross(b.points, db)
    r = -cumulative_simpson(integrand, h) / gap
    # unit-speed b makes |dr/ds| = 1/|gap| exactly; rescale time to unit speed
    t_out = b.t / abs(gap)
    curve = Curve(t=t_out - t_out[0], points=r, is_arclength=True)
    return reparameterize_arclength(curve)


def twist_curve(plane: Curve, xi: float) -> Curve:
    """Twist a (y, z) plane curve into 3D about the z axis by angle xi*z^3."""
    if plane.dim != 2:
        raise InvalidInput("twist_curve expects a 2D curve supplying (y, z)")
    y, z = plane.points[:, 0], plane.points[:, 1]
    ang = xi * z ** 3
    lever = y - np.pi / 2.0
    pts = np.stack([-lever * np.sin(ang), lever * np.cos(ang), z], axis=1)
    twisted = Curve(t=plane.t, points=pts, is_arclength=False)
    return reparameterize_arclength(twisted, n_samples=plane.t.size)


def sphere_lift(plane: Curve, n_samples: int | None = None) -> SphericalCurve:
    """Lift a plane curve inside the unit disk onto the upper unit sphere.

    (x, y) -> (x, y, sqrt(1 - x^2 - y^2)), then reparameterize by spherical
    arc length.
    """
    if plane.dim != 2:
        raise InvalidInput("sphere_lift expects a plane curve")
    r2 = np.einsum("ij,ij->i", plane.points, plane.points)
    if np.max(r2) >= 1.0:
        raise InvalidInput("plane curve must stay strictly inside the unit disk")
    pts = np.concatenate([plane.points, np.sqrt(1.0 - r2)[:, None]], axis=1)
    lifted = Curve(t=plane.t, points=pts, is_arclength=False)
    resampled = reparameterize_arclength(lifted, n_samples=n_samples or plane.t.size)
    unit = resampled.points / np.linalg.norm(resampled.points, axis=1, keepdims=True)
    return SphericalCurve(t=resampled.t, points=unit, is_arclength=True)


def standardize_pose(curve: Curve, frame_tol: float = FRAME_TOL) -> Curve:
    """Rigidly move a curve to the reference pose used by the qubit mapping.

    3D: r(0)=0, initial tangent +z, initial normal +y (when defined).
    2D: r(0)=0, initial tangent +x.
    """
    h = curve.spacing()
    d1 = derivative_uniform(curve.points, h, 1)
    d2 = derivative_uniform(curve.points, h, 2)
    tang = d1[0] / np.linalg.norm(d1[0])
    pts = curve.points - curve.points[0]
    if curve.dim == 2:
        c, s = tang[0], tang[1]
        rot = np.array([[c, s], [-s, c]])
        return Curve(t=curve.t, points=pts @ rot.T, is_arclength=curve.is_arclength)
    n_raw = d2[0] - (d2[0] @ tang) * tang
    if np.linalg.norm(n_raw) > frame_tol:
        normal = n_raw / np.linalg.norm(n_raw)
    else:
        # straight start: any perpendicular will do
        trial = np.array([0.0, 1.0, 0.0]) if abs(tang[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
        normal = trial - (trial @ tang) * tang
        normal /= np.linalg.norm(normal)
    binorm = np.cross(tang, normal)
    # rows of the rotation send (tangent, normal, binormal) -> (z, y, -x)
    rot = np.stack([-binorm, normal, tang])
    return Curve(t=curve.t, points=pts @ rot.T, is_arclength=curve.is_arclength)


def signed_curvature_3d(curve: Curve, frame_tol: float = FRAME_TOL, zero_band: float = 1e-6):
    """Smoothly signed curvature and torsion for a 3D curve with inflections.

    Tracks a continuously rotating normal instead of the Frenet normal (which
    flips where kappa crosses zero). Returns (kappa_signed, torsion) with
    torsion NaN inside the zero-curvature band.
    """
    data = frenet_series(curve, frame_tol)
    kappa, normal = data["kappa"], data["normal"]
    thresh = max(zero_band * float(np.max(kappa)), frame_tol)
    sign = np.ones(kappa.size)
    ref = None
    for i in range(kappa.size):
        if kappa[i] > thresh:
            if ref is not None and float(normal[i] @ ref) < 0:
                sign[i] = -1.0
            ref = sign[i] * normal[i]
        elif ref is not None:
            sign[i] = sign[i - 1]
    return sign * kappa, data["torsion"]
