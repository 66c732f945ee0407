"""Operator-valued Frenet-Serret machinery for multi-level systems.

The frame vectors e_n = U^dag A_n Q U are tracked through the Hermitian
operators B_n = A_n Q. Differentiating e_n gives the generator
G_n = i[H, B_n] + dB_n/dt; Gram-Schmidt against the previous frame member
splits it into -kappa_{n-1} B_{n-1} + kappa_n B_{n+1}, which is the
Frenet-Serret recursion in operator form. The driven Ising-coupled two-qubit
model is handled through its interaction-picture 2x2 blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidInput, TruncatedFrame
from .numerics import chebyshev_derivative, derivative_uniform, map_points
from .propagator import SIGMA_X, SIGMA_Y, SIGMA_Z, cf4_generic, gauss_nodes
from .pulsesynth import ControlFields, curve_from_fields, propagate_fields
from .qsim import INFIDELITY_FLOOR, ErrorReport, NoiseSpec, fit_loglog_slope

CONSISTENCY_TOL = 1e-4


@dataclass(frozen=True)
class OperatorAlgebra:
    """Hilbert-space dimension and the unit-norm Hermitian error operator Q.

    Operator inner product: <O1, O2> = Tr(O1^dag O2)/dim.
    """

    dim: int
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex)
        if q.shape != (self.dim, self.dim):
            raise InvalidInput("Q must be dim x dim")
        if np.max(np.abs(q - q.conj().T)) > 1e-10:
            raise InvalidInput("Q must be Hermitian")
        if np.max(np.abs(q @ q - np.eye(self.dim))) > 1e-8:
            raise InvalidInput("Q^2 must be the identity")
        object.__setattr__(self, "q", q)

    def norm(self, ops: np.ndarray) -> np.ndarray:
        """Hilbert-Schmidt norm sqrt(Tr(O^dag O)/dim), batched on leading axes."""
        ops = np.asarray(ops)
        return np.sqrt(np.einsum("...ij,...ij->...", ops.conj(), ops).real / self.dim)

    def inner(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,...ij->...", a.conj(), b).real / self.dim


@dataclass(frozen=True)
class TwoQubitModel:
    """Ising-coupled pair with fixed splittings and one shared drive.

    The lab Hamiltonian is block-diagonal with blocks E_i sz + Omega(t) sx;
    the noise operator is 1 (x) sz.
    """

    e1: float
    e2: float
    t: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        om = np.asarray(self.omega, dtype=float)
        if t.ndim != 1 or om.shape != t.shape:
            raise InvalidInput("omega must be sampled on the time grid")
        if not (np.all(np.isfinite(om)) and np.all(np.isfinite(t))):
            raise InvalidInput("model series must be finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "omega", om)

    def spacing(self) -> float:
        dt = np.diff(self.t)
        h = float(dt[0])
        if not np.allclose(dt, h, rtol=1e-9):
            raise InvalidInput("model requires a uniform grid")
        return h


@dataclass(frozen=True)
class GeneralizedFrame:
    """Frame operators and curvatures at one instant."""

    t: float
    a_ops: tuple
    kappas: tuple


@dataclass(frozen=True)
class GeneralizedFrameSeries:
    """A_n(t) operators and generalized curvatures kappa_n(t) on a grid."""

    t: np.ndarray
    a_ops: tuple          # depth arrays of shape (n, k, k)
    kappas: np.ndarray    # (depth, n)

    @property
    def depth(self) -> int:
        return len(self.a_ops)

    def frame_at(self, index: int) -> GeneralizedFrame:
        return GeneralizedFrame(
            t=float(self.t[index]),
            a_ops=tuple(a[index] for a in self.a_ops),
            kappas=tuple(k[index] for k in self.kappas),
        )


def two_qubit_algebra() -> OperatorAlgebra:
    return OperatorAlgebra(dim=4, q=np.kron(np.eye(2), SIGMA_Z))


def interaction_hamiltonian(model: TwoQubitModel) -> np.ndarray:
    """Frame-rotated control Hamiltonian, anticommuting with 1 (x) sz.

    Each block of the lab Hamiltonian is E_i sz + Omega sx; removing the
    static sz parts leaves Omega(t) (cos(2E_i t) sx - sin(2E_i t) sy) per
    block, sampled on the model grid.
    """
    n = model.t.size
    h = np.zeros((n, 4, 4), dtype=complex)
    for b, e in ((0, model.e1), (1, model.e2)):
        x = np.cos(2 * e * model.t)
        y = -np.sin(2 * e * model.t)
        block = x[:, None, None] * SIGMA_X + y[:, None, None] * SIGMA_Y
        h[:, 2 * b:2 * b + 2, 2 * b:2 * b + 2] = model.omega[:, None, None] * block
    return h


def a_recursion(model, algebra: OperatorAlgebra, depth: int,
                h_samples: np.ndarray | None = None, t: np.ndarray | None = None,
                kappa_floor: float = 1e-9) -> GeneralizedFrameSeries:
    """Operator Frenet-Serret recursion: frame operators A_n and curvatures.

    Accepts a TwoQubitModel (interaction frame built internally) or a generic
    anticommuting Hamiltonian series via (h_samples, t). kappa_n is the norm
    of the new-direction generator before normalization; if it collapses
    below kappa_floor * max(kappa_1) everywhere before the requested depth,
    the recursion stops with TruncatedFrame.
    """
    if isinstance(model, TwoQubitModel):
        t = model.t
        h_samples = interaction_hamiltonian(model)
    if h_samples is None or t is None:
        raise InvalidInput("need a TwoQubitModel or an explicit Hamiltonian series")
    t = np.asarray(t, dtype=float)
    h_samples = np.asarray(h_samples, dtype=complex)
    k = algebra.dim
    if h_samples.shape != (t.size, k, k):
        raise InvalidInput("Hamiltonian series must be (n, dim, dim)")
    if depth < 1 or depth > k * k - 1:
        raise InvalidInput("depth must lie in [1, dim^2 - 1]")
    anti = h_samples @ algebra.q + algebra.q @ h_samples
    if float(np.max(np.abs(anti))) > 1e-8:
        raise InvalidInput("control Hamiltonian must anticommute with Q")
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-9):
        raise InvalidInput("recursion requires a uniform grid")

    n = t.size
    b_ops = [np.broadcast_to(algebra.q, (n, k, k)).copy()]
    kappas = []
    scale = None
    for level in range(depth):
        b_n = b_ops[-1]
        # spectral derivative: stencils would amplify roundoff through the
        # cascaded levels and wash out the small high-order curvatures
        gen = 1j * (h_samples @ b_n - b_n @ h_samples) + chebyshev_derivative(t, b_n)
        raw = gen
        if level >= 1:
            raw = raw + kappas[-1][:, None, None] * b_ops[-2]
        # full re-orthogonalization controls drift from the stencil derivatives
        for b_m in b_ops:
            raw = raw - algebra.inner(b_m, raw)[:, None, None] * b_m
        kap = algebra.norm(raw)
        kappas.append(kap)
        if level + 1 == depth:
            break
        if scale is None:
            scale = float(np.max(kap)) or 1.0
        if np.min(kap) < kappa_floor * scale:
            raise TruncatedFrame(level + 1,
                                 f"kappa_{level + 1} vanishes on the grid; "
                                 f"achieved depth {level + 1}")
        b_ops.append(raw / kap[:, None, None])
    a_ops = tuple(b @ algebra.q for b in b_ops)
    return GeneralizedFrameSeries(t=t, a_ops=a_ops, kappas=np.stack(kappas))


def two_qubit_reference_curvatures(model: TwoQubitModel) -> np.ndarray:
    """Closed-form generalized curvatures of the driven Ising pair, (5, n).

    kappa_5 is reported with |dOmega/dt| since curvatures are nonnegative.
    """
    e1, e2 = model.e1, model.e2
    om = model.omega
    s = e1 * e1 + e2 * e2
    h = model.spacing()
    domega = derivative_uniform(om, h, 1)
    k1 = 2.0 * np.abs(om)
    k2 = np.full_like(om, np.sqrt(2.0 * s))
    k3 = np.full_like(om, np.sqrt(2.0) * abs(e1 * e1 - e2 * e2) / np.sqrt(s))
    k4 = 2.0 * np.sqrt(om * om + 2.0 * e1 * e1 * e2 * e2 / s)
    k5 = (e1 * e2 * np.sqrt(2.0 * s) / (om * om * s + 2.0 * e1 * e1 * e2 * e2)) * np.abs(domega)
    return np.stack([k1, k2, k3, k4, k5])


def propagate_interaction(model: TwoQubitModel) -> np.ndarray:
    """Unitary series generated by the interaction-frame Hamiltonian."""
    model.spacing()  # uniform-grid check
    lo, hi, dt = gauss_nodes(model.t[0], model.t[-1], model.t.size - 1)

    om = CubicSpline(model.t, model.omega)
    def ham(nodes):
        out = np.zeros((nodes.size, 4, 4), dtype=complex)
        for b, e in ((0, model.e1), (1, model.e2)):
            x = np.cos(2 * e * nodes)
            y = -np.sin(2 * e * nodes)
            block = x[:, None, None] * SIGMA_X + y[:, None, None] * SIGMA_Y
            out[:, 2 * b:2 * b + 2, 2 * b:2 * b + 2] = om(nodes)[:, None, None] * block
        return out

    return cf4_generic(dt, ham(lo), ham(hi), store_all=True)


def frenet_consistency_check(frames: GeneralizedFrameSeries, u_series: np.ndarray,
                             algebra: OperatorAlgebra) -> float:
    """Max finite-difference residual of e_n' = -kappa_{n-1} e_{n-1} + kappa_n e_{n+1}.

    e_n = U^dag A_n Q U; the last frame member is skipped since its successor
    is not part of the series.
    """
    u = np.asarray(u_series, dtype=complex)
    if u.shape[0] != frames.t.size:
        raise InvalidInput("frames and evolution must share a grid")
    dt = float(frames.t[1] - frames.t[0])
    udag = np.swapaxes(u.conj(), -1, -2)
    e_ops = [udag @ (a @ algebra.q) @ u for a in frames.a_ops]
    worst = 0.0
    for n in range(len(e_ops) - 1):
        de = derivative_uniform(e_ops[n], dt, 1)
        expect = frames.kappas[n][:, None, None] * e_ops[n + 1]
        if n >= 1:
            expect = expect - frames.kappas[n - 1][:, None, None] * e_ops[n - 1]
        resid = algebra.norm(de - expect)
        worst = max(worst, float(np.max(resid[2:-2])))
    return worst


def commutation_pattern(frames: GeneralizedFrameSeries, algebra: OperatorAlgebra):
    """Norms of [A_n, Q] and {A_n, Q} per frame member (max over the grid)."""
    out = []
    for a in frames.a_ops:
        comm = a @ algebra.q - algebra.q @ a
        anti = a @ algebra.q + algebra.q @ a
        out.append((float(np.max(algebra.norm(comm))), float(np.max(algebra.norm(anti)))))
    return out


def block_fields(model: TwoQubitModel, which: int) -> ControlFields:
    """Driving-frame fields of one 2x2 block: envelope 2*Omega, detuning 2*E."""
    e = model.e1 if which == 1 else model.e2
    zeros = np.zeros_like(model.omega)
    return ControlFields(t=model.t, omega=2.0 * model.omega, phi=zeros,
                         delta=np.full_like(model.omega, 2.0 * e))


def block_curves(model: TwoQubitModel):
    """The two 3D space curves of the Hamiltonian blocks.

    Both share the curvature profile |2 Omega|; their torsions are the
    constant block detunings -2E_1 and -2E_2.
    """
    return (curve_from_fields(block_fields(model, 1)),
            curve_from_fields(block_fields(model, 2)))


def error_displacement(model: TwoQubitModel) -> np.ndarray:
    """Pauli-string coefficients x_alpha(t) of int U^dag (1 x sz) U dt'.

    Returns (n, 6): coefficients of 1(x)sx, 1(x)sy, 1(x)sz, sz(x)sx, sz(x)sy,
    sz(x)sz under the normalized string basis. The interaction integral of a
    block-diagonal model never leaves this six-string span.
    """
    c1 = curve_from_fields(block_fields(model, 1)).points
    c2 = curve_from_fields(block_fields(model, 2)).points
    return np.concatenate([(c1 + c2) / 2.0, (c1 - c2) / 2.0], axis=1)


def string_dimension(model: TwoQubitModel, tol: float = 1e-8) -> int:
    """Number of Pauli strings the error displacement explores."""
    x = error_displacement(model)
    amp = np.max(np.abs(x), axis=0)
    return int(np.sum(amp > tol * max(1.0, float(np.max(amp)))))


def two_qubit_trace_fidelity(u1: np.ndarray, u2: np.ndarray, target: np.ndarray) -> np.ndarray:
    """|Tr(target^dag U)|^2/16 for the block-diagonal unitary diag(u1, u2)."""
    t1 = target[:2, :2]
    t2 = target[2:, 2:]
    tr = (np.einsum("ji,...ji->...", t1.conj(), u1)
          + np.einsum("ji,...ji->...", t2.conj(), u2))
    return np.abs(tr) ** 2 / 16.0


def two_qubit_gate(model: TwoQubitModel) -> np.ndarray:
    """Noiseless lab-frame final unitary diag(u1(T), u2(T))."""
    out = np.zeros((4, 4), dtype=complex)
    for b in (1, 2):
        _, u = propagate_fields(block_fields(model, b))
        out[2 * (b - 1):2 * b, 2 * (b - 1):2 * b] = u
    return out


def two_qubit_infidelity_sweep(model: TwoQubitModel, target: np.ndarray,
                               noise: NoiseSpec, rng_seed: int) -> ErrorReport:
    """Gate infidelity of the 4x4 model under eps 1(x)sz versus strength.

    Exploits the block structure: each noise draw shifts both block detunings
    by the same 2*eps... the noise rides inside the blocks as eps*sz, so both
    blocks are propagated as batched two-level problems.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != (4, 4):
        raise InvalidInput("target must be a 4x4 unitary")
    if noise.kind != "quasistatic-z":
        raise InvalidInput("the two-qubit model takes quasistatic-z noise")
    f1 = block_fields(model, 1)
    f2 = block_fields(model, 2)

    def point(i):
        strength = float(noise.strengths[i])
        if noise.distribution == "fixed":
            values = np.array([strength])
        else:
            rng = np.random.default_rng([rng_seed, i])
            values = rng.normal(0.0, strength, noise.samples_per_point)
        _, u1 = propagate_fields(f1, noise=("quasistatic-z", values))
        _, u2 = propagate_fields(f2, noise=("quasistatic-z", values))
        fid = two_qubit_trace_fidelity(u1, u2, target)
        return float(np.mean(np.clip(1.0 - fid, 0.0, 1.0)))

    means = map_points(point, range(noise.strengths.size))
    sweep = tuple((float(s), m) for s, m in zip(noise.strengths, means))
    slope, window = (None, None)
    if not all(m < INFIDELITY_FLOOR for m in means):
        slope, window = fit_loglog_slope(noise.strengths, np.array(means))
    x = error_displacement(model)
    closure = float(np.linalg.norm(x[-1]))
    return ErrorReport(closure_residual=closure, projected_areas=None,
                       g1=None, g2=None, sweep=sweep, fitted_slope=slope,
                       slope_window=window, seed=rng_seed)
