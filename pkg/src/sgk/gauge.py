"""Berry connections and curvatures over extended phase space.

Two layers live here. The model layer differentiates eigenframes of a
HamiltonianModel: the exact (non-Abelian) connection i U+ dU, its diagonal
adiabatic part, the gauge-invariant plaquette curvature, and the closed-form
curvature of split-form models built from the coupling field H1 and its
derivatives. The array layer is model-free geometry on plain coordinate
vectors: monopole fields, pullbacks under smooth maps, line integrals,
flux quadrature (Chern charge), field-equation residual diagnostics and
gauge transformations.

Conventions: curvature components are F_ij = d_i A_j - d_j A_i (minus the
commutator term in the non-Abelian case); a 3x3 antisymmetric block maps to
the pseudovector f_k = (1/2) eps_kij F_ij, so F_ij = eps_ijk f_k. For a
two-band split-form model the band with spin charge S carries the monopole
curvature F(H1) = -S H1/|H1|^3 in coupling space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (NumericalError, QuadratureError, SingularityError,
                     StepError)
from .models import HamiltonianModel
from .phase_space import PhasePoint, axis_labels
from .spectral import EigenFrame, aligned_frame, diagonalize, smooth_frame_along

# Default finite-difference step: DEFAULT_STEP_SCALE * max(1, |m|).
DEFAULT_STEP_SCALE = 1e-4
# Exact connection components must be Hermitian to this tolerance.
CONNECTION_HERMITICITY_ATOL = 1e-10


def default_step(point_or_vec) -> float:
    if isinstance(point_or_vec, PhasePoint):
        return DEFAULT_STEP_SCALE * point_or_vec.scale()
    v = np.asarray(point_or_vec, dtype=float)
    return DEFAULT_STEP_SCALE * max(1.0, float(np.linalg.norm(v)))


def _check_step(step: float) -> float:
    step = float(step)
    if not math.isfinite(step) or step <= 0.0:
        raise StepError(f"step must be a positive finite number, got {step}")
    return step


def pseudo_to_tensor(f: np.ndarray) -> np.ndarray:
    """F_ij = eps_ijk f_k for a 3-component pseudovector."""
    f = np.asarray(f, dtype=float)
    return np.array([
        [0.0, f[2], -f[1]],
        [-f[2], 0.0, f[0]],
        [f[1], -f[0], 0.0],
    ])


def tensor_to_pseudo(F: np.ndarray) -> np.ndarray:
    """f_k = (1/2) eps_kij F_ij for a 3x3 antisymmetric tensor."""
    F = np.asarray(F, dtype=float)
    return 0.5 * np.array([F[1, 2] - F[2, 1], F[2, 0] - F[0, 2], F[0, 1] - F[1, 0]])


def wrap_angle(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    w = float(np.remainder(x + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if w == -np.pi else w


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Connection:
    """Berry connection components along the flat phase-space axes.

    kind 'exact': components has shape (D, n, n), each slice Hermitian;
    kind 'adiabatic': shape (D, n), the real diagonal per band. Both live in
    the deterministic largest-component gauge of the spectral layer.
    """

    labels: tuple
    kind: str
    components: np.ndarray
    point: Optional[PhasePoint] = None

    def __post_init__(self):
        comps = np.asarray(self.components)
        if self.kind == "exact":
            if comps.ndim != 3 or comps.shape[1] != comps.shape[2]:
                raise ValueError("exact connection needs (D, n, n) components")
            defect = np.max(np.abs(comps - np.conj(np.swapaxes(comps, 1, 2))))
            if defect > CONNECTION_HERMITICITY_ATOL:
                raise NumericalError(
                    f"exact connection not Hermitian: defect {defect:.3e}")
        elif self.kind == "adiabatic":
            if comps.ndim != 2:
                raise ValueError("adiabatic connection needs (D, n) components")
            if np.iscomplexobj(comps):
                if np.max(np.abs(comps.imag)) > CONNECTION_HERMITICITY_ATOL:
                    raise NumericalError("adiabatic connection must be real")
                object.__setattr__(self, "components", comps.real.copy())
        else:
            raise ValueError(f"unknown connection kind {self.kind!r}")
        if len(self.labels) != comps.shape[0]:
            raise ValueError("one label per axis required")

    @property
    def n_axes(self) -> int:
        return self.components.shape[0]

    @property
    def n_bands(self) -> int:
        return self.components.shape[1]

    def diagonal(self) -> "Connection":
        """Adiabatic (per-band diagonal) part of an exact connection."""
        if self.kind != "exact":
            return self
        diag = np.einsum("kbb->kb", self.components).real
        return Connection(labels=self.labels, kind="adiabatic",
                          components=diag, point=self.point)

    def dot(self, mdot: np.ndarray) -> np.ndarray:
        """Per-band contraction sum_k A_k mdot_k (adiabatic only)."""
        if self.kind != "adiabatic":
            raise ValueError("dot is defined for adiabatic connections")
        return np.asarray(mdot, dtype=float) @ self.components


@dataclass(frozen=True)
class CurvatureTensor:
    """Per-band antisymmetric curvature over the flat axes (p..., r..., t).

    F has shape (n_bands, D, D) and is exactly antisymmetric: it is stored
    via its upper triangle and mirrored. Block views slice the momentum,
    position and time axes.
    """

    d: int
    labels: tuple
    F: np.ndarray
    point: Optional[PhasePoint] = None

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        upper = np.triu(F, k=1)
        object.__setattr__(self, "F", upper - np.swapaxes(upper, 1, 2))

    @property
    def n_bands(self) -> int:
        return self.F.shape[0]

    def band(self, b: int) -> np.ndarray:
        return self.F[b]

    def block(self, rows: str, cols: str, band: int = None) -> np.ndarray:
        """Named block: rows/cols in {'p','r','t'}; full band stack if band None."""
        sl = {"p": slice(0, self.d), "r": slice(self.d, 2 * self.d),
              "t": slice(2 * self.d, 2 * self.d + 1)}
        out = self.F[:, sl[rows], sl[cols]]
        if rows == "t" or cols == "t":
            out = out[:, 0, :] if rows == "t" else out[:, :, 0]
        return out if band is None else out[band]

    def f_pp(self, band=None):
        return self.block("p", "p", band)

    def f_rr(self, band=None):
        return self.block("r", "r", band)

    def f_pr(self, band=None):
        return self.block("p", "r", band)

    def f_pt(self, band=None):
        return self.block("p", "t", band)

    def f_rt(self, band=None):
        return self.block("r", "t", band)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.F)))


@dataclass(frozen=True)
class NonAbelianCurvature:
    """Matrix-valued curvature components F_ij for the exact connection."""

    labels: tuple
    matrices: np.ndarray  # (D, D, n, n), antisymmetric in the first two axes
    point: Optional[PhasePoint] = None

    def pair(self, i: int, j: int) -> np.ndarray:
        return self.matrices[i, j]

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.matrices)))


@dataclass(frozen=True)
class PhaseIntegral:
    """Raw accumulated line-integral value and its (-pi, pi] reduction."""

    value: float
    wrapped: float


@dataclass(frozen=True)
class MaxwellResiduals:
    """Central-difference residuals of the source-free field identities.

    divergence[p, i] = sum_j dF_ij/dx_j at point p; cyclic[p, q] is the
    cyclic sum d_k F_ij + d_i F_jk + d_j F_ki for the q-th axis triple.
    Indices are flat Euclidean (no metric weights on the m axes).
    """

    divergence: np.ndarray
    cyclic: np.ndarray
    triples: tuple

    @property
    def max_divergence(self) -> float:
        return float(np.max(np.abs(self.divergence))) if self.divergence.size else 0.0

    @property
    def max_cyclic(self) -> float:
        return float(np.max(np.abs(self.cyclic))) if self.cyclic.size else 0.0


# ---------------------------------------------------------------------------
# Model layer


def exact_connection(model: HamiltonianModel, m: PhasePoint,
                     step: float = None, axes: Sequence[int] = None) -> Connection:
    """Exact non-Abelian Berry connection A_k = i U+ dU/dm_k at m.

    Central differences; the stencil frames keep the deterministic
    largest-component gauge (band-matched to the center frame), so the
    result is the connection of that single-valued gauge. Components are
    Hermitized, removing the O(step^2) finite-difference defect. axes
    restricts the stencil to a subset of flat axes (the rest stay zero),
    for callers that only integrate along a slice.
    """
    h = _check_step(step if step is not None else default_step(m))
    center = diagonalize(model, m)
    D = m.n_axes
    comps = np.zeros((D, model.n, model.n), dtype=complex)
    Uc = center.U.conj().T
    for k in range(D) if axes is None else axes:
        fp = aligned_frame(model, m.shifted(k, +h), center, phase="convention")
        fm = aligned_frame(model, m.shifted(k, -h), center, phase="convention")
        A = 1j * (Uc @ (fp.U - fm.U)) / (2.0 * h)
        comps[k] = 0.5 * (A + A.conj().T)
    return Connection(labels=m.labels, kind="exact", components=comps, point=m)


def adiabatic_connection(model: HamiltonianModel, m: PhasePoint,
                         step: float = None, axes: Sequence[int] = None) -> Connection:
    """Diagonal (per-band) part of the exact connection at m."""
    return exact_connection(model, m, step=step, axes=axes).diagonal()


def exact_connection_field(model: HamiltonianModel, step: float = None):
    """Callable PhasePoint -> exact Connection, for curvature stencils."""
    return lambda m: exact_connection(model, m, step=step)


def nonabelian_curvature(connection_field, m: PhasePoint, step: float = None,
                         include_commutator: bool = True) -> NonAbelianCurvature:
    """Matrix curvature F_ij = d_i A_j - d_j A_i - i[A_i, A_j] at m.

    connection_field maps a PhasePoint to an exact Connection; use
    exact_connection_field(model) for the pure-gauge case, where the result
    must vanish to discretization accuracy. include_commutator=False drops
    the commutator term (useful to show a synthetic non-Abelian connection
    is detected as curved).
    """
    h = _check_step(step if step is not None else default_step(m))
    c0 = connection_field(m)
    if c0.kind != "exact":
        raise ValueError("nonabelian_curvature needs an exact connection field")
    D, n = c0.n_axes, c0.n_bands
    plus = [connection_field(m.shifted(k, +h)).components for k in range(D)]
    minus = [connection_field(m.shifted(k, -h)).components for k in range(D)]
    mats = np.zeros((D, D, n, n), dtype=complex)
    A = c0.components
    for i in range(D):
        dA_i = (plus[i] - minus[i]) / (2.0 * h)  # (D, n, n): d_i of every component
        for j in range(i + 1, D):
            dA_j = (plus[j] - minus[j]) / (2.0 * h)
            F = dA_i[j] - dA_j[i]
            if include_commutator:
                F = F - 1j * (A[i] @ A[j] - A[j] @ A[i])
            mats[i, j] = F
            mats[j, i] = -F
    return NonAbelianCurvature(labels=c0.labels, matrices=mats, point=m)


def _plaquette_angles(model: HamiltonianModel, m: PhasePoint, i: int, j: int,
                      h: float, center: EigenFrame) -> np.ndarray:
    """Per-band Wilson-loop angle around the square of side h centered on m."""
    c1 = m.shifted(i, -0.5 * h).shifted(j, -0.5 * h)
    c2 = c1.shifted(i, +h)
    c3 = c2.shifted(j, +h)
    c4 = c1.shifted(j, +h)
    Us = [aligned_frame(model, c, center, phase="convention").U for c in (c1, c2, c3, c4)]
    W = np.ones(model.n, dtype=complex)
    for a in range(4):
        Ua, Ub = Us[a], Us[(a + 1) % 4]
        W *= np.einsum("ib,ib->b", Ua.conj(), Ub)
    return np.angle(W)


def adiabatic_curvature_numeric(model: HamiltonianModel, m: PhasePoint,
                                step: float = None, richardson: bool = True,
                                pairs: Sequence[tuple] = None) -> CurvatureTensor:
    """Gauge-invariant plaquette curvature of each band at m.

    For each axis pair, the Berry flux through a small square loop of
    eigenvector overlaps gives F_ij = -arg(W)/h^2; overlap products make the
    result immune to the phase convention at every corner. Richardson
    combines the h and h/2 plaquettes to fourth order (default on; needed
    near small gaps where the curvature varies on the gap scale).
    """
    h = _check_step(step if step is not None else default_step(m))
    center = diagonalize(model, m)
    D, n = m.n_axes, model.n
    F = np.zeros((n, D, D))
    if pairs is None:
        pairs = [(i, j) for i in range(D) for j in range(i + 1, D)]
    for (i, j) in pairs:
        ang_h = _plaquette_angles(model, m, i, j, h, center)
        val = -ang_h / h**2
        if richardson:
            ang_h2 = _plaquette_angles(model, m, i, j, 0.5 * h, center)
            val = (4.0 * (-ang_h2 / (0.5 * h) ** 2) - val) / 3.0
        F[:, i, j] = val
    return CurvatureTensor(d=m.d, labels=m.labels, F=F, point=m)


def curvature_m_space(model: HamiltonianModel, m: PhasePoint,
                      S: Sequence[float] = None, step: float = None) -> CurvatureTensor:
    """Closed-form split-model curvature from the coupling field H1.

    F_ij(band) = -S_band H1 . (dH1/dm_i x dH1/dm_j) / |H1|^3, the pullback
    of the coupling-space monopole along m -> H1(m). The H1 Jacobian is
    taken by central differences (exact for affine couplings). Bands with
    opposite spin charge get exactly opposite tensors.
    """
    if model.split is None:
        raise ValueError("curvature_m_space needs a split-form model")
    charges = tuple(S) if S is not None else model.spin_charges
    if charges is None:
        raise ValueError("no spin charges available for this model")
    for s in charges:
        if abs(2.0 * s - round(2.0 * s)) > 1e-9:
            raise ValueError(f"spin charge must be integer or half-integer, got {s}")
    h = _check_step(step if step is not None else default_step(m))
    b = model.split.h1_vector(m)
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        raise SingularityError("curvature is singular where |H1| = 0")
    D = m.n_axes
    J = np.empty((3, D))
    for k in range(D):
        J[:, k] = (model.split.h1_vector(m.shifted(k, +h))
                   - model.split.h1_vector(m.shifted(k, -h))) / (2.0 * h)
    X = np.zeros((D, D))
    for i in range(D):
        for j in range(i + 1, D):
            X[i, j] = float(b @ np.cross(J[:, i], J[:, j])) / nb**3
    F = np.stack([-s * X for s in charges])
    return CurvatureTensor(d=m.d, labels=m.labels, F=F, point=m)


# ---------------------------------------------------------------------------
# Array layer: model-free geometry on plain coordinate vectors


def monopole_pseudovector(h1: np.ndarray, S: float) -> np.ndarray:
    """Coupling-space monopole field F(H1) = -S H1/|H1|^3 of a band."""
    h1 = np.asarray(h1, dtype=float)
    nb = float(np.linalg.norm(h1))
    if nb == 0.0:
        raise SingularityError("monopole curvature is singular at H1 = 0")
    return -S * h1 / nb**3


def monopole_curvature(h1: np.ndarray, S: float) -> np.ndarray:
    """Monopole curvature as a 3x3 antisymmetric tensor in coupling space."""
    return pseudo_to_tensor(monopole_pseudovector(h1, S))


def monopole_field(S: float, center=(0.0, 0.0, 0.0)):
    """Callable pseudovector field of a monopole of spin charge S."""
    c = np.asarray(center, dtype=float)
    return lambda x: monopole_pseudovector(np.asarray(x, dtype=float) - c, S)


def pullback_curvature(map_fn: Callable, F_b: Callable, jacobian: Callable = None,
                       step: float = 1e-6):
    """Pull a curvature tensor field back along a smooth map a -> b.

    F_a(a)_ij = (db_k/da_i)(db_m/da_j) F_b(b(a))_km. jacobian(a), if given,
    must return J with J[k, i] = db_k/da_i; otherwise central differences
    with the given step are used. Returns a callable tensor field over a.
    """
    _check_step(step)

    def field(a):
        a = np.asarray(a, dtype=float)
        b = np.asarray(map_fn(a), dtype=float)
        if jacobian is not None:
            J = np.asarray(jacobian(a), dtype=float)
        else:
            K_a = a.shape[0]
            J = np.empty((b.shape[0], K_a))
            for i in range(K_a):
                e = np.zeros(K_a)
                e[i] = step
                J[:, i] = (np.asarray(map_fn(a + e), dtype=float)
                           - np.asarray(map_fn(a - e), dtype=float)) / (2.0 * step)
        Fb = np.asarray(F_b(b), dtype=float)
        return J.T @ Fb @ J

    return field


def phase_line_integral(field, path, band: int = None) -> PhaseIntegral:
    """Trapezoid line integral of an adiabatic connection along a path.

    field maps a coordinate vector to connection components: either a (K,)
    array for a single band or (K, n) for all bands (then band selects one).
    path is an (N, K) array or a sequence of PhasePoints. The raw accumulated
    value is returned together with its (-pi, pi] reduction; closing the path
    is the caller's business (append the start point for a loop). If the
    field object exposes validate_path, it is invoked first (model-backed
    fields use it to enforce eigenvector continuity along the path).
    """
    pts = np.asarray([q.as_vector() if isinstance(q, PhasePoint) else q for q in path],
                     dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("path must contain at least two points")
    validate = getattr(field, "validate_path", None)
    if validate is not None:
        validate(pts)

    def comp(x):
        a = np.asarray(field(x), dtype=float)
        if a.ndim == 2:
            if band is None:
                raise ValueError("band is required for a multi-band field")
            a = a[:, band]
        return a

    total = 0.0
    a_prev = comp(pts[0])
    for k in range(1, pts.shape[0]):
        a_next = comp(pts[k])
        total += float(0.5 * (a_prev + a_next) @ (pts[k] - pts[k - 1]))
        a_prev = a_next
    return PhaseIntegral(value=total, wrapped=wrap_angle(total))


def dirac_phase(potential, path, e: float = 1.0, hbar: float = 1.0,
                c: float = 1.0) -> float:
    """Electromagnetic phase (e/hbar c) int (A . dr - c phi dt) along r-t path.

    potential(r, t) returns (phi, A) with A a 3-vector; path is an (N, 4)
    array of rows (x, y, z, t). Trapezoid rule, raw value (no reduction).
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 4 or pts.shape[0] < 2:
        raise ValueError("path must be an (N, 4) array of (x, y, z, t) rows")
    total = 0.0
    phi_prev, A_prev = potential(pts[0, :3], pts[0, 3])
    for k in range(1, pts.shape[0]):
        phi_k, A_k = potential(pts[k, :3], pts[k, 3])
        dr = pts[k, :3] - pts[k - 1, :3]
        dt = pts[k, 3] - pts[k - 1, 3]
        total += 0.5 * float((np.asarray(A_prev) + np.asarray(A_k)) @ dr)
        total -= 0.5 * c * (phi_prev + phi_k) * dt
        phi_prev, A_prev = phi_k, A_k
    return (e / (hbar * c)) * total


def chern_charge(field, center, radius: float, nodes: tuple = (32, 64),
                 check_factor: float = 1.5, check_rtol: float = 1e-6) -> float:
    """Flux of a pseudovector curvature field through a sphere, over 2 pi.

    Product quadrature: Gauss-Legendre in cos(theta), uniform in phi. The
    sphere must enclose exactly one source (or none); that is the caller's
    assertion, cross-checked by repeating the quadrature at check_factor
    times the radius and raising QuadratureError on relative disagreement
    beyond check_rtol (an enclosed-source miscount between the two spheres).
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    center = np.asarray(center, dtype=float)

    def charge_at(R):
        nt, np_ = nodes
        u, w = np.polynomial.legendre.leggauss(nt)
        phis = 2.0 * np.pi * np.arange(np_) / np_
        flux = 0.0
        for ui, wi in zip(u, w):
            st = math.sqrt(max(0.0, 1.0 - ui * ui))
            for ph in phis:
                nrm = np.array([st * math.cos(ph), st * math.sin(ph), ui])
                f = np.asarray(field(center + R * nrm), dtype=float)
                flux += wi * float(f @ nrm)
        return flux * R * R * (2.0 * np.pi / np_) / (2.0 * np.pi)

    q = charge_at(radius)
    q_check = charge_at(check_factor * radius)
    if abs(q - q_check) > check_rtol * max(1.0, abs(q)):
        raise QuadratureError(
            f"charge {q:.9g} at radius {radius} vs {q_check:.9g} at "
            f"{check_factor * radius}: enclosed sources differ between the spheres")
    return q


def maxwell_residuals(field, points, step: float = None,
                      richardson: bool = True) -> MaxwellResiduals:
    """Source-free field-identity residuals of a curvature tensor field.

    field maps a K-vector to a (K, K) antisymmetric tensor. At each point the
    axis derivatives are taken by central differences (Richardson-combined
    by default); reported are the divergences sum_j d_j F_ij and the cyclic
    sums d_k F_ij + d_i F_jk + d_j F_ki over all axis triples, both of which
    vanish for curvature away from its sources.
    """
    pts = [np.asarray(x, dtype=float) for x in points]
    if not pts:
        raise ValueError("need at least one evaluation point")
    K = pts[0].shape[0]
    triples = tuple((i, j, k) for i in range(K) for j in range(i + 1, K)
                    for k in range(j + 1, K))
    div = np.empty((len(pts), K))
    cyc = np.empty((len(pts), len(triples)))

    def derivs(x, h):
        dF = np.empty((K, K, K))
        for a in range(K):
            e = np.zeros(K)
            e[a] = h
            dF[a] = (np.asarray(field(x + e), dtype=float)
                     - np.asarray(field(x - e), dtype=float)) / (2.0 * h)
        return dF

    for p_idx, x in enumerate(pts):
        h = _check_step(step if step is not None else default_step(x))
        dF = derivs(x, h)
        if richardson:
            dF = (4.0 * derivs(x, 0.5 * h) - dF) / 3.0
        div[p_idx] = np.einsum("jij->i", dF)
        for q, (i, j, k) in enumerate(triples):
            cyc[p_idx, q] = dF[k, i, j] + dF[i, j, k] + dF[j, k, i]
    return MaxwellResiduals(divergence=div, cyclic=cyc, triples=triples)


def regauge(connection, phase_field, step: float = 1e-5):
    """Gauge transform an adiabatic connection: A -> A - grad(phase).

    phase_field maps a coordinate vector to per-band phase values (n,).
    Given a Connection (with a point), returns the transformed Connection at
    that point; given a field callable (vector -> (K, n)), returns the
    transformed field. Curvature and closed-loop phases (mod 2 pi) are
    unchanged by construction.
    """
    h = _check_step(step)

    def grad_phase(v):
        K = v.shape[0]
        g = np.empty((K, np.asarray(phase_field(v)).shape[0]))
        for k in range(K):
            e = np.zeros(K)
            e[k] = h
            g[k] = (np.asarray(phase_field(v + e), dtype=float)
                    - np.asarray(phase_field(v - e), dtype=float)) / (2.0 * h)
        return g

    if isinstance(connection, Connection):
        if connection.kind != "adiabatic":
            raise ValueError("regauge acts on adiabatic connections")
        if connection.point is None:
            raise ValueError("connection must carry its evaluation point")
        v = connection.point.as_vector()
        return Connection(labels=connection.labels, kind="adiabatic",
                          components=connection.components - grad_phase(v),
                          point=connection.point)
    if callable(connection):
        return lambda v: np.asarray(connection(np.asarray(v, dtype=float)),
                                    dtype=float) - grad_phase(np.asarray(v, dtype=float))
    raise TypeError("connection must be a Connection or a field callable")


def curvature_of_abelian_field(field, x, step: float = None) -> np.ndarray:
    """F_ij = d_i A_j - d_j A_i of an adiabatic connection field at x.

    field maps a K-vector to (K,) or (K, n) components; the result is
    (K, K) or (n, K, K) accordingly. Central differences.
    """
    x = np.asarray(x, dtype=float)
    h = _check_step(step if step is not None else default_step(x))
    K = x.shape[0]
    a0 = np.asarray(field(x), dtype=float)
    dA = np.empty((K,) + a0.shape)
    for k in range(K):
        e = np.zeros(K)
        e[k] = h
        dA[k] = (np.asarray(field(x + e), dtype=float)
                 - np.asarray(field(x - e), dtype=float)) / (2.0 * h)
    if a0.ndim == 1:
        return dA - dA.T  # F[i, j] = d_i A_j - d_j A_i
    # multi-band: dA[k, i, b]; F[b, i, j] = dA[i, j, b] - dA[j, i, b]
    return np.transpose(dA, (2, 0, 1)) - np.transpose(dA, (2, 1, 0))


# ---------------------------------------------------------------------------
# Model-backed field adapters (lift plain vectors into phase space)


@dataclass
class AdiabaticConnectionField:
    """Adiabatic connection as a plain vector field over selected m-axes.

    axes lists the flat phase-space axes swept by the abstract coordinates
    (default: all); the remaining coordinates are frozen at base. Calling
    with a K-vector returns (K, n) connection components, suitable for
    phase_line_integral and regauge. validate_path walks eigenframes along
    the path to enforce band continuity (overlap >= 0.5) before integrating.
    """

    model: HamiltonianModel
    base: PhasePoint
    axes: tuple = None
    step: float = None

    def __post_init__(self):
        if self.axes is None:
            self.axes = tuple(range(self.base.n_axes))
        self.axes = tuple(int(a) for a in self.axes)

    def lift(self, vec) -> PhasePoint:
        v = self.base.as_vector()
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        if vec.shape[0] != len(self.axes):
            raise ValueError(f"expected {len(self.axes)} coordinates")
        v[list(self.axes)] = vec
        return PhasePoint.from_vector(v, self.base.d)

    def __call__(self, vec) -> np.ndarray:
        conn = adiabatic_connection(self.model, self.lift(vec), step=self.step,
                                    axes=self.axes)
        return conn.components[list(self.axes), :]

    def validate_path(self, pts) -> None:
        smooth_frame_along(self.model, [self.lift(v) for v in np.asarray(pts, dtype=float)])

    def loop_phase(self, pts, band: int = None):
        """Holonomy phase(s) of a closed path from eigenframe overlaps.

        Every per-point phase choice cancels between the bra and ket of
        successive overlap factors, so this stays well defined on the branch
        cuts of the single-point gauge, where the line integral of __call__
        does not converge (for a two-band coupling the cut sits where the
        eigenvector components tie in magnitude). Returns -arg of the closed
        overlap product per band; midpoint-like, with an even error
        expansion in the node spacing.
        """
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 4:
            raise ValueError("need a closed path of at least 3 distinct points")
        if not np.allclose(pts[0], pts[-1], atol=1e-12):
            raise ValueError("path must return to its starting point")
        frames = smooth_frame_along(self.model,
                                    [self.lift(v) for v in pts[:-1]])
        # transport makes successive overlaps real nonnegative; the whole
        # phase collects in the closing factor against the first frame
        total = np.ones(frames[0].U.shape[1], dtype=complex)
        for a, b in zip(frames[:-1], frames[1:]):
            total *= np.einsum("ib,ib->b", a.U.conj(), b.U)
        total *= np.einsum("ib,ib->b", frames[-1].U.conj(), frames[0].U)
        phases = -np.angle(total)
        return phases if band is None else float(phases[band])


@dataclass
class PlaquetteCurvatureField:
    """Pseudovector plaquette curvature over a 3-axis slice of m-space.

    Produces f(x) with f_k = (1/2) eps_kij F_ij restricted to the three
    selected axes; used for flux quadrature around degeneracies of generic
    models (no split form needed).
    """

    model: HamiltonianModel
    band: int
    base: PhasePoint
    axes: tuple
    step: float = None
    richardson: bool = True

    def __post_init__(self):
        self.axes = tuple(int(a) for a in self.axes)
        if len(self.axes) != 3:
            raise ValueError("exactly three axes define the flux 3-space")

    def lift(self, vec) -> PhasePoint:
        v = self.base.as_vector()
        v[list(self.axes)] = np.asarray(vec, dtype=float)
        return PhasePoint.from_vector(v, self.base.d)

    def __call__(self, x) -> np.ndarray:
        pairs = [(self.axes[0], self.axes[1]), (self.axes[0], self.axes[2]),
                 (self.axes[1], self.axes[2])]
        ct = adiabatic_curvature_numeric(self.model, self.lift(x), step=self.step,
                                         richardson=self.richardson, pairs=pairs)
        Fb = ct.F[self.band]
        sub = Fb[np.ix_(self.axes, self.axes)]
        return tensor_to_pseudo(sub)
