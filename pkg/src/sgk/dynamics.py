"""Semiclassical equations of motion with spin gauge forces.

The phase-space velocities (pdot, rdot) obey

    pdot = -dE/dr + e E_ext + (e/c) rdot x B_ext + hbar F_rm . mdot
    rdot = +dE/dp                                - hbar F_pm . mdot

with mdot = (pdot, rdot, 1) and F the band's curvature over the flat axes.
Because mdot appears on both sides, the default path assembles the exact
2d x 2d linear system and solves it; a reduced mode substitutes
curvature-free velocities into the gauge-force terms instead (the classic
leading-order treatment, accurate to O(hbar^2)).

Integration carries per-step diagnostics: the adiabaticity parameter
epsilon (aborting the run when it exceeds the configured bound), the
accumulated geometric phase int A . dm in the deterministic gauge of the
spectral layer, and the dynamic phase (1/hbar) int (p . rdot - E) dt.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (DegeneracyError, SingularityError, SingularSystemError,
                     SpinForceWarning, StepError)
from .fields import UniformField, VectorField, as_field
from .gauge import (adiabatic_curvature_numeric, curvature_m_space,
                    default_step, exact_connection, tensor_to_pseudo)
from .models import Constants, HamiltonianModel
from .phase_space import PhasePoint
from .spectral import DEGENERACY_RTOL, aligned_frame, diagonalize

# Spin force larger than this fraction of the zeroth-order force triggers
# a SpinForceWarning (the underlying expansion is no longer perturbative).
SPIN_FORCE_WARN_RATIO = 0.5
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ExternalEMField:
    """External electric and magnetic fields E(r, t), B(r, t).

    Uniform values or field objects / callables; always 3-component
    internally (planar problems use the in-plane electric components and
    the out-of-plane magnetic one).
    """

    e_field: VectorField = field(default_factory=lambda: UniformField(np.zeros(3)))
    b_field: VectorField = field(default_factory=lambda: UniformField(np.zeros(3)))

    @staticmethod
    def uniform(E=(0.0, 0.0, 0.0), B=(0.0, 0.0, 0.0)) -> "ExternalEMField":
        return ExternalEMField(e_field=UniformField(np.asarray(E, dtype=float)),
                               b_field=UniformField(np.asarray(B, dtype=float)))

    def __post_init__(self):
        object.__setattr__(self, "e_field", as_field(self.e_field))
        object.__setattr__(self, "b_field", as_field(self.b_field))

    def at(self, r, t: float):
        return self.e_field.value(r, t), self.b_field.value(r, t)


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping controls.

    step is the rk4 time step (and the initial rkf45 trial step); tolerance
    drives rkf45 step adaptation. epsilon_abort in (0, 1] halts integration
    once the adiabaticity parameter exceeds it. mode selects the exact
    velocity solve or the reduced substitution; spin_force False drops the
    gauge force entirely (canonical flow). record_connection False skips
    per-state connection evaluation (phases are then not accumulated),
    which roughly halves the cost of large ensembles.
    """

    method: str = "rk4"
    step: float = 1e-3
    tolerance: Optional[float] = None
    t_end: float = 1.0
    max_steps: int = 100000
    epsilon_abort: float = 1.0
    mode: str = "exact"
    spin_force: bool = True
    record_connection: bool = True
    delta_p: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("rk4", "rkf45"):
            raise ValueError(f"unknown method {self.method!r}")
        if not (np.isfinite(self.step) and self.step > 0):
            raise StepError(f"step must be positive, got {self.step}")
        if self.method == "rkf45":
            tol = self.tolerance
            if tol is None or not (np.isfinite(tol) and tol > 0):
                raise ValueError("rkf45 requires a positive tolerance")
        if not (0.0 < self.epsilon_abort <= 1.0):
            raise ValueError("epsilon_abort must lie in (0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.mode not in ("exact", "reduced"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class TrajectoryState:
    """One accepted integrator step.

    a_p, a_r, a_t hold the band's adiabatic connection components at m
    (None when connection recording is off); the generalized coordinates
    P = p + hbar A_r and R = r - hbar A_p derive from them.
    """

    m: PhasePoint
    band: int
    energy: float
    epsilon: float
    berry_phase: float
    dynamic_phase: float
    v_p: np.ndarray
    v_r: np.ndarray
    a_p: Optional[np.ndarray] = None
    a_r: Optional[np.ndarray] = None
    a_t: Optional[float] = None
    hbar: float = 1.0

    def generalized(self):
        """(P, R) built from the stored connection values."""
        if self.a_p is None or self.a_r is None:
            raise ValueError("connection was not recorded for this trajectory")
        return self.m.p + self.hbar * self.a_r, self.m.r - self.hbar * self.a_p


@dataclass
class Trajectory:
    """Recorded states plus the halt status.

    status is 'completed' (reached t_end), 'max_steps' (budget exhausted)
    or 'adiabaticity_breach' (epsilon exceeded the configured bound; the
    offending state is the last one recorded).
    """

    states: list
    status: str
    band: int

    @property
    def final(self) -> TrajectoryState:
        return self.states[-1]

    @property
    def breached(self) -> bool:
        return self.status == "adiabaticity_breach"

    def times(self) -> np.ndarray:
        return np.array([s.m.t for s in self.states])


def _cross_matrix(B3: np.ndarray, d: int) -> np.ndarray:
    """Matrix X with X v = v x B for in-plane (d=2) or full (d=3) v."""
    Bx, By, Bz = B3
    X = np.array([[0.0, Bz, -By], [-Bz, 0.0, Bx], [By, -Bx, 0.0]])
    return X[:d, :d]


def band_gradients(model: HamiltonianModel, band: int, m: PhasePoint,
                   step: float = None):
    """(E, gradient of E over all flat axes) for one band.

    Split-form models use the closed-form energies H0 -+ hbar|H1| (with the
    same degeneracy guard as the eigensolver); other models differentiate
    tracked eigenvalues.
    """
    h = step if step is not None else default_step(m)
    if h <= 0 or not np.isfinite(h):
        raise StepError(f"gradient step must be positive, got {h}")
    D = m.n_axes
    g = np.empty(D)
    if model.split is not None:
        gap = model.band_gap(m)
        scale = model.matrix_scale(m)
        if gap < DEGENERACY_RTOL * scale:
            raise DegeneracyError(
                f"band gap {gap:.3e} below tolerance {DEGENERACY_RTOL * scale:.3e}")
        E0 = model.band_energy(m, band)
        for k in range(D):
            g[k] = (model.band_energy(m.shifted(k, +h), band)
                    - model.band_energy(m.shifted(k, -h), band)) / (2.0 * h)
        return E0, g
    center = diagonalize(model, m)
    E0 = float(center.energies[band])
    for k in range(D):
        ep = aligned_frame(model, m.shifted(k, +h), center).energies[band]
        em_ = aligned_frame(model, m.shifted(k, -h), center).energies[band]
        g[k] = (ep - em_) / (2.0 * h)
    return E0, g


def default_curvature_provider(model: HamiltonianModel) -> Callable:
    """Curvature evaluator used by the velocity solve.

    Split-form models get the closed-form monopole pullback; generic models
    fall back to the plaquette.
    """
    if model.split is not None:
        return lambda m: curvature_m_space(model, m)
    return lambda m: adiabatic_curvature_numeric(model, m)


def spin_force_terms(model: HamiltonianModel, band: int, m: PhasePoint,
                     mdot: np.ndarray, curvature: Callable = None):
    """Additive gauge-force terms at a prescribed mdot = (pdot, rdot, 1).

    Returns (f_p, f_r): f_p = hbar F_rm . mdot enters the pdot equation and
    f_r = -hbar F_pm . mdot enters the rdot equation. For two-band traceless
    split models the two bands' terms are exact negatives.
    """
    provider = curvature if curvature is not None else default_curvature_provider(model)
    ct = provider(m)
    F = ct.F[band]
    d = m.d
    hbar = model.constants.hbar
    mdot = np.asarray(mdot, dtype=float)
    f_p = hbar * (F[d:2 * d, :] @ mdot)
    f_r = -hbar * (F[:d, :] @ mdot)
    return f_p, f_r


def velocity_field(model: HamiltonianModel, band: int, m: PhasePoint,
                   em: ExternalEMField = None, *, curvature: Callable = None,
                   mode: str = "exact", spin_force: bool = True,
                   fd_step: float = None, warn: bool = True):
    """Phase-space velocities (pdot, rdot) of one band at m.

    mode='exact' solves the coupled linear system (raising
    SingularSystemError if it is singular or catastrophically conditioned);
    mode='reduced' substitutes curvature-free velocities into the gauge
    terms. A SpinForceWarning is emitted when the gauge force is not small
    against the zeroth-order forces.
    """
    d = m.d
    E0, g = band_gradients(model, band, m, step=fd_step)
    gp, gr = g[:d], g[d:2 * d]
    cst = model.constants
    E3 = np.zeros(3)
    B3 = np.zeros(3)
    if em is not None:
        E3, B3 = em.at(m.r, m.t)
    XB = _cross_matrix(B3, d)
    rhs_p0 = -gr + cst.e * E3[:d]
    rhs_r0 = gp.copy()

    if spin_force:
        provider = curvature if curvature is not None else default_curvature_provider(model)
        F = provider(m).F[band]
    else:
        F = np.zeros((m.n_axes, m.n_axes))
    hb = cst.hbar
    F_pp = F[:d, :d]
    F_pr = F[:d, d:2 * d]
    F_pt = F[:d, 2 * d]
    F_rp = F[d:2 * d, :d]
    F_rr = F[d:2 * d, d:2 * d]
    F_rt = F[d:2 * d, 2 * d]

    if mode == "exact":
        I = np.eye(d)
        M = np.block([
            [I - hb * F_rp, -hb * F_rr - (cst.e / cst.c) * XB],
            [hb * F_pp, I + hb * F_pr],
        ])
        rhs = np.concatenate([rhs_p0 + hb * F_rt, rhs_r0 - hb * F_pt])
        cond = np.linalg.cond(M)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise SingularSystemError(
                f"velocity system is singular (condition number {cond:.3e})")
        try:
            v = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(f"velocity system solve failed: {exc}") from exc
        pdot, rdot = v[:d], v[d:]
    elif mode == "reduced":
        rdot0 = gp
        pdot0 = rhs_p0 + (cst.e / cst.c) * (XB @ rdot0)
        mdot0 = np.concatenate([pdot0, rdot0, [1.0]])
        rdot = gp - hb * (F[:d, :] @ mdot0)
        pdot = rhs_p0 + (cst.e / cst.c) * (XB @ rdot) + hb * (F[d:2 * d, :] @ mdot0)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    if warn and spin_force:
        mdot = np.concatenate([pdot, rdot, [1.0]])
        gauge_norm = hb * max(np.linalg.norm(F[d:2 * d, :] @ mdot),
                              np.linalg.norm(F[:d, :] @ mdot))
        base_norm = max(np.linalg.norm(rhs_p0), np.linalg.norm(rhs_r0), 1e-300)
        if gauge_norm > SPIN_FORCE_WARN_RATIO * base_norm:
            # stable message so the default warning filter dedupes it
            warnings.warn(
                "spin gauge force is not small against the zeroth-order "
                "forces; the adiabatic velocity expansion is marginal here",
                SpinForceWarning, stacklevel=2)
    return pdot, rdot


def adiabaticity_epsilon(model: HamiltonianModel, band: int, m: PhasePoint,
                         mdot: np.ndarray = None, delta_p: float = None,
                         fd_step: float = None) -> float:
    """Adiabaticity parameter of the instantaneous state.

    epsilon = hbar max(|dE/dt| / dE_gap^2, |dp/dr| / delta_p^2), with dE/dt
    the along-trajectory energy derivative (grad E . mdot; mdot defaults to
    the static (0, 0, 1)), |dp/dr| estimated as |grad_r E| / |grad_p E| (the
    constant-energy momentum response; zero for dispersionless states) and
    delta_p defaulting to gap / |grad_p E|. Values near 1 mean band
    transitions are not suppressed.
    """
    d = m.d
    E0, g = band_gradients(model, band, m, step=fd_step)
    if model.split is not None:
        gap = model.band_gap(m)
    else:
        gap = diagonalize(model, m).gap
    if mdot is None:
        mdot = np.zeros(m.n_axes)
        mdot[-1] = 1.0
    mdot = np.asarray(mdot, dtype=float)
    hbar = model.constants.hbar
    dEdt = float(g @ mdot)
    time_term = abs(dEdt) / gap**2
    gp_norm = float(np.linalg.norm(g[:d]))
    gr_norm = float(np.linalg.norm(g[d:2 * d]))
    if gp_norm == 0.0:
        momentum_term = 0.0
    else:
        dpdr = gr_norm / gp_norm
        dp = delta_p if delta_p is not None else gap / gp_norm
        momentum_term = dpdr / dp**2
    return hbar * max(time_term, momentum_term)


# ---------------------------------------------------------------------------
# Integration


@dataclass
class _PointEval:
    v_p: np.ndarray
    v_r: np.ndarray
    energy: float
    epsilon: float
    a_diag: Optional[np.ndarray]
    berry_rate: float
    dynamic_rate: float


def _eval_point(model, band, m, em, config, curvature,
                warn: bool = True) -> _PointEval:
    v_p, v_r = velocity_field(model, band, m, em, curvature=curvature,
                              mode=config.mode, spin_force=config.spin_force,
                              warn=warn)
    mdot = np.concatenate([v_p, v_r, [1.0]])
    eps = adiabaticity_epsilon(model, band, m, mdot, delta_p=config.delta_p)
    E0, _ = band_gradients(model, band, m)
    hbar = model.constants.hbar
    a_diag = None
    berry_rate = 0.0
    if config.record_connection:
        conn = exact_connection(model, m).diagonal()
        a_diag = conn.components[:, band]
        berry_rate = float(a_diag @ mdot)
    dynamic_rate = (float(m.p @ v_r) - E0) / hbar
    return _PointEval(v_p=v_p, v_r=v_r, energy=E0, epsilon=eps, a_diag=a_diag,
                      berry_rate=berry_rate, dynamic_rate=dynamic_rate)


def _make_state(m, band, ev: _PointEval, berry, dynamic, hbar) -> TrajectoryState:
    d = m.d
    a_p = a_r = None
    a_t = None
    if ev.a_diag is not None:
        a_p = ev.a_diag[:d].copy()
        a_r = ev.a_diag[d:2 * d].copy()
        a_t = float(ev.a_diag[2 * d])
    return TrajectoryState(m=m, band=band, energy=ev.energy, epsilon=ev.epsilon,
                           berry_phase=berry, dynamic_phase=dynamic,
                           v_p=ev.v_p.copy(), v_r=ev.v_r.copy(),
                           a_p=a_p, a_r=a_r, a_t=a_t, hbar=hbar)


# Fehlberg 4(5) tableau.
_FE_A = [0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5]
_FE_B = [
    [],
    [0.25],
    [3.0 / 32.0, 9.0 / 32.0],
    [1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
    [439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
    [-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
]
_FE_C4 = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -0.2, 0.0]
_FE_C5 = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0,
          2.0 / 55.0]


def integrate(model: HamiltonianModel, band: int, initial: PhasePoint,
              config: IntegratorConfig, em: ExternalEMField = None,
              curvature: Callable = None) -> Trajectory:
    """Integrate one band's trajectory from the initial phase-space point.

    Time advances uniformly (the final step is shortened to land exactly on
    t_end). Geometric and dynamic phases accumulate by the trapezoid rule
    over accepted states. Errors raised by the velocity evaluation are
    re-raised with the step index attached.
    """
    d = initial.d
    t0 = initial.t
    duration = config.t_end - t0
    if duration <= 0:
        raise ValueError("t_end must exceed the initial time")

    def rhs(s, y):
        m = PhasePoint(y[:d], y[d:], t0 + s)
        # warn only at the initial evaluation, not once per RK stage
        v_p, v_r = velocity_field(model, band, m, em, curvature=curvature,
                                  mode=config.mode, spin_force=config.spin_force,
                                  warn=False)
        return np.concatenate([v_p, v_r])

    def eval_at(s, y, warn: bool = False) -> _PointEval:
        m = PhasePoint(y[:d], y[d:], t0 + s)
        return _eval_point(model, band, m, em, config, curvature, warn=warn)

    y = np.concatenate([initial.p, initial.r])
    s = 0.0
    try:
        ev = eval_at(s, y, warn=True)
    except Exception as exc:
        _attach_step(exc, 0)
        raise
    berry = 0.0
    dynamic = 0.0
    hbar = model.constants.hbar
    states = [_make_state(initial, band, ev, berry, dynamic, hbar)]
    if ev.epsilon > config.epsilon_abort:
        return Trajectory(states=states, status="adiabaticity_breach", band=band)

    status = "max_steps"
    h = config.step
    steps = 0
    while steps < config.max_steps:
        steps += 1
        h_try = min(h, duration - s)
        try:
            if config.method == "rk4":
                y_new, s_new = _rk4_step(rhs, s, y, h_try, ev)
                accepted = True
            else:
                y_new, s_new, h, accepted = _rkf45_step(rhs, s, y, h_try, ev,
                                                        config.tolerance)
        except Exception as exc:
            _attach_step(exc, steps)
            raise
        if not accepted:
            continue
        try:
            ev_new = eval_at(s_new, y_new)
        except Exception as exc:
            _attach_step(exc, steps)
            raise
        dt = s_new - s
        berry += 0.5 * dt * (ev.berry_rate + ev_new.berry_rate)
        dynamic += 0.5 * dt * (ev.dynamic_rate + ev_new.dynamic_rate)
        s, y, ev = s_new, y_new, ev_new
        m_new = PhasePoint(y[:d], y[d:], t0 + s)
        states.append(_make_state(m_new, band, ev, berry, dynamic, hbar))
        if ev.epsilon > config.epsilon_abort:
            status = "adiabaticity_breach"
            break
        if s >= duration - 1e-15 * max(1.0, abs(duration)):
            status = "completed"
            break
    return Trajectory(states=states, status=status, band=band)


def _attach_step(exc: Exception, step_index: int) -> None:
    note = f"integration step {step_index}"
    if exc.args and isinstance(exc.args[0], str):
        exc.args = (f"{note}: {exc.args[0]}",) + exc.args[1:]
    else:
        exc.args = (note,) + exc.args


def _rk4_step(rhs, s, y, h, ev: _PointEval):
    k1 = np.concatenate([ev.v_p, ev.v_r])
    k2 = rhs(s + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(s + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(s + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), s + h


def _rkf45_step(rhs, s, y, h, ev: _PointEval, tol):
    ks = [np.concatenate([ev.v_p, ev.v_r])]
    for stage in range(1, 6):
        y_st = y + h * sum(b * k for b, k in zip(_FE_B[stage], ks))
        ks.append(rhs(s + _FE_A[stage] * h, y_st))
    y4 = y + h * sum(c * k for c, k in zip(_FE_C4, ks))
    y5 = y + h * sum(c * k for c, k in zip(_FE_C5, ks))
    err = float(np.max(np.abs(y5 - y4) / (tol * (1.0 + np.abs(y)))))
    if err <= 1.0:
        h_next = h * min(5.0, max(0.2, 0.9 * (max(err, 1e-16)) ** -0.2))
        return y5, s + h, h_next, True
    h_next = h * min(1.0, max(0.2, 0.9 * err ** -0.2))
    return y, s, h_next, False


# ---------------------------------------------------------------------------
# Contour displacement and effective fields


def displacement_contour(p_path, field, hbar: float = 1.0,
                         band: int = None) -> np.ndarray:
    """Net anomalous displacement hbar int F x dp along a momentum contour.

    field(p) returns the momentum-block curvature pseudovector (3,), or a
    per-band stack (n, 3) from which band selects one. Trapezoid rule.
    """
    pts = np.asarray(p_path, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 2:
        raise ValueError("p_path must be an (N, 3) array")

    def fvec(p):
        f = np.asarray(field(p), dtype=float)
        if f.ndim == 2:
            if band is None:
                raise ValueError("band is required for a per-band field")
            f = f[band]
        return f

    total = np.zeros(3)
    f_prev = fvec(pts[0])
    for k in range(1, pts.shape[0]):
        f_next = fvec(pts[k])
        dp = pts[k] - pts[k - 1]
        total += 0.5 * (np.cross(f_prev, dp) + np.cross(f_next, dp))
        f_prev = f_next
    return hbar * total


@dataclass(frozen=True)
class EffectiveFields:
    """Effective EM fields seen by the two bands of a magnetic-coupling model.

    b_eff/e_eff include the external magnetic field; b_spin/e_spin are the
    pure gauge-force parts. Rows are bands in ascending order (spin charge
    -1/2 first).
    """

    b_eff: np.ndarray
    e_eff: np.ndarray
    b_spin: np.ndarray
    e_spin: np.ndarray


def effective_em_fields(b_field, r, t: float = 0.0,
                        constants: Constants = None) -> EffectiveFields:
    """Map the position-block curvature of a Zeeman coupling onto EM fields.

    The gauge force hbar F_rr . rdot acts like (e/c) rdot x B_spin with
    B_spin = (hbar c / e) dual(F_rr), and hbar F_rt acts like e E_spin with
    E_spin = (hbar / e) F_rt; both are per band. The coupling is
    H1 = chi B(r, t) with B the supplied field.
    """
    cst = constants or Constants()
    bf = as_field(b_field)
    b = cst.chi * bf.value(r, t)
    nb = float(np.linalg.norm(b))
    if nb == 0.0:
        raise SingularityError("effective fields are singular where B = 0")
    Jr = cst.chi * bf.d_dr(r, t)  # columns: d(chi B)/dr_j
    Jt = cst.chi * bf.d_dt(r, t)
    b_spin = np.empty((2, 3))
    e_spin = np.empty((2, 3))
    for bidx, S in enumerate((-0.5, +0.5)):
        Frr = np.zeros((3, 3))
        for i in range(3):
            for j in range(i + 1, 3):
                Frr[i, j] = -S * float(b @ np.cross(Jr[:, i], Jr[:, j])) / nb**3
                Frr[j, i] = -Frr[i, j]
        Frt = np.array([-S * float(b @ np.cross(Jr[:, i], Jt)) / nb**3
                        for i in range(3)])
        b_spin[bidx] = (cst.hbar * cst.c / cst.e) * tensor_to_pseudo(Frr)
        e_spin[bidx] = (cst.hbar / cst.e) * Frt
    B_ext = bf.value(r, t)
    return EffectiveFields(b_eff=B_ext[None, :] + b_spin,
                           e_eff=e_spin.copy(), b_spin=b_spin, e_spin=e_spin)
