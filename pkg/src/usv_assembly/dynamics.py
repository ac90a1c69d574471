"""Continuous 3-DOF vessel model with LADRC and a PID baseline.

The plant is the Fossen surface-vessel model

    eta_dot = R(psi) v
    M v_dot + C(v) v + D v = tau + tau_w,     tau = E f

with four thrusters ``f`` and a diagonal mass and drag.  Seen from the
world frame the pose obeys ``eta_ddot = F + B f`` with ``B = R M^-1 E``,
where ``F`` lumps drag, Coriolis terms and the disturbance.  The linear
extended state observer estimates ``F`` as a third state per axis; the
ADRC law cancels it and closes a PD loop on the remaining double
integrator.

All functions are pure: they take value states and return new ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "VesselParams",
    "VesselState",
    "ObserverState",
    "Gains",
    "PidGains",
    "PidState",
    "Disturbance",
    "TrackConfig",
    "TrackResult",
    "SingularAllocation",
    "rotation_matrix",
    "thruster_mixing",
    "mixing_matrix",
    "input_matrix",
    "allocation",
    "coriolis",
    "plant_derivative",
    "plant_step",
    "leso_step",
    "observer_poles",
    "observer_time_constant",
    "routh_hurwitz",
    "adrc_control",
    "pid_control",
    "ultimate_gain",
    "ziegler_nichols",
    "reference",
    "track",
    "wrap_angle",
]

TRACK_FORMAT = "usv-assembly-track"
TRACK_VERSION = 1


class SingularAllocation(ValueError):
    """The thruster geometry cannot produce every planar force and moment."""


def _vec3(values, name: str) -> tuple[float, float, float]:
    out = tuple(float(v) for v in values)
    if len(out) != 3:
        raise ValueError(f"{name} needs 3 entries, got {len(out)}")
    return out  # type: ignore[return-value]


@dataclass(frozen=True)
class VesselParams:
    m1: float = 12.0
    m2: float = 12.0
    m3: float = 0.4
    Xu: float = 6.0
    Yv: float = 6.0
    Nr: float = 0.6
    l: float = 0.11
    f_min: float = -5.0
    f_max: float = 5.0

    def __post_init__(self):
        if min(self.m1, self.m2, self.m3, self.Xu, self.Yv, self.Nr) <= 0:
            raise ValueError("masses and drag coefficients must be positive")
        if not self.f_min < 0 < self.f_max:
            raise ValueError("thrust bounds must satisfy f_min < 0 < f_max")

    @property
    def M(self) -> np.ndarray:
        return np.diag([self.m1, self.m2, self.m3])

    @property
    def D(self) -> np.ndarray:
        return np.diag([self.Xu, self.Yv, self.Nr])


@dataclass(frozen=True)
class VesselState:
    eta: np.ndarray  # x, y, psi (psi unwrapped)
    eta_dot: np.ndarray

    @classmethod
    def at(cls, eta, eta_dot=(0.0, 0.0, 0.0)) -> "VesselState":
        return cls(np.array(eta, dtype=float), np.array(eta_dot, dtype=float))

    @property
    def body_velocity(self) -> np.ndarray:
        return rotation_matrix(self.eta[2]).T @ self.eta_dot

    def kinetic_energy(self, params: VesselParams) -> float:
        v = self.body_velocity
        return 0.5 * float(v @ params.M @ v)


@dataclass(frozen=True)
class ObserverState:
    """Per-axis estimates of pose, rate and the lumped term ``F``."""

    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    @classmethod
    def from_state(cls, state: VesselState) -> "ObserverState":
        return cls(state.eta.copy(), state.eta_dot.copy(), np.zeros(3))

    @classmethod
    def zeros(cls) -> "ObserverState":
        return cls(np.zeros(3), np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class Gains:
    Kp: tuple[float, float, float] = (1600.0, 1600.0, 144.0)
    Kd: tuple[float, float, float] = (80.0, 80.0, 24.0)
    L1: tuple[float, float, float] = (30.0, 300.0, 300.0)
    L2: tuple[float, float, float] = (30.0, 300.0, 300.0)
    L3: tuple[float, float, float] = (9.0, 27.0, 27.0)

    def __post_init__(self):
        for name in ("Kp", "Kd", "L1", "L2", "L3"):
            v = _vec3(getattr(self, name), name)
            if min(v) <= 0:
                raise ValueError(f"{name} entries must be positive")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class PidGains:
    Kp: tuple[float, float, float]
    Ki: tuple[float, float, float]
    Kd: tuple[float, float, float]

    def __post_init__(self):
        for name in ("Kp", "Ki", "Kd"):
            v = _vec3(getattr(self, name), name)
            if min(v) < 0:
                raise ValueError(f"{name} entries must be non-negative")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class PidState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class Disturbance:
    """Body-frame sinusoidal forces and moment ``a * sin(w t + phase)`` per axis."""

    amplitude: tuple[float, float, float] = (1.5, 1.5, 0.05)
    frequency: tuple[float, float, float] = (1.2, 0.9, 1.1)
    phase: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        for name in ("amplitude", "frequency", "phase"):
            object.__setattr__(self, name, _vec3(getattr(self, name), name))

    def __call__(self, t: float) -> np.ndarray:
        a, w, p = (np.asarray(v) for v in (self.amplitude, self.frequency, self.phase))
        return a * np.sin(w * t + p)

    @classmethod
    def none(cls) -> "Disturbance":
        return cls(amplitude=(0.0, 0.0, 0.0))


def wrap_angle(a):
    return (np.asarray(a) + math.pi) % (2 * math.pi) - math.pi


def rotation_matrix(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def mixing_matrix(l: float) -> np.ndarray:
    return np.array([[0.0, 1.0, 0.0, 1.0], [1.0, 0.0, 1.0, 0.0], [l, -l, -l, l]])


def thruster_mixing(f, l: float) -> np.ndarray:
    """Body-frame force and moment ``(Fx, Fy, Mz)`` from the four thruster forces."""
    return mixing_matrix(l) @ np.asarray(f, dtype=float)


def input_matrix(psi: float, params: VesselParams) -> np.ndarray:
    """``B = R(psi) M^-1 E``: world-frame pose acceleration per unit thrust."""
    return rotation_matrix(psi) @ np.diag(1.0 / np.diag(params.M)) @ mixing_matrix(params.l)


def allocation(B: np.ndarray) -> np.ndarray:
    """Right pseudo-inverse ``B^T (B B^T)^-1``."""
    B = np.asarray(B, dtype=float)
    G = B @ B.T
    scale = float(np.prod(np.diag(G)))
    if scale == 0.0 or abs(np.linalg.det(G)) <= 1e-12 * scale:
        raise SingularAllocation("B B^T is singular; the thruster arm must be non-zero")
    return B.T @ np.linalg.inv(G)


def coriolis(v, params: VesselParams) -> np.ndarray:
    u, w, _ = v
    return np.array(
        [
            [0.0, 0.0, -params.m2 * w],
            [0.0, 0.0, params.m1 * u],
            [params.m2 * w, -params.m1 * u, 0.0],
        ]
    )


def plant_derivative(eta, v, tau_total, params: VesselParams):
    """Time derivatives of pose and body velocity."""
    u, w, r = v
    c, s = math.cos(eta[2]), math.sin(eta[2])
    # C(v) v written out, plus linear drag
    damping = np.array(
        [
            -params.m2 * w * r + params.Xu * u,
            params.m1 * u * r + params.Yv * w,
            (params.m2 - params.m1) * u * w + params.Nr * r,
        ]
    )
    eta_dot = np.array([c * u - s * w, s * u + c * w, r])
    return eta_dot, (tau_total - damping) / np.array([params.m1, params.m2, params.m3])


def plant_step(
    state: VesselState,
    f,
    tau_w: Callable[[float], np.ndarray] | Sequence[float] | None,
    dt: float,
    params: VesselParams = VesselParams(),
    t: float = 0.0,
) -> VesselState:
    """One RK4 step with the thrust held constant over ``dt``.

    ``tau_w`` is either a constant body-frame vector or a function of time,
    which is sampled at the RK4 stage times.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    tau = thruster_mixing(f, params.l)
    if tau_w is None:
        dist = lambda _t: 0.0  # noqa: E731
    elif callable(tau_w):
        dist = tau_w
    else:
        const = np.asarray(tau_w, dtype=float)
        dist = lambda _t: const  # noqa: E731

    eta = state.eta
    v = state.body_velocity

    def deriv(e, vel, s):
        return plant_derivative(e, vel, tau + dist(t + s), params)

    k1e, k1v = deriv(eta, v, 0.0)
    k2e, k2v = deriv(eta + 0.5 * dt * k1e, v + 0.5 * dt * k1v, 0.5 * dt)
    k3e, k3v = deriv(eta + 0.5 * dt * k2e, v + 0.5 * dt * k2v, 0.5 * dt)
    k4e, k4v = deriv(eta + dt * k3e, v + dt * k3v, dt)
    eta_n = eta + dt / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e)
    v_n = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return VesselState(eta_n, rotation_matrix(eta_n[2]) @ v_n)


def _leso_derivative(x1, x2, x3, u, y, gains: Gains):
    e = y - x1
    L1, L2, L3 = (np.asarray(g) for g in (gains.L1, gains.L2, gains.L3))
    return x2 + L1 * e, x3 + u + L2 * e, L3 * e


def leso_step(obs: ObserverState, u_applied, y_measured, gains: Gains, dt: float) -> ObserverState:
    """Advance the observer by ``dt`` with ``u`` and ``y`` held constant (RK4).

    ``u_applied`` is the world-frame acceleration the thrusters were asked
    for, ``B f``; ``y_measured`` is the measured pose.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u_applied, dtype=float)
    y = np.asarray(y_measured, dtype=float)
    x = (obs.x1, obs.x2, obs.x3)

    def add(a, k, h):
        return tuple(ai + h * ki for ai, ki in zip(a, k))

    k1 = _leso_derivative(*x, u, y, gains)
    k2 = _leso_derivative(*add(x, k1, dt / 2), u, y, gains)
    k3 = _leso_derivative(*add(x, k2, dt / 2), u, y, gains)
    k4 = _leso_derivative(*add(x, k3, dt), u, y, gains)
    new = tuple(xi + dt / 6.0 * (a + 2 * b + 2 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4))
    return ObserverState(*new)


def observer_poles(gains: Gains, axis: int) -> np.ndarray:
    """Roots of ``s^3 + L1 s^2 + L2 s + L3`` for one axis."""
    return np.roots([1.0, gains.L1[axis], gains.L2[axis], gains.L3[axis]])


def observer_time_constant(gains: Gains, axis: int) -> float:
    """Slowest observer time constant, ``1 / min |Re(pole)|``."""
    return 1.0 / float(np.min(np.abs(observer_poles(gains, axis).real)))


def routh_hurwitz(coeffs: Sequence[float]) -> bool:
    """True when every root of the polynomial lies in the open left half-plane.

    Coefficients go from the highest power down; the first column of the
    Routh array must keep one strict sign.
    """
    c = [float(v) for v in coeffs]
    if c[0] < 0:
        c = [-v for v in c]
    if any(v <= 0 for v in c):
        return False
    rows = [c[0::2], c[1::2]]
    width = len(rows[0])
    rows = [r + [0.0] * (width - len(r)) for r in rows]
    for _ in range(len(c) - 2):
        a, b = rows[-2], rows[-1]
        if b[0] == 0:
            return False
        new = [(b[0] * a[i + 1] - a[0] * b[i + 1]) / b[0] for i in range(width - 1)] + [0.0]
        rows.append(new)
    return all(r[0] > 0 for r in rows)


def adrc_control(
    obs: ObserverState,
    eta_r,
    eta_r_dot,
    gains: Gains,
    B: np.ndarray,
    params: VesselParams = VesselParams(),
    measured: Optional[VesselState] = None,
) -> np.ndarray:
    """LADRC thrust command.

    The PD term acts on the observer's pose and rate unless a ``measured``
    state is passed, in which case it uses the measurement instead.  The
    heading error is wrapped to (-pi, pi].
    """
    pose, rate = (obs.x1, obs.x2) if measured is None else (measured.eta, measured.eta_dot)
    err = np.asarray(eta_r, dtype=float) - pose
    err[2] = wrap_angle(err[2])
    u0 = np.asarray(gains.Kp) * err + np.asarray(gains.Kd) * (np.asarray(eta_r_dot, dtype=float) - rate)
    f = allocation(B) @ (u0 - obs.x3)
    return np.clip(f, params.f_min, params.f_max)


def pid_control(
    pid: PidState,
    state: VesselState,
    eta_r,
    eta_r_dot,
    gains: PidGains,
    B: np.ndarray,
    dt: float,
    params: VesselParams = VesselParams(),
) -> tuple[np.ndarray, PidState]:
    """Per-axis PID on the pose error, allocated through ``B`` and clamped.

    The derivative acts on the rate error, so a reference step causes no
    kick.  The integral is frozen on any step where a thruster saturates
    (conditional integration).
    """
    err = np.asarray(eta_r, dtype=float) - state.eta
    err[2] = wrap_angle(err[2])
    derr = np.asarray(eta_r_dot, dtype=float) - state.eta_dot
    Kp, Ki, Kd = (np.asarray(g) for g in (gains.Kp, gains.Ki, gains.Kd))
    alloc = allocation(B)
    candidate = pid.integral + err * dt
    raw = alloc @ (Kp * err + Ki * candidate + Kd * derr)
    if np.any(raw > params.f_max) or np.any(raw < params.f_min):
        integral = pid.integral
        raw = alloc @ (Kp * err + Ki * integral + Kd * derr)
    else:
        integral = candidate
    return np.clip(raw, params.f_min, params.f_max), PidState(integral)


def _zoh_axis(a: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Discrete transfer function of ``1 / (s (s + a))`` behind a zero-order hold."""
    ea = math.exp(-a * dt)
    b1 = (a * dt - 1 + ea) / a**2
    b2 = (1 - ea - a * dt * ea) / a**2
    num = np.array([b1, b2])
    den = np.array([1.0, -(1 + ea), ea])
    return num, den


def _closed_loop_radius(k: float, num, den) -> float:
    poly = den.copy()
    poly[1:] += k * num
    return float(np.max(np.abs(np.roots(poly))))


def ultimate_gain(a: float, dt: float) -> tuple[float, float]:
    """Ultimate gain and period of the sampled axis under proportional control."""
    num, den = _zoh_axis(a, dt)
    lo, hi = 0.0, 1.0
    while _closed_loop_radius(hi, num, den) < 1.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _closed_loop_radius(mid, num, den) < 1.0:
            lo = mid
        else:
            hi = mid
    ku = 0.5 * (lo + hi)
    poly = den.copy()
    poly[1:] += ku * num
    z = max(np.roots(poly), key=lambda r: (abs(r), r.imag))
    theta = abs(math.atan2(z.imag, z.real))
    return ku, 2 * math.pi * dt / theta


def ziegler_nichols(params: VesselParams = VesselParams(), dt: float = 0.005) -> PidGains:
    """Classic Ziegler-Nichols PID gains per axis.

    Each axis is treated as the acceleration-input model ``1 / (s (s + d/m))``
    sampled with a zero-order hold at ``dt``; its ultimate gain and period
    give ``Kp = 0.6 Ku``, ``Ti = Tu / 2`` and ``Td = Tu / 8``.
    """
    kp, ki, kd = [], [], []
    for d, m in ((params.Xu, params.m1), (params.Yv, params.m2), (params.Nr, params.m3)):
        ku, tu = ultimate_gain(d / m, dt)
        p = 0.6 * ku
        kp.append(p)
        ki.append(p / (tu / 2))
        kd.append(p * tu / 8)
    return PidGains(tuple(kp), tuple(ki), tuple(kd))


def _lemniscate(s: float):
    S, C = math.sin(s), math.cos(s)
    D = 1 + S * S
    pos = (2 * C / D, 4 * S * C / D)
    d1 = (-2 * S * (3 - S * S) / D**2, 4 * (1 - 3 * S * S) / D**2)
    d2 = (C * (-6 + 24 * S * S - 2 * S**4) / D**3, S * C * (-40 + 24 * S * S) / D**3)
    return pos, d1, d2


def reference(t: float, kind: str, rate: Optional[float] = None, radius: float = 1.2):
    """Reference pose and rate at time ``t``.

    ``circle`` runs counter-clockwise around the origin at angular rate
    ``rate`` (default 0.3 rad/s); ``eight`` is the lemniscate with its
    parameter advancing at ``rate`` (default 0.1 rad/s).  The heading
    follows the path tangent; continuity across the branch cut is left to
    the caller, since controllers wrap the heading error.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if kind == "circle":
        w = 0.3 if rate is None else rate
        a = w * t
        pos = (radius * math.cos(a), radius * math.sin(a))
        d1 = (-radius * w * math.sin(a), radius * w * math.cos(a))
        d2 = (-radius * w * w * math.cos(a), -radius * w * w * math.sin(a))
    elif kind == "eight":
        w = 0.1 if rate is None else rate
        p, q1, q2 = _lemniscate(w * t)
        pos = p
        d1 = (q1[0] * w, q1[1] * w)
        d2 = (q2[0] * w * w, q2[1] * w * w)
    else:
        raise ValueError(f"unknown reference {kind!r}; use circle or eight")
    speed2 = d1[0] ** 2 + d1[1] ** 2
    psi = math.atan2(d1[1], d1[0])
    psi_dot = (d1[0] * d2[1] - d1[1] * d2[0]) / speed2 if speed2 > 0 else 0.0
    return np.array([pos[0], pos[1], psi]), np.array([d1[0], d1[1], psi_dot])


@dataclass(frozen=True)
class TrackConfig:
    vessel: VesselParams = VesselParams()
    gains: Gains = Gains()
    pid: Optional[PidGains] = None  # None: Ziegler-Nichols on ``vessel``
    disturbance: Disturbance = Disturbance()
    dt: float = 0.005
    duration: Optional[float] = None  # None: one lap plus the transient
    transient: float = 5.0
    rate: Optional[float] = None
    pd_feedback: str = "measured"  # or "observer"
    record_every: int = 10

    def __post_init__(self):
        if self.dt <= 0 or self.transient < 0 or self.record_every < 1:
            raise ValueError("invalid tracking configuration")
        if self.pd_feedback not in ("observer", "measured"):
            raise ValueError("pd_feedback must be observer or measured")


@dataclass
class TrackResult:
    kind: str
    controller: str
    t: np.ndarray
    eta: np.ndarray
    eta_r: np.ndarray
    thrust: np.ndarray
    f_hat: np.ndarray
    mae_position: float
    mae_heading: float
    config: TrackConfig

    def summary(self) -> dict:
        return {
            "trajectory": self.kind,
            "controller": self.controller,
            "mae_position_m": self.mae_position,
            "mae_heading_rad": self.mae_heading,
            "transient_s": self.config.transient,
            "duration_s": float(self.t[-1]) if len(self.t) else 0.0,
        }

    def to_jsonl(self) -> str:
        head = {"format": TRACK_FORMAT, "version": TRACK_VERSION, "trajectory": self.kind, "controller": self.controller}
        lines = [json.dumps(head, separators=(",", ":"))]
        for k in range(len(self.t)):
            row = {
                "t": round(float(self.t[k]), 6),
                "eta": [float(v) for v in self.eta[k]],
                "eta_r": [float(v) for v in self.eta_r[k]],
                "f": [float(v) for v in self.thrust[k]],
                "f_hat": [float(v) for v in self.f_hat[k]],
            }
            lines.append(json.dumps(row, separators=(",", ":")))
        lines.append(json.dumps({"summary": self.summary()}, separators=(",", ":")))
        return "\n".join(lines) + "\n"


def _default_duration(kind: str, rate: Optional[float]) -> float:
    w = (0.3 if kind == "circle" else 0.1) if rate is None else rate
    return 2 * math.pi / w


def track(kind: str, controller: str, config: TrackConfig = TrackConfig()) -> TrackResult:
    """Simulate the vessel following ``kind`` under ``controller`` (``adrc`` or ``pid``).

    The vessel starts at rest on the reference pose.  MAEs cover the samples
    after ``config.transient`` seconds.
    """
    if controller not in ("adrc", "pid"):
        raise ValueError(f"unknown controller {controller!r}; use adrc or pid")
    p, dt = config.vessel, config.dt
    duration = config.duration if config.duration is not None else config.transient + _default_duration(kind, config.rate)
    n = int(round(duration / dt))
    eta0, _ = reference(0.0, kind, config.rate)
    state = VesselState.at(eta0)
    obs = ObserverState.from_state(state)
    pid = PidState()
    pid_gains = config.pid or ziegler_nichols(p, dt)
    psi_r_prev = eta0[2]
    rec_t, rec_eta, rec_ref, rec_f, rec_fh = [], [], [], [], []
    pos_err, yaw_err = [], []
    for k in range(n + 1):
        t = k * dt
        eta_r, eta_r_dot = reference(t, kind, config.rate)
        # keep the reference heading continuous
        eta_r[2] = psi_r_prev + float(wrap_angle(eta_r[2] - psi_r_prev))
        psi_r_prev = eta_r[2]
        B = input_matrix(state.eta[2], p)
        if controller == "adrc":
            fb = state if config.pd_feedback == "measured" else None
            f = adrc_control(obs, eta_r, eta_r_dot, config.gains, B, p, measured=fb)
        else:
            f, pid = pid_control(pid, state, eta_r, eta_r_dot, pid_gains, B, dt, p)
        if t >= config.transient:
            pos_err.append(math.hypot(*(state.eta[:2] - eta_r[:2])))
            yaw_err.append(abs(float(wrap_angle(state.eta[2] - eta_r[2]))))
        if k % config.record_every == 0:
            rec_t.append(t)
            rec_eta.append(state.eta.copy())
            rec_ref.append(eta_r.copy())
            rec_f.append(f.copy())
            rec_fh.append(obs.x3.copy())
        if k == n:
            break
        # measurement taken at the start of the step drives the observer over it
        obs = leso_step(obs, B @ f, state.eta, config.gains, dt)
        state = plant_step(state, f, config.disturbance, dt, p, t=t)
    return TrackResult(
        kind=kind,
        controller=controller,
        t=np.array(rec_t),
        eta=np.array(rec_eta),
        eta_r=np.array(rec_ref),
        thrust=np.array(rec_f),
        f_hat=np.array(rec_fh),
        mae_position=float(np.mean(pos_err)) if pos_err else 0.0,
        mae_heading=float(np.mean(yaw_err)) if yaw_err else 0.0,
        config=config,
    )
