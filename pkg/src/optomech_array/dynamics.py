"""Time-domain propagation of photon-phonon wave packets on the lattice.

The linearized, excitation-conserving dynamics are simulated as ``2N``
coupled complex amplitudes::

    i da_j/dt = delta_eff(t) a_j + g b_j - G (a_{j-1} + a_{j+1})
    i db_j/dt = omega_m b_j + g a_j

integrated with fixed-step fourth-order Runge-Kutta. A uniform frequency
shift of both diagonals (a rotating frame) only changes the global phase,
so every reported observable is frame independent.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import integrate

from .model import ArrayParams, Branch, bogoliubov_coefficients, group_velocity, polariton_frequencies
from .oracle import Boundary

__all__ = [
    "RampShape",
    "Frame",
    "DetuningProtocol",
    "LatticeState",
    "PulseSpec",
    "PropagationTrace",
    "StopReleaseReport",
    "NumericalError",
    "UnstableStepError",
    "IntegrationError",
    "AdiabaticityWarning",
    "equations_of_motion",
    "rk4_step",
    "init_gaussian_pulse",
    "evolve",
    "mode_fractions",
    "branch_populations",
    "project_branch",
    "adiabaticity_metric",
    "envelope_fidelity",
    "effective_transport_time",
    "run_stop_release",
]

STABILITY_MARGIN = 0.05
ADIABATIC_THRESHOLD = 0.1


class NumericalError(ArithmeticError):
    pass


class UnstableStepError(NumericalError):
    pass


class IntegrationError(NumericalError):
    def __init__(self, message, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class AdiabaticityWarning(UserWarning):
    pass


class RampShape(enum.Enum):
    LINEAR = "linear"
    SMOOTHSTEP = "smoothstep"


class Frame(enum.Enum):
    """Rotating frame used during integration.

    ``MECHANICAL`` removes ``omega_m`` from both diagonals; ``MIDBAND``
    removes ``omega_m + detuning_om(t) / 2``, the centre of the
    instantaneous two-band spectrum, which roughly halves the largest
    frequency the integrator has to resolve.
    """

    LAB = "lab"
    MECHANICAL = "mechanical"
    MIDBAND = "midband"

    def shift(self, dom, p: ArrayParams):
        if self is Frame.LAB:
            return np.zeros_like(np.asarray(dom, dtype=float))
        if self is Frame.MECHANICAL:
            return np.full_like(np.asarray(dom, dtype=float), p.omega_m)
        return p.omega_m + 0.5 * np.asarray(dom, dtype=float)


@dataclass(frozen=True)
class DetuningProtocol:
    """Piecewise detuning schedule: hold, ramp, hold."""

    initial_dom: float
    final_dom: float
    t_hold_pre: float = 0.0
    t_ramp: float = 0.0
    t_hold_post: float = 0.0
    shape: RampShape = RampShape.LINEAR

    def __post_init__(self):
        object.__setattr__(self, "shape", RampShape(self.shape))
        for name in ("t_hold_pre", "t_ramp", "t_hold_post"):
            val = getattr(self, name)
            if not (val >= 0 and math.isfinite(val)):
                raise ValueError(f"{name} must be a finite duration >= 0, got {val!r}")
        if not (math.isfinite(self.initial_dom) and math.isfinite(self.final_dom)):
            raise ValueError("detunings must be finite")

    @classmethod
    def constant(cls, dom: float, duration: float) -> "DetuningProtocol":
        return cls(dom, dom, t_hold_pre=duration)

    @property
    def duration(self) -> float:
        return self.t_hold_pre + self.t_ramp + self.t_hold_post

    @property
    def ramp_end(self) -> float:
        return self.t_hold_pre + self.t_ramp

    def _progress(self, t):
        t = np.asarray(t, dtype=float)
        if self.t_ramp == 0:
            return np.where(t >= self.t_hold_pre, 1.0, 0.0)
        s = np.clip((t - self.t_hold_pre) / self.t_ramp, 0.0, 1.0)
        if self.shape is RampShape.SMOOTHSTEP:
            s = s * s * (3.0 - 2.0 * s)
        return s

    def detuning(self, t):
        if self.initial_dom == self.final_dom:
            out = np.full_like(np.asarray(t, dtype=float), self.initial_dom)
        else:
            out = self.initial_dom + (self.final_dom - self.initial_dom) * self._progress(t)
        return float(out) if out.ndim == 0 else out

    def rate(self, t):
        """``d detuning / dt``; zero outside the ramp."""
        t = np.asarray(t, dtype=float)
        if self.t_ramp == 0:
            out = np.zeros_like(t)
        else:
            s = (t - self.t_hold_pre) / self.t_ramp
            inside = (s >= 0) & (s <= 1)
            slope = (self.final_dom - self.initial_dom) / self.t_ramp
            if self.shape is RampShape.SMOOTHSTEP:
                slope = slope * 6.0 * s * (1.0 - s)
            out = np.where(inside, slope, 0.0)
        return float(out) if out.ndim == 0 else out

    def mirrored(self, t_hold_post: float | None = None) -> "DetuningProtocol":
        """Ramp back to the start value with the same shape and duration, no leading hold."""
        return DetuningProtocol(
            initial_dom=self.final_dom,
            final_dom=self.initial_dom,
            t_hold_pre=0.0,
            t_ramp=self.t_ramp,
            t_hold_post=self.t_hold_pre if t_hold_post is None else t_hold_post,
            shape=self.shape,
        )


@dataclass
class LatticeState:
    time: float
    photon_amp: np.ndarray
    phonon_amp: np.ndarray

    def __post_init__(self):
        self.photon_amp = np.asarray(self.photon_amp, dtype=complex)
        self.phonon_amp = np.asarray(self.phonon_amp, dtype=complex)
        if self.photon_amp.shape != self.phonon_amp.shape or self.photon_amp.ndim != 1:
            raise ValueError("photon and phonon amplitudes must be 1-D arrays of equal length")

    @property
    def n_sites(self) -> int:
        return self.photon_amp.shape[0]

    @property
    def norm(self) -> float:
        return float(np.vdot(self.photon_amp, self.photon_amp).real + np.vdot(self.phonon_amp, self.phonon_amp).real)

    def vector(self) -> np.ndarray:
        """Amplitudes stacked in the ``(a_1..a_N, b_1..b_N)`` basis."""
        return np.concatenate([self.photon_amp, self.phonon_amp])

    @classmethod
    def from_vector(cls, time: float, x: np.ndarray) -> "LatticeState":
        n = len(x) // 2
        return cls(time, x[:n].copy(), x[n:].copy())

    def copy(self) -> "LatticeState":
        return LatticeState(self.time, self.photon_amp.copy(), self.phonon_amp.copy())


@dataclass(frozen=True)
class PulseSpec:
    center: float
    k0: float = np.pi / 2
    sigma: float = 16.0


TRACE_COLUMNS = ("t", "norm", "photon_fraction", "phonon_fraction", "centroid", "width", "velocity")


@dataclass
class PropagationTrace:
    """Sampled observables; ``centroid`` is unwrapped across periodic boundaries."""

    time: np.ndarray
    total_norm: np.ndarray
    photon_fraction: np.ndarray
    phonon_fraction: np.ndarray
    centroid: np.ndarray
    width: np.ndarray
    n_sites: int
    velocity: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("time", "total_norm", "photon_fraction", "phonon_fraction", "centroid", "width"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if len(self.time) >= 2:
            self.velocity = np.gradient(self.centroid, self.time)
        else:
            self.velocity = np.zeros_like(self.time)

    def __len__(self):
        return len(self.time)

    @property
    def max_norm_drift(self) -> float:
        return float(np.max(np.abs(self.total_norm - 1.0))) if len(self) else 0.0

    def rows(self) -> np.ndarray:
        return np.column_stack(
            [self.time, self.total_norm, self.photon_fraction, self.phonon_fraction, self.centroid, self.width, self.velocity]
        )

    def window(self, t0: float, t1: float) -> np.ndarray:
        eps = 1e-9 * max(1.0, abs(t1))
        return (self.time >= t0 - eps) & (self.time <= t1 + eps)

    def velocity_between(self, t0: float, t1: float) -> float:
        """Least-squares slope of the centroid over ``[t0, t1]``."""
        mask = self.window(t0, t1)
        if mask.sum() < 2:
            raise ValueError(f"fewer than two samples in [{t0}, {t1}]; reduce sample_every")
        return float(np.polyfit(self.time[mask], self.centroid[mask], 1)[0])

    def extend(self, other: "PropagationTrace") -> "PropagationTrace":
        """Concatenate a trace that continues this one, dropping the shared first sample."""
        start = 1 if len(self) and len(other) and abs(other.time[0] - self.time[-1]) < 1e-9 else 0
        centroid = other.centroid[start:]
        if len(self) and len(other):
            n = self.n_sites
            centroid = centroid + np.round((self.centroid[-1] - other.centroid[0]) / n) * n
        return PropagationTrace(
            time=np.concatenate([self.time, other.time[start:]]),
            total_norm=np.concatenate([self.total_norm, other.total_norm[start:]]),
            photon_fraction=np.concatenate([self.photon_fraction, other.photon_fraction[start:]]),
            phonon_fraction=np.concatenate([self.phonon_fraction, other.phonon_fraction[start:]]),
            centroid=np.concatenate([self.centroid, centroid]),
            width=np.concatenate([self.width, other.width[start:]]),
            n_sites=self.n_sites,
        )


def equations_of_motion(state: LatticeState, dom: float, p: ArrayParams, boundary=Boundary.PERIODIC, frame_shift: float = 0.0):
    """Time derivatives ``(da/dt, db/dt)`` at detuning ``dom``."""
    if state.n_sites != p.n_sites:
        raise ValueError(f"state has {state.n_sites} sites but params expect {p.n_sites}")
    a, b = state.photon_amp, state.phonon_amp
    hop = np.zeros_like(a)
    hop[1:] += a[:-1]
    hop[:-1] += a[1:]
    if Boundary(boundary) is Boundary.PERIODIC:
        hop[0] += a[-1]
        hop[-1] += a[0]
    diag_a = dom + p.omega_m - frame_shift
    diag_b = p.omega_m - frame_shift
    da = -1j * (diag_a * a + p.g_eff * b - p.hopping * hop)
    db = -1j * (diag_b * b + p.g_eff * a)
    return da, db


def rk4_step(state: LatticeState, protocol: DetuningProtocol, p: ArrayParams, dt: float, t0: float = 0.0,
             boundary=Boundary.PERIODIC, frame=Frame.MECHANICAL) -> LatticeState:
    """One RK4 step in plain numpy; ``t0`` is the protocol clock at the start of the step."""
    frame = Frame(frame)

    def f(s, t):
        dom = protocol.detuning(t)
        return equations_of_motion(s, dom, p, boundary, float(frame.shift(dom, p)))

    def shifted(da, db, h):
        return LatticeState(0.0, state.photon_amp + h * da, state.phonon_amp + h * db)

    k1 = f(state, t0)
    k2 = f(shifted(*k1, dt / 2), t0 + dt / 2)
    k3 = f(shifted(*k2, dt / 2), t0 + dt / 2)
    k4 = f(shifted(*k3, dt), t0 + dt)
    a = state.photon_amp + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    b = state.phonon_amp + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return LatticeState(state.time + dt, a, b)


@njit(cache=True)
def _deriv(a, b, da, db, diag_a, diag_b, g, G, periodic):
    n = a.shape[0]
    for j in range(n):
        left = a[j - 1] if j > 0 else (a[n - 1] if periodic else 0j)
        right = a[j + 1] if j < n - 1 else (a[0] if periodic else 0j)
        da[j] = -1j * (diag_a * a[j] + g * b[j] - G * (left + right))
        db[j] = -1j * (diag_b * b[j] + g * a[j])


@njit(cache=True)
def _rk4_run(a, b, diag_a, diag_b, g, G, periodic, dt, n_steps):
    """Advance ``a, b`` in place; ``diag_*[i]`` hold the diagonals at ``t0 + i dt / 2``."""
    n = a.shape[0]
    k1a = np.empty(n, np.complex128)
    k1b = np.empty(n, np.complex128)
    k2a = np.empty(n, np.complex128)
    k2b = np.empty(n, np.complex128)
    k3a = np.empty(n, np.complex128)
    k3b = np.empty(n, np.complex128)
    k4a = np.empty(n, np.complex128)
    k4b = np.empty(n, np.complex128)
    ta = np.empty(n, np.complex128)
    tb = np.empty(n, np.complex128)
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for step in range(n_steps):
        i = 2 * step
        _deriv(a, b, k1a, k1b, diag_a[i], diag_b[i], g, G, periodic)
        for j in range(n):
            ta[j] = a[j] + h2 * k1a[j]
            tb[j] = b[j] + h2 * k1b[j]
        _deriv(ta, tb, k2a, k2b, diag_a[i + 1], diag_b[i + 1], g, G, periodic)
        for j in range(n):
            ta[j] = a[j] + h2 * k2a[j]
            tb[j] = b[j] + h2 * k2b[j]
        _deriv(ta, tb, k3a, k3b, diag_a[i + 1], diag_b[i + 1], g, G, periodic)
        for j in range(n):
            ta[j] = a[j] + dt * k3a[j]
            tb[j] = b[j] + dt * k3b[j]
        _deriv(ta, tb, k4a, k4b, diag_a[i + 2], diag_b[i + 2], g, G, periodic)
        for j in range(n):
            a[j] += h6 * (k1a[j] + 2.0 * k2a[j] + 2.0 * k3a[j] + k4a[j])
            b[j] += h6 * (k1b[j] + 2.0 * k2b[j] + 2.0 * k3b[j] + k4b[j])


def init_gaussian_pulse(p: ArrayParams, center: float, k0: float = np.pi / 2, sigma: float = 16.0) -> LatticeState:
    """Normalized photonic Gaussian ``exp(-(j - j0)^2 / 4 sigma^2 + i k0 L j)``; phonons empty.

    ``sigma = 0`` puts the whole excitation on site ``center``.
    """
    n = p.n_sites
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if 3.0 * sigma >= n / 2.0:
        raise ValueError(f"pulse too wide for lattice: 3 sigma = {3 * sigma} >= N/2 = {n / 2}")
    kl = k0 * p.spacing
    if not -np.pi <= kl <= np.pi:
        raise ValueError(f"carrier k0 L = {kl} lies outside the first Brillouin zone [-pi, pi]")
    j = np.arange(n)
    if sigma == 0:
        if center != int(center) or not 0 <= center < n:
            raise ValueError("a delta pulse needs an integer site index inside the lattice")
        a = np.zeros(n, dtype=complex)
        a[int(center)] = np.exp(1j * kl * center)
    else:
        a = np.exp(-((j - center) ** 2) / (4.0 * sigma**2) + 1j * kl * j)
    a /= np.sqrt(np.vdot(a, a).real)
    return LatticeState(0.0, a, np.zeros(n, dtype=complex))


def mode_fractions(state: LatticeState) -> tuple[float, float]:
    """Photon and phonon shares of the total excitation number."""
    na = float(np.vdot(state.photon_amp, state.photon_amp).real)
    nb = float(np.vdot(state.phonon_amp, state.phonon_amp).real)
    total = na + nb
    if total == 0:
        raise ValueError("zero-norm state has no mode fractions")
    return na / total, nb / total


def _bloch_amplitudes(state: LatticeState):
    # A_k = N^{-1/2} sum_j a_j exp(i k j L) with k_n = 2 pi n / (N L)
    n = state.n_sites
    return np.sqrt(n) * np.fft.ifft(state.photon_amp), np.sqrt(n) * np.fft.ifft(state.phonon_amp)


def branch_populations(state: LatticeState, p: ArrayParams) -> tuple[float, float]:
    """Occupations of the lower and upper polariton branches (periodic lattice)."""
    n = state.n_sites
    ak, bk = _bloch_amplitudes(state)
    k = 2.0 * np.pi * np.arange(n) / (n * p.spacing)
    u, v = bogoliubov_coefficients(k, p)
    lower = u * ak + v * bk
    upper = -v * ak + u * bk
    return float(np.sum(np.abs(lower) ** 2)), float(np.sum(np.abs(upper) ** 2))


def project_branch(state: LatticeState, p: ArrayParams, branch: Branch) -> LatticeState:
    """Keep only the part of ``state`` that lives in one polariton branch (periodic lattice)."""
    n = state.n_sites
    ak, bk = _bloch_amplitudes(state)
    k = 2.0 * np.pi * np.arange(n) / (n * p.spacing)
    u, v = bogoliubov_coefficients(k, p)
    if Branch(branch) is Branch.LOWER:
        ex, ey = u, v
    else:
        ex, ey = -v, u
    amp = ex * ak + ey * bk
    a = np.fft.fft(ex * amp) / np.sqrt(n)
    b = np.fft.fft(ey * amp) / np.sqrt(n)
    return LatticeState(state.time, a, b)


def _position_stats(w: np.ndarray, boundary: Boundary):
    n = len(w)
    total = w.sum()
    j = np.arange(n)
    if boundary is Boundary.PERIODIC:
        z = np.sum(w * np.exp(2j * np.pi * j / n)) / total
        c = (np.angle(z) % (2 * np.pi)) * n / (2 * np.pi)
        d = (j - c + n / 2) % n - n / 2
    else:
        c = float(np.sum(w * j) / total)
        d = j - c
    width = math.sqrt(float(np.sum(w * d * d) / total))
    return float(c), width


def _sample(state: LatticeState, boundary: Boundary):
    na = np.abs(state.photon_amp) ** 2
    nb = np.abs(state.phonon_amp) ** 2
    total = float(na.sum() + nb.sum())
    # a non-finite state is reported by evolve; sample it quietly
    with np.errstate(invalid="ignore", divide="ignore"):
        c, width = _position_stats(na + nb, boundary)
    return total, float(na.sum()) / total, float(nb.sum()) / total, c, width


def max_frequency(protocol: DetuningProtocol, p: ArrayParams, frame=Frame.MECHANICAL) -> float:
    """Largest eigenfrequency magnitude seen in ``frame`` during the protocol."""
    frame = Frame(frame)
    doms = np.array([protocol.initial_dom, protocol.final_dom])
    out = 0.0
    for dom in doms:
        q = p.with_detuning(dom)
        shift = float(frame.shift(dom, p))
        for kl in (0.0, np.pi):
            for w in polariton_frequencies(kl / p.spacing, q):
                out = max(out, abs(w - shift))
    return out


def evolve(state: LatticeState, protocol: DetuningProtocol, p: ArrayParams, dt: float, t_end: float | None = None,
           sample_every: int = 100, boundary=Boundary.PERIODIC, frame=Frame.MECHANICAL):
    """Integrate the amplitudes through ``protocol`` with fixed-step RK4.

    The protocol clock starts at zero when this call starts; ``t_end``
    defaults to the protocol duration. The step is shrunk slightly so an
    integer number of steps lands exactly on ``t_end``.

    Returns
    -------
    trace : PropagationTrace
        Observables every ``sample_every`` steps, plus the first and last state.
    final : LatticeState

    Raises
    ------
    UnstableStepError
        If ``dt`` times the largest eigenfrequency exceeds 0.05.
    IntegrationError
        If the amplitudes stop being finite; carries the partial trace.
    """
    boundary = Boundary(boundary)
    frame = Frame(frame)
    if state.n_sites != p.n_sites:
        raise ValueError(f"state has {state.n_sites} sites but params expect {p.n_sites}")
    if boundary is Boundary.PERIODIC and p.n_sites < 3:
        raise ValueError("periodic boundary requires n_sites >= 3")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    t_end = protocol.duration if t_end is None else float(t_end)
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    n_steps = max(1, math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    h = t_end / n_steps if n_steps else dt
    w_max = max_frequency(protocol, p, frame)
    if h * w_max > STABILITY_MARGIN:
        raise UnstableStepError(
            f"dt = {h:.3e} with max |omega| = {w_max:.4g} gives dt*omega = {h * w_max:.3g} > {STABILITY_MARGIN}"
        )

    a = state.photon_amp.astype(np.complex128).copy()
    b = state.phonon_amp.astype(np.complex128).copy()
    t_start = state.time
    samples = [(t_start,) + _sample(state, boundary)]
    periodic = boundary is Boundary.PERIODIC

    def build_trace():
        cols = list(zip(*samples))
        c = np.asarray(cols[4])
        if periodic and len(c) > 1:
            c = np.unwrap(c * 2 * np.pi / p.n_sites) * p.n_sites / (2 * np.pi)
        return PropagationTrace(cols[0], cols[1], cols[2], cols[3], c, cols[5], n_sites=p.n_sites)

    done = 0
    while done < n_steps:
        chunk = min(sample_every, n_steps - done)
        tau = (done + 0.5 * np.arange(2 * chunk + 1)) * h
        dom = protocol.detuning(tau)
        shift = frame.shift(dom, p)
        diag_a = np.ascontiguousarray(np.broadcast_to(dom + p.omega_m - shift, tau.shape), dtype=float)
        diag_b = np.ascontiguousarray(np.broadcast_to(p.omega_m - shift, tau.shape), dtype=float)
        _rk4_run(a, b, diag_a, diag_b, float(p.g_eff), float(p.hopping), periodic, h, chunk)
        done += chunk
        current = LatticeState(t_start + done * h, a, b)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise IntegrationError(f"non-finite amplitudes at t = {current.time:.6g}", partial_trace=build_trace())
        samples.append((current.time,) + _sample(current, boundary))

    return build_trace(), LatticeState(t_start + n_steps * h, a.copy(), b.copy())


def adiabaticity_metric(protocol: DetuningProtocol, p: ArrayParams, squared: bool = True, n_time: int = 4001) -> float:
    """Largest ``|d detuning/dt| / gap^2`` over the ramp and the Brillouin zone.

    With ``squared=False`` the plain ``rate / gap`` ratio is returned instead.
    The gap minimized over ``k`` at detuning ``D`` is
    ``sqrt(4 g^2 + max(0, |D| - 2G)^2)``.
    """
    if not protocol.t_ramp > 0:
        raise ValueError("adiabaticity is defined for ramps with t_ramp > 0")
    t = protocol.t_hold_pre + protocol.t_ramp * np.linspace(0.0, 1.0, n_time)
    dom = np.atleast_1d(protocol.detuning(t))
    rate = np.abs(np.atleast_1d(protocol.rate(t)))
    excess = np.maximum(0.0, np.abs(dom) - 2.0 * p.hopping)
    gap = np.hypot(2.0 * p.g_eff, excess)
    power = 2 if squared else 1
    with np.errstate(divide="ignore"):
        ratio = np.where(rate == 0, 0.0, rate / gap**power)
    return float(np.max(ratio))


def envelope_fidelity(state: LatticeState, reference: LatticeState, boundary=Boundary.PERIODIC) -> tuple[float, int]:
    """Best ``|<reference|state>|^2`` over integer site translations.

    Both states are normalized first; the global phase drops out of the
    modulus. Returns ``(fidelity, shift)`` with ``state`` best matched by
    ``reference`` moved ``shift`` sites forward.
    """
    n = state.n_sites
    periodic = Boundary(boundary) is Boundary.PERIODIC
    size = n if periodic else 2 * n
    corr = np.zeros(size, dtype=complex)
    for x, y in ((state.photon_amp, reference.photon_amp), (state.phonon_amp, reference.phonon_amp)):
        fx = np.fft.fft(x, size)
        fy = np.fft.fft(y, size)
        corr += np.fft.ifft(fx * np.conj(fy))
    fid = np.abs(corr) ** 2 / (state.norm * reference.norm)
    s = int(np.argmax(fid))
    shift = s if s <= size // 2 else s - size
    return float(fid[s]), shift


def effective_transport_time(protocols, p: ArrayParams, k0: float) -> float:
    """Time a pulse held at the first protocol's start detuning needs to cover the same distance.

    Each instant is weighted by the analytic lower-branch group velocity at
    the carrier relative to its starting value. A stopped hold then counts
    as (almost) nothing and a linear ramp between symmetric detunings as
    roughly half its duration.
    """
    protocols = list(protocols)
    v0 = group_velocity(Branch.LOWER, k0, p.with_detuning(protocols[0].initial_dom))
    if v0 == 0:
        return float(sum(pr.duration for pr in protocols))

    def weight(dom):
        return group_velocity(Branch.LOWER, k0, p.with_detuning(dom)) / v0

    total = 0.0
    for pr in protocols:
        total += pr.t_hold_pre * weight(pr.initial_dom) + pr.t_hold_post * weight(pr.final_dom)
        if pr.t_ramp > 0:
            val, _ = integrate.quad(lambda t: weight(pr.detuning(t)), pr.t_hold_pre, pr.ramp_end, epsabs=1e-13, epsrel=1e-12, limit=200)
            total += val
    return float(total)


def nominal_transport_time(stop: DetuningProtocol, release: DetuningProtocol) -> float:
    """Total time minus the stopped hold, ramps counted at half weight."""
    return stop.t_hold_pre + release.t_hold_post + 0.5 * (stop.t_ramp + release.t_ramp)


@dataclass
class StopReleaseReport:
    v_initial: float
    v_held: float
    phonon_fraction_held: float
    v_released: float
    release_fidelity: float
    fidelity_shift: int
    adiabaticity_metric: float
    rate_over_gap: float
    v_group_analytic: float
    effective_transport_time: float
    nominal_transport_time: float
    max_norm_drift: float
    trace: PropagationTrace
    final_state: LatticeState
    reference_state: LatticeState

    def summary(self) -> dict:
        keys = (
            "v_initial", "v_held", "phonon_fraction_held", "v_released", "release_fidelity", "fidelity_shift",
            "adiabaticity_metric", "rate_over_gap", "v_group_analytic", "effective_transport_time",
            "nominal_transport_time", "max_norm_drift",
        )
        return {k: getattr(self, k) for k in keys}


def _protocol_metric(pr: DetuningProtocol, p: ArrayParams, squared: bool) -> float:
    if pr.t_ramp > 0:
        return adiabaticity_metric(pr, p, squared=squared)
    return 0.0 if pr.initial_dom == pr.final_dom else math.inf


def run_stop_release(p: ArrayParams, pulse: PulseSpec, stop_protocol: DetuningProtocol,
                     release_protocol: DetuningProtocol | None = None, dt: float = 2.5e-4,
                     sample_every: int = 400, boundary=Boundary.PERIODIC, frame=Frame.MIDBAND) -> StopReleaseReport:
    """Slow a pulse to a halt, hold it as phonons, and release it again.

    The release protocol defaults to the mirror image of ``stop_protocol``.
    Velocities are centroid slopes over the leading hold (``v_initial``), the
    stopped hold (``v_held``) and the trailing hold of the release
    (``v_released``). The released state is compared with the same pulse
    propagated at the initial detuning for :func:`effective_transport_time`.
    """
    boundary = Boundary(boundary)
    release = stop_protocol.mirrored() if release_protocol is None else release_protocol
    if release.initial_dom != stop_protocol.final_dom:
        raise ValueError("release protocol must start at the detuning where the stop protocol ends")
    if 6.0 * pulse.sigma >= p.n_sites:
        raise ValueError("lattice too short: the pulse would overlap its own periodic image")

    metric = max(_protocol_metric(stop_protocol, p, True), _protocol_metric(release, p, True))
    literal = max(_protocol_metric(stop_protocol, p, False), _protocol_metric(release, p, False))
    if metric > ADIABATIC_THRESHOLD:
        warnings.warn(f"ramp is not adiabatic: rate/gap^2 = {metric:.3g} > {ADIABATIC_THRESHOLD}", AdiabaticityWarning, stacklevel=2)

    state0 = init_gaussian_pulse(p, pulse.center, pulse.k0, pulse.sigma)
    opts = dict(sample_every=sample_every, boundary=boundary, frame=frame)
    trace_stop, held = evolve(state0, stop_protocol, p, dt, **opts)
    trace_rel, final = evolve(held, release, p, dt, **opts)
    trace = trace_stop.extend(trace_rel)

    t_stop = stop_protocol.duration
    v_initial = trace.velocity_between(0.0, stop_protocol.t_hold_pre)
    hold = (stop_protocol.ramp_end, t_stop)
    v_held = trace.velocity_between(*hold)
    phonon_held = float(np.mean(trace.phonon_fraction[trace.window(*hold)]))
    v_released = trace.velocity_between(t_stop + release.ramp_end, t_stop + release.duration)

    t_eff = effective_transport_time([stop_protocol, release], p, pulse.k0)
    reference_protocol = DetuningProtocol.constant(stop_protocol.initial_dom, t_eff)
    _, reference = evolve(state0, reference_protocol, p, dt, **opts)
    fidelity, shift = envelope_fidelity(final, reference, boundary)

    return StopReleaseReport(
        v_initial=v_initial,
        v_held=v_held,
        phonon_fraction_held=phonon_held,
        v_released=v_released,
        release_fidelity=fidelity,
        fidelity_shift=shift,
        adiabaticity_metric=metric,
        rate_over_gap=literal,
        v_group_analytic=float(group_velocity(Branch.LOWER, pulse.k0, p.with_detuning(stop_protocol.initial_dom))),
        effective_transport_time=t_eff,
        nominal_transport_time=nominal_transport_time(stop_protocol, release),
        max_norm_drift=trace.max_norm_drift,
        trace=trace,
        final_state=final,
        reference_state=reference,
    )
