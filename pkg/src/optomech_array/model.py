"""Closed-form polariton physics of a coupled optomechanical crystal array.

Every frequency is an angular frequency with hbar = 1. The default unit
system measures frequencies in units of the intercavity hopping ``G`` and
lengths in units of the cell spacing ``L``.

Functions taking ``k`` accept scalars or numpy arrays and broadcast.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ArrayParams",
    "BareParams",
    "Branch",
    "BandPoint",
    "BandSummary",
    "derive_effective_params",
    "photon_dispersion",
    "polariton_frequencies",
    "bogoliubov_coefficients",
    "group_velocity",
    "band_gap",
    "min_band_gap",
    "bandwidths",
    "band_table",
    "refractive_index_shift",
]


@dataclass(frozen=True)
class ArrayParams:
    """Static description of the lattice.

    ``detuning_om`` is the optomechanical detuning ``delta_eff - omega_m``;
    the effective cavity detuning is recovered by :attr:`delta_eff`.
    """

    n_sites: int = 64
    spacing: float = 1.0
    omega_m: float = 100.0
    g_eff: float = 5.0
    hopping: float = 1.0
    detuning_om: float = -100.0

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites!r}")
        if not self.hopping > 0:
            raise ValueError(f"hopping must be > 0, got {self.hopping!r}")
        if not self.g_eff >= 0:
            raise ValueError(f"g_eff must be >= 0, got {self.g_eff!r}")
        if not self.omega_m > 0:
            raise ValueError(f"omega_m must be > 0, got {self.omega_m!r}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be > 0, got {self.spacing!r}")
        if not np.isfinite(self.detuning_om):
            raise ValueError(f"detuning_om must be finite, got {self.detuning_om!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))

    @property
    def delta_eff(self) -> float:
        return self.detuning_om + self.omega_m

    def with_detuning(self, detuning_om: float) -> "ArrayParams":
        return replace(self, detuning_om=float(detuning_om))

    def normalized(self) -> "ArrayParams":
        """Same lattice with frequencies in units of ``hopping`` and lengths in units of ``spacing``."""
        G = self.hopping
        return replace(
            self,
            spacing=1.0,
            omega_m=self.omega_m / G,
            g_eff=self.g_eff / G,
            hopping=1.0,
            detuning_om=self.detuning_om / G,
        )


@dataclass(frozen=True)
class BareParams:
    """Single-cell coupling and steady-state mean fields before linearization."""

    coupling_g: float
    detuning_delta: float
    mean_a: complex = 0.0
    mean_b: complex = 0.0


class Branch(enum.Enum):
    LOWER = "C"
    UPPER = "D"

    @property
    def sign(self) -> int:
        # sign in front of the square root
        return -1 if self is Branch.LOWER else 1


@dataclass(frozen=True)
class BandPoint:
    k: float
    omega_ph: float
    omega_c: float
    omega_d: float
    u: float
    v: float
    vg_c: float
    vg_d: float
    gap: float


@dataclass(frozen=True)
class BandSummary:
    width_lower: float
    width_upper: float
    delta_shift: float
    min_gap: float
    argmin_kl: float


def derive_effective_params(bare: BareParams) -> tuple[float, float]:
    """Return ``(g_eff, delta_eff)`` from the linearization around the mean fields.

    The phase of ``g <a>`` is absorbed into the photon operators, so the
    returned coupling is its magnitude.
    """
    g = bare.coupling_g
    mean_a = complex(bare.mean_a)
    mean_b = complex(bare.mean_b)
    vals = (g, bare.detuning_delta, mean_a.real, mean_a.imag, mean_b.real, mean_b.imag)
    if not all(np.isfinite(vals)):
        raise ValueError("bare parameters must be finite")
    delta_eff = bare.detuning_delta + g * mean_b.real
    g_eff = abs(g * mean_a)
    return float(g_eff), float(delta_eff)


def photon_dispersion(k, p: ArrayParams):
    """Bare CROW band ``delta_eff - 2 G cos(k L)``."""
    return p.delta_eff - 2.0 * p.hopping * np.cos(np.asarray(k) * p.spacing)


def _split(k, p: ArrayParams):
    # d = omega_ph - omega_m, r = sqrt(4 g^2 + d^2), s = d + r evaluated without cancellation
    w_ph = photon_dispersion(k, p)
    d = w_ph - p.omega_m
    g2 = p.g_eff * p.g_eff
    r = np.hypot(2.0 * p.g_eff, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(d >= 0, d + r, 4.0 * g2 / (r - d))
    s = np.where(r == 0, 0.0, s)
    return w_ph, d, r, s


def polariton_frequencies(k, p: ArrayParams):
    """Lower and upper polariton frequencies ``(omega_c, omega_d)``.

    Evaluated in a cancellation-free form, so ``g_eff = 0`` returns the bare
    bands exactly.
    """
    w_ph, d, r, s = _split(k, p)
    # r - d = 4 g^2 / s  when d >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(s == 0, 0.0, 2.0 * p.g_eff**2 / s)
    lower_if_pos = p.omega_m - t  # d >= 0: phonon-like lower band
    upper_if_pos = w_ph + t
    omega_c = np.where(d >= 0, lower_if_pos, w_ph - 0.5 * s)
    omega_d = np.where(d >= 0, upper_if_pos, p.omega_m + 0.5 * s)
    if np.ndim(omega_c) == 0:
        return float(omega_c), float(omega_d)
    return omega_c, omega_d


def bogoliubov_coefficients(k, p: ArrayParams):
    """Photon and phonon amplitudes ``(u, v)`` of the lower polariton.

    ``(u, v)`` is the normalized lower eigenvector of ``[[w_ph, g], [g, w_m]]``
    with ``u >= 0``. For positive coupling this makes ``v <= 0``; the mixing
    magnitudes are ``|u|`` and ``|v|``. With ``g_eff = 0`` the photon state is
    returned unless the phonon is strictly lower, which is the ``g -> 0+``
    limit of the coupled result.
    """
    w_ph, d, r, s = _split(k, p)
    if p.g_eff == 0:
        photon_lower = d <= 0
        u = np.where(photon_lower, 1.0, 0.0)
        v = np.where(photon_lower, 0.0, -1.0)
    else:
        # (g, -s/2) solves the first row of (M - omega_c) x = 0
        norm = np.hypot(p.g_eff, 0.5 * s)
        u = p.g_eff / norm
        v = -0.5 * s / norm
    if np.ndim(u) == 0:
        return float(u), float(v)
    return u, v


def group_velocity(branch: Branch, k, p: ArrayParams):
    """Exact ``d omega / dk`` of the chosen polariton branch."""
    _, d, r, _ = _split(k, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r == 0, 0.0, d / r)
    kl = np.asarray(k) * p.spacing
    vel = p.hopping * p.spacing * np.sin(kl) * (1.0 + branch.sign * ratio)
    if np.ndim(vel) == 0:
        return float(vel)
    return vel


def band_gap(k, p: ArrayParams):
    """Direct gap ``omega_d - omega_c`` at momentum ``k``."""
    _, _, r, _ = _split(k, p)
    if np.ndim(r) == 0:
        return float(r)
    return r


def min_band_gap(p: ArrayParams, n_grid: int = 4096) -> tuple[float, float]:
    """Minimum of the direct gap over the Brillouin zone.

    Returns ``(min_gap, argmin_kl)`` with ``argmin_kl`` in ``[0, pi]``. The
    dense grid is refined with the interior stationary point
    ``cos(kL) = detuning_om / 2G`` when it exists.
    """
    kl = np.linspace(0.0, np.pi, n_grid)
    candidates = list(kl)
    c = p.detuning_om / (2.0 * p.hopping)
    if abs(c) <= 1.0:
        candidates.append(float(np.arccos(c)))
    kl = np.array(candidates)
    gaps = band_gap(kl / p.spacing, p)
    i = int(np.argmin(gaps))
    return float(gaps[i]), float(kl[i])


def bandwidths(p: ArrayParams) -> BandSummary:
    """Bandwidths of both polariton branches and the minimum direct gap."""
    g, G, dom = p.g_eff, p.hopping, p.detuning_om
    shift = np.hypot(g, dom / 2.0 - G) - np.hypot(g, dom / 2.0 + G)
    min_gap, argmin_kl = min_band_gap(p)
    return BandSummary(
        # |shift| <= 2G analytically; clip round-off below zero
        width_lower=float(max(0.0, 2.0 * G + shift)),
        width_upper=float(max(0.0, 2.0 * G - shift)),
        delta_shift=float(shift),
        min_gap=min_gap,
        argmin_kl=argmin_kl,
    )


def band_table(p: ArrayParams, n_k: int) -> list[BandPoint]:
    """Sample both branches on ``k = 2 pi j / (L n_k)``, ``j = 0 .. n_k - 1``."""
    if int(n_k) != n_k or n_k < 2:
        raise ValueError(f"n_k must be an integer >= 2, got {n_k!r}")
    k = 2.0 * np.pi * np.arange(int(n_k)) / (p.spacing * n_k)
    w_ph = photon_dispersion(k, p)
    w_c, w_d = polariton_frequencies(k, p)
    u, v = bogoliubov_coefficients(k, p)
    vg_c = group_velocity(Branch.LOWER, k, p)
    vg_d = group_velocity(Branch.UPPER, k, p)
    gap = band_gap(k, p)
    return [
        BandPoint(
            k=float(k[j]),
            omega_ph=float(w_ph[j]),
            omega_c=float(w_c[j]),
            omega_d=float(w_d[j]),
            u=float(u[j]),
            v=float(v[j]),
            vg_c=float(vg_c[j]),
            vg_d=float(vg_d[j]),
            gap=float(gap[j]),
        )
        for j in range(len(k))
    ]


def refractive_index_shift(omega_c_hz: float, omega_m_hz: float) -> float:
    """Relative index change ``dn/n ~ omega_m / omega_c`` needed to sweep the detuning by ``~omega_m``."""
    if not (omega_c_hz > 0 and omega_m_hz > 0):
        raise ValueError("frequencies must be positive")
    return omega_m_hz / omega_c_hz
