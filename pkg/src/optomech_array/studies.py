"""Study runners behind the command-line tool; each returns a :class:`ResultTable`."""
from __future__ import annotations

import numpy as np

from . import __version__
from .config import Command, RunConfig
from .dynamics import (
    TRACE_COLUMNS,
    DetuningProtocol,
    NumericalError,
    evolve,
    init_gaussian_pulse,
    run_stop_release,
)
from .model import (
    Branch,
    band_table,
    bandwidths,
    bogoliubov_coefficients,
    group_velocity,
    min_band_gap,
    band_gap,
)
from .oracle import finite_difference_velocity
from .results import ResultTable

__all__ = [
    "run_bands",
    "run_bandwidth_sweep",
    "run_velocity_sweep",
    "run_mixing_sweep",
    "run_gap_sweep",
    "run_propagate",
    "run_stop_release_study",
    "run_command",
    "FD_TOLERANCE",
]

FD_TOLERANCE = 1e-6


def _units(cfg: RunConfig) -> str:
    p = cfg.params
    if p.hopping == 1.0 and p.spacing == 1.0:
        return "frequencies in units of G, lengths in units of L"
    return f"frequencies in input units (G = {p.hopping!r}), lengths in input units (L = {p.spacing!r})"


def base_metadata(cfg: RunConfig) -> dict:
    return {
        "tool": "optomech-array",
        "version": __version__,
        "units": _units(cfg),
        "config": cfg.resolved(),
    }


def sweep_values(cfg: RunConfig) -> np.ndarray:
    s = cfg.sweep
    return np.linspace(s.start, s.stop, s.points)


def run_bands(cfg: RunConfig) -> ResultTable:
    p = cfg.params
    pts = band_table(p, cfg.n_k)
    cols = ["k", "kL", "omega_ph", "omega_c", "omega_d", "u", "v", "vg_c", "vg_d", "gap"]
    rows = [[b.k, b.k * p.spacing, b.omega_ph, b.omega_c, b.omega_d, b.u, b.v, b.vg_c, b.vg_d, b.gap] for b in pts]
    summary = bandwidths(p)
    meta = base_metadata(cfg)
    meta["summary"] = {
        "width_lower": summary.width_lower,
        "width_upper": summary.width_upper,
        "delta_shift": summary.delta_shift,
        "min_gap": summary.min_gap,
        "argmin_kL": summary.argmin_kl,
    }
    return ResultTable(cols, rows, meta)


def run_bandwidth_sweep(cfg: RunConfig) -> ResultTable:
    rows = []
    for dom in sweep_values(cfg):
        s = bandwidths(cfg.params.with_detuning(dom))
        rows.append([dom, s.width_lower, s.width_upper, s.delta_shift, s.min_gap])
    cols = ["detuning_om", "width_lower", "width_upper", "delta_shift", "min_gap"]
    return ResultTable(cols, rows, base_metadata(cfg))


def run_velocity_sweep(cfg: RunConfig) -> ResultTable:
    p = cfg.params
    k = cfg.sweep.k / p.spacing
    rows = []
    for dom in sweep_values(cfg):
        q = p.with_detuning(dom)
        vc = group_velocity(Branch.LOWER, k, q)
        vc_fd = finite_difference_velocity(Branch.LOWER, k, q, h=1e-5 / p.spacing)
        vd = group_velocity(Branch.UPPER, k, q)
        if abs(vc - vc_fd) > FD_TOLERANCE * p.hopping * p.spacing:
            raise NumericalError(f"analytic and finite-difference velocities disagree at detuning {dom}: {vc} vs {vc_fd}")
        rows.append([dom, vc, vc_fd, vd])
    meta = base_metadata(cfg)
    gl = p.hopping * p.spacing
    meta["flags"] = {
        "lower_velocity_ceiling": {
            "max_v_c_over_GL": max(r[1] for r in rows) / gl,
            "limit_for_large_negative_detuning_over_GL": 2.0 * abs(np.sin(cfg.sweep.k)),
            "note": "far below resonance v_c at fixed k tends to 2 GL sin(kL), the bare photon velocity",
        }
    }
    return ResultTable(["detuning_om", "v_c_analytic", "v_c_fd", "v_d_analytic"], rows, meta)


def run_mixing_sweep(cfg: RunConfig) -> ResultTable:
    p = cfg.params
    k = cfg.sweep.k / p.spacing
    rows = []
    for dom in sweep_values(cfg):
        u, v = bogoliubov_coefficients(k, p.with_detuning(dom))
        # amplitudes: the eigenvector sign of v is a convention
        rows.append([dom, abs(u), abs(v), u * u, v * v])
    meta = base_metadata(cfg)
    meta["columns_note"] = "u and v are mixing magnitudes |u|, |v| of the lower polariton"
    return ResultTable(["detuning_om", "u", "v", "u2", "v2"], rows, meta)


def run_gap_sweep(cfg: RunConfig) -> ResultTable:
    p = cfg.params
    k = cfg.sweep.k / p.spacing
    rows = []
    for dom in sweep_values(cfg):
        q = p.with_detuning(dom)
        gmin, argmin = min_band_gap(q)
        rows.append([dom, gmin, argmin, band_gap(k, q)])
    meta = base_metadata(cfg)
    two_g = 2.0 * p.g_eff
    meta["flags"] = {
        "minimum_gap": {
            "min_gap": min(r[1] for r in rows),
            "two_g_eff": two_g,
            "two_hopping": 2.0 * p.hopping,
            "equals_2G": bool(abs(two_g - 2.0 * p.hopping) <= 1e-12 * max(1.0, two_g)),
            "note": "the direct gap is bounded below by 2 g_eff, which differs from 2G unless g_eff = G",
        }
    }
    return ResultTable(["detuning_om", "min_gap", "argmin_kL", "gap_at_k"], rows, meta)


def _trace_table(trace, meta, report) -> ResultTable:
    return ResultTable(list(TRACE_COLUMNS), trace.rows(), meta, report)


def run_propagate(cfg: RunConfig) -> ResultTable:
    p, pulse, run = cfg.params, cfg.pulse, cfg.run
    protocol = cfg.protocol
    if protocol is None:
        protocol = DetuningProtocol.constant(p.detuning_om, run.t_end)
    state = init_gaussian_pulse(p, pulse.center, pulse.k0, pulse.sigma)
    trace, _ = evolve(state, protocol, p, run.dt, t_end=run.t_end, sample_every=run.sample_every,
                      boundary=run.boundary, frame=run.frame)
    q = p.with_detuning(protocol.initial_dom)
    report = {
        "max_norm_drift": trace.max_norm_drift,
        "v_group_analytic": group_velocity(Branch.LOWER, pulse.k0, q),
        "v_measured": float(np.polyfit(trace.time, trace.centroid, 1)[0]) if len(trace) > 1 else 0.0,
        "final_photon_fraction": float(trace.photon_fraction[-1]),
        "final_phonon_fraction": float(trace.phonon_fraction[-1]),
    }
    return _trace_table(trace, base_metadata(cfg), report)


def run_stop_release_study(cfg: RunConfig) -> ResultTable:
    run = cfg.run
    rep = run_stop_release(cfg.params, cfg.pulse, cfg.protocol, cfg.release, dt=run.dt,
                           sample_every=run.sample_every, boundary=run.boundary, frame=run.frame)
    return _trace_table(rep.trace, base_metadata(cfg), rep.summary())


RUNNERS = {
    Command.BANDS: run_bands,
    Command.BANDWIDTH_SWEEP: run_bandwidth_sweep,
    Command.VELOCITY_SWEEP: run_velocity_sweep,
    Command.MIXING_SWEEP: run_mixing_sweep,
    Command.GAP_SWEEP: run_gap_sweep,
    Command.PROPAGATE: run_propagate,
    Command.STOP_RELEASE: run_stop_release_study,
}


def run_command(cfg: RunConfig) -> ResultTable:
    return RUNNERS[cfg.command](cfg)
