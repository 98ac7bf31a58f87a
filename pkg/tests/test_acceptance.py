"""Acceptance criteria, one test each; every test records a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, RUN_SECONDS, stop_release
from optomech_array.config import parse_config
from optomech_array.dynamics import DetuningProtocol, Frame, evolve, init_gaussian_pulse
from optomech_array.model import ArrayParams, polariton_frequencies, refractive_index_shift
from optomech_array.oracle import Boundary, eigen_hermitian, kspace_block, realspace_hamiltonian
from optomech_array.studies import run_command

DETUNINGS = (-100.0, -10.0, 0.0, 10.0, 100.0)


def record(n: int, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def sweep(command: str, start: float, stop: float, points: int):
    text = f"command = {command}\n[sweep]\nstart = {start}\nstop = {stop}\npoints = {points}\n"
    return run_command(parse_config(text))


def test_criterion_1_spectral_equivalence():
    t0 = time.perf_counter()
    k = 2 * np.pi * np.arange(128) / 128
    err_block = 0.0
    err_real = 0.0
    for dom in DETUNINGS:
        p = ArrayParams(n_sites=64, detuning_om=dom)
        lo, hi = polariton_frequencies(k, p)
        for j, kj in enumerate(k):
            ev = eigen_hermitian(kspace_block(kj, p)).values
            err_block = max(err_block, abs(ev[0] - lo[j]), abs(ev[1] - hi[j]))
        kn = 2 * np.pi * np.arange(64) / 64
        union = np.sort(np.concatenate(polariton_frequencies(kn, p)))
        ev = eigen_hermitian(realspace_hamiltonian(p, Boundary.PERIODIC)).values
        err_real = max(err_real, float(np.max(np.abs(ev - union))))
    elapsed = time.perf_counter() - t0
    ok = err_block < 1e-10 and err_real < 1e-9 and elapsed < 5.0
    record(1, ok, f"2x2 blocks max err {err_block:.2e} (<1e-10), real space max err {err_real:.2e} (<1e-9), {elapsed:.2f} s (<5 s)")


def test_criterion_2_bandwidth_sweep():
    t0 = time.perf_counter()
    t = sweep("bandwidth-sweep", -200, 200, 401)
    elapsed = time.perf_counter() - t0
    x, wc, wd = t.column("detuning_om"), t.column("width_lower"), t.column("width_upper")
    mid = int(np.flatnonzero(x == 0.0)[0])
    monotone = bool(np.all(np.diff(wc) <= 0))
    closure = float(np.max(np.abs(wc + wd - 4.0)))
    ok = (
        monotone
        and abs(wc[0] - 4.0) <= 0.01 * 4.0
        and wc[mid] == 2.0
        and wc[-1] < 0.05
        and closure <= 1e-12
        and elapsed < 1.0
    )
    record(
        2, ok,
        f"monotone={monotone}, W_C(-200)={wc[0]:.6f}, W_C(0)={float(wc[mid])!r}, W_C(200)={wc[-1]:.2e}, "
        f"closure err {closure:.1e}, {elapsed:.3f} s",
    )


def test_criterion_3_velocity_sweep():
    t0 = time.perf_counter()
    t = sweep("velocity-sweep", -100, 100, 201)
    elapsed = time.perf_counter() - t0
    v, fd = t.column("v_c_analytic"), t.column("v_c_fd")
    decreasing = bool(np.all(np.diff(v) < 0))
    fd_err = float(np.max(np.abs(v - fd)))
    ok = decreasing and v[-1] < 0.005 and fd_err < 1e-6 and elapsed < 1.0
    record(3, ok, f"strictly decreasing={decreasing}, v_C(100)={v[-1]:.5f} GL, max |analytic - fd| {fd_err:.1e}, {elapsed:.3f} s")


def test_criterion_4_mixing_sweep():
    t0 = time.perf_counter()
    t = sweep("mixing-sweep", -100, 100, 201)
    elapsed = time.perf_counter() - t0
    u2, v2 = t.column("u2"), t.column("v2")
    norm_err = float(np.max(np.abs(u2 + v2 - 1)))
    ok = norm_err <= 1e-12 and v2[0] < 0.01 and v2[-1] > 0.99 and elapsed < 1.0
    record(4, ok, f"max |u^2+v^2-1| {norm_err:.1e}, v^2(-100)={v2[0]:.5f}, v^2(100)={v2[-1]:.5f}, {elapsed:.3f} s")


def test_criterion_5_gap_sweep():
    t0 = time.perf_counter()
    t = sweep("gap-sweep", -100, 100, 201)
    wide = sweep("gap-sweep", -1000, 1000, 2001)
    elapsed = time.perf_counter() - t0
    x, gap = t.column("detuning_om"), t.column("min_gap")
    at0 = float(gap[x == 0.0][0])
    # the k-minimized gap is flat at 2 g_eff for |detuning| <= 2G, so zero is one of several minimizers
    plateau = x[np.abs(gap - gap.min()) <= 1e-12]
    xw, gw = wide.column("detuning_om"), wide.column("min_gap")
    slope_left = (gw[1] - gw[0]) / (xw[1] - xw[0])
    slope_right = (gw[-1] - gw[-2]) / (xw[-1] - xw[-2])
    flag = t.metadata["flags"]["minimum_gap"]
    ok = (
        abs(at0 - gap.min()) <= 1e-12
        and abs(at0 - 10.0) < 1e-12
        and abs(slope_left + 1) < 1e-3
        and abs(slope_right - 1) < 1e-3
        and flag["equals_2G"] is False
        and elapsed < 1.0
    )
    record(
        5, ok,
        f"min gap at detuning 0 = {at0:.12g} = sweep minimum (= 2 g_eff, attained on [{plateau[0]:g}, {plateau[-1]:g}]), "
        f"slopes {slope_left:+.5f}/{slope_right:+.5f}, flag equals_2G={flag['equals_2G']}, {elapsed:.3f} s",
    )


def _oracle_runs(frame=Frame.MIDBAND):
    out = []
    for dom in (0.0, -10.0):
        p = ArrayParams(n_sites=64, detuning_om=dom)
        s0 = init_gaussian_pulse(p, 20, np.pi / 2, 4.0)
        trace, final = evolve(s0, DetuningProtocol.constant(dom, 50.0), p, 1e-3, sample_every=500, frame=frame)
        out.append((p, s0, trace, final, float(frame.shift(dom, p))))
    return out


def _oracle_error(frame):
    worst = 0.0
    for p, s0, _, final, shift in _oracle_runs(frame):
        dec = eigen_hermitian(realspace_hamiltonian(p, Boundary.PERIODIC))
        v = dec.vectors
        exact = v @ (np.exp(-1j * (dec.values - shift) * 50.0) * (v.conj().T @ s0.vector()))
        worst = max(worst, float(np.linalg.norm(final.vector() - exact)))
    return worst


def test_criterion_7_oracle_dynamics():
    t0 = time.perf_counter()
    worst = _oracle_error(Frame.MIDBAND)
    elapsed = time.perf_counter() - t0
    mech = _oracle_error(Frame.MECHANICAL)
    ok = worst < 1e-7 and elapsed < 30.0
    record(
        7, ok,
        f"max state distance to exact propagation {worst:.2e} (<1e-7) at detuning 0 and -10 in the default "
        f"midband frame ({mech:.2e} in the mechanical frame), {elapsed:.2f} s (<30 s)",
    )


def test_criterion_8_stop_release():
    rep = stop_release(200.0)
    half = stop_release(100.0)
    seconds = RUN_SECONDS.get((200.0, 20.0, 50.0), 0.0) + RUN_SECONDS.get((100.0, 20.0, 50.0), 0.0)
    v_err = abs(rep.v_initial - rep.v_group_analytic) / rep.v_group_analytic
    checks = {
        "transport": v_err < 0.03,
        "held": rep.v_held < 0.01 * rep.v_initial,
        "phonon": rep.phonon_fraction_held > 0.97,
        "fidelity": rep.release_fidelity > 0.95,
        "trend": half.release_fidelity < rep.release_fidelity,
        "runtime": seconds < 300.0,
    }
    record(
        8, all(checks.values()),
        f"v_initial {rep.v_initial:.5f} vs v_g {rep.v_group_analytic:.5f} ({100 * v_err:.2f}%), "
        f"v_held/v_initial {rep.v_held / rep.v_initial:.4f}, phonon held {rep.phonon_fraction_held:.4f}, "
        f"fidelity {rep.release_fidelity:.6f} (t_ramp 200) vs {half.release_fidelity:.6f} (t_ramp 100), "
        f"{seconds:.0f} s; failed: {[k for k, v in checks.items() if not v] or 'none'}",
    )


def test_criterion_6_norm_conservation():
    drifts = [run[2].max_norm_drift for run in _oracle_runs()]
    for t_ramp in (200.0, 100.0):
        rep = stop_release(t_ramp)
        drifts.append(rep.max_norm_drift)
        drifts.append(abs(rep.reference_state.norm - 1))
    worst = max(drifts)
    record(6, worst < 1e-6, f"max |norm - 1| over {len(drifts)} propagation runs {worst:.2e} (<1e-6)")


def test_criterion_9_index_shift():
    r = refractive_index_shift(2 * math.pi * 200e12, 2 * math.pi * 10e9)
    ok = r == pytest.approx(5e-5, rel=1e-12) and 1e-5 <= r < 1e-4
    record(9, ok, f"dn/n = {r:.3e} (order 1e-5)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
