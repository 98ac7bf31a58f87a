import functools
import time

import numpy as np

from optomech_array.dynamics import DetuningProtocol, PulseSpec, run_stop_release
from optomech_array.model import ArrayParams

CANONICAL = ArrayParams(n_sites=512, omega_m=100.0, g_eff=5.0, hopping=1.0, detuning_om=-100.0)
CANONICAL_PULSE = PulseSpec(center=64, k0=np.pi / 2, sigma=16)

RUN_SECONDS: dict = {}
ACCEPTANCE_LINES: list[str] = []


@functools.cache
def stop_release(t_ramp: float, t_hold_pre: float = 20.0, t_hold_post: float = 50.0):
    """Canonical stop/release run, shared between test modules (each run costs about a minute)."""
    stop = DetuningProtocol(-100.0, 100.0, t_hold_pre=t_hold_pre, t_ramp=t_ramp, t_hold_post=t_hold_post)
    t0 = time.perf_counter()
    rep = run_stop_release(CANONICAL, CANONICAL_PULSE, stop, dt=2.5e-4, sample_every=400)
    RUN_SECONDS[(t_ramp, t_hold_pre, t_hold_post)] = time.perf_counter() - t0
    return rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
