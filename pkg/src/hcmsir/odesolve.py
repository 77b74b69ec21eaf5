"""Adaptive embedded Runge-Kutta 4(5) integration with dense output.

Dormand-Prince coefficients, standard proportional step control, cubic
Hermite interpolation onto a uniform output grid. The systems integrated
here are non-stiff; persistent step-size underflow is reported, not worked
around.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .compiler import CompiledSystem

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784,
                11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])


class StepSizeUnderflow(RuntimeError):
    """Step control collapsed; the system looks stiff at the given time."""

    def __init__(self, t: float):
        super().__init__(f"step size underflow at t = {t:.6g}")
        self.t = t


class ConservationError(RuntimeError):
    pass


def solve_rk45(f, y0, t0: float, t_end: float,
               rel_tol: float = 1e-6, abs_tol: float = 1e-8,
               t_eval: np.ndarray | None = None,
               step_callback=None):
    """Integrate y' = f(t, y); returns (t_eval, Y) on the evaluation grid.

    Dense output between accepted steps is cubic Hermite using the stored
    derivative at both step ends.
    """
    if t_end <= t0:
        raise ValueError("t_end must exceed t0")
    if not (0 < rel_tol <= 1e-2 and 0 < abs_tol <= 1e-2):
        raise ValueError("tolerances must lie in (0, 1e-2]")
    y = np.asarray(y0, dtype=float).copy()
    t = t0
    k_first = f(t, y)
    ts = [t]
    ys = [y.copy()]
    fs = [k_first.copy()]

    h = min(0.01 * (t_end - t0), 0.1)
    h_min = 1e-12 * (t_end - t0)
    k = np.empty((7, len(y)))
    k[0] = k_first
    while t < t_end:
        h = min(h, t_end - t)
        if h < h_min:
            raise StepSizeUnderflow(t)
        for i in range(1, 7):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_A[i]))
            k[i] = f(t + _C[i] * h, yi)
        y5 = y + h * (_B5 @ k)
        err_vec = h * ((_B5 - _B4) @ k)
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y5))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            t = t + h
            y = y5
            k[0] = k[6]        # FSAL
            ts.append(t)
            ys.append(y.copy())
            fs.append(k[6].copy())
            if step_callback is not None:
                step_callback(t, y)
        # conservative safety factor keeps accumulated global error within
        # the requested tolerance, not just the per-step estimate
        factor = 0.8 * (err ** -0.2 if err > 0 else 5.0)
        h = h * min(5.0, max(0.2, factor))

    ts = np.array(ts)
    Ys = np.array(ys)
    Fs = np.array(fs)
    if t_eval is None:
        return ts, Ys
    t_eval = np.asarray(t_eval, dtype=float)
    out = np.empty((len(t_eval), Ys.shape[1]))
    idx = np.clip(np.searchsorted(ts, t_eval, side="right") - 1, 0,
                  len(ts) - 2)
    for p, (te, i) in enumerate(zip(t_eval, idx)):
        t_a, t_b = ts[i], ts[i + 1]
        hh = t_b - t_a
        s = (te - t_a) / hh
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        out[p] = (h00 * Ys[i] + h10 * hh * Fs[i]
                  + h01 * Ys[i + 1] + h11 * hh * Fs[i + 1])
    return t_eval, out


@dataclass
class EpidemicTrace:
    """Prevalence series on a uniform time grid."""

    t: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray
    states: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t", "S", "I", "R"])
        for row in zip(self.t, self.s, self.i, self.r):
            w.writerow([f"{x:.10g}" for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EpidemicTrace":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0][:4]] != ["t", "S", "I", "R"]:
            raise ValueError("not a trace CSV (expected header t,S,I,R)")
        data = np.array([[float(x) for x in row[:4]] for row in rows[1:]])
        return cls(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


def integrate(system: CompiledSystem, t_end: float = 15.0,
              rel_tol: float = 1e-6, abs_tol: float = 1e-8,
              h_out: float = 0.01, keep_states: bool = False,
              split_seed_mass: bool = False) -> EpidemicTrace:
    """Integrate a compiled system from its initial conditions."""
    y0 = system.initial_state(split_seed_mass=split_seed_mass)
    grid = np.round(np.arange(0.0, t_end + h_out / 2, h_out), 12)
    budget = 100.0 * max(rel_tol, abs_tol)

    def monitor(t, y):
        s = system.susceptible(y)
        drift = abs(s + y[system.i_index] + y[system.r_index] - 1.0)
        if drift > budget:
            raise ConservationError(
                f"|S+I+R-1| = {drift:.3e} at t = {t:.4g} exceeds "
                f"100x tolerance")

    _, Y = solve_rk45(system.rhs, y0, 0.0, t_end, rel_tol, abs_tol,
                      t_eval=grid, step_callback=monitor)
    s, i, r = system.observe(Y)
    return EpidemicTrace(grid, s, i, r,
                         states=Y if keep_states else None,
                         metadata={"tau": system.params.tau,
                                   "gamma": system.params.gamma,
                                   "epsilon": system.params.epsilon,
                                   "rel_tol": rel_tol, "abs_tol": abs_tol})
