"""Step-size planning for noisy stroboscopic simulation.

Total error model over a run of length T with step dt:

    f(dt) = c_strobe * T * dt**order * h_norm**2  +  T * eps_gate * gates_per_step / dt

The first term is the product-formula (stroboscopic) error, the second the
per-gate noise accumulated over T/dt steps.  ``h_norm`` is an operator-norm
scale; the expectation-level version of the same quantity is not modelled
(``OPERATOR_NORM_NOTE`` is attached to every report).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

OPERATOR_NORM_NOTE = "h_norm is an operator-norm scale; expectation-level norms are not modelled"


class DegenerateBudgetError(ValueError):
    """Budget without a finite interior optimum."""


@dataclass(frozen=True)
class ErrorBudget:
    h_norm: float
    T: float
    eps_gate: float
    gates_per_step: int
    c_strobe: float
    order: int = 1

    def __post_init__(self):
        for name in ("h_norm", "T", "eps_gate", "c_strobe"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if int(self.gates_per_step) != self.gates_per_step or self.gates_per_step < 1:
            raise ValueError("gates_per_step must be an integer >= 1")
        if int(self.order) != self.order or self.order < 1:
            raise ValueError("order must be an integer >= 1")

    @property
    def a(self) -> float:
        return self.c_strobe * self.T * self.h_norm ** 2

    @property
    def b(self) -> float:
        return self.T * self.eps_gate * self.gates_per_step

    def as_dict(self) -> dict:
        return asdict(self)


def _check_dt(dt):
    if not dt > 0:
        raise ValueError("dt must be > 0")


def stroboscopic_error(budget: ErrorBudget, dt: float) -> float:
    _check_dt(dt)
    return budget.a * dt ** budget.order


def noise_error(budget: ErrorBudget, dt: float) -> float:
    _check_dt(dt)
    return budget.b / dt


def total_error(budget: ErrorBudget, dt: float) -> float:
    return stroboscopic_error(budget, dt) + noise_error(budget, dt)


def optimal_dt(budget: ErrorBudget) -> tuple[float, float]:
    """Minimizer of ``a dt**p + b/dt`` and the minimum value.

    For p = 1 this is dt* = sqrt(b/a) with f(dt*) = 2 sqrt(ab).
    """
    a, b, p = budget.a, budget.b, budget.order
    if a == 0 and b == 0:
        raise DegenerateBudgetError("both error terms vanish; any dt is optimal")
    if a == 0:
        raise DegenerateBudgetError("no stroboscopic error: total error decreases without bound as dt grows")
    if b == 0:
        raise DegenerateBudgetError("zero gate noise: total error decreases monotonically as dt -> 0")
    if p == 1:
        dt = math.sqrt(b / a)
        return dt, 2.0 * math.sqrt(a * b)
    dt = (b / (p * a)) ** (1.0 / (p + 1))
    return dt, a * dt ** p + b / dt


def fit_c_strobe(dts: Sequence[float], deviations: Sequence[float], T: float, h_norm: float,
                 order: int = 1) -> float:
    """Geometric-mean estimate of the stroboscopic constant from measured deviations."""
    dts = np.asarray(dts, float)
    dev = np.asarray(deviations, float)
    if dts.shape != dev.shape or dts.size == 0:
        raise ValueError("need matching, non-empty dt and deviation arrays")
    if (dev <= 0).any():
        raise ValueError("deviations must be positive to fit")
    scale = T * dts ** order * h_norm ** 2
    return float(np.exp(np.mean(np.log(dev / scale))))


def plan_report(budget: ErrorBudget, grid_factors: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)) -> dict:
    dt, f = optimal_dt(budget)
    rows = []
    for m in grid_factors:
        d = m * dt
        rows.append({"dt": d, "stroboscopic": stroboscopic_error(budget, d),
                     "noise": noise_error(budget, d), "total": total_error(budget, d)})
    return {"budget": budget.as_dict(), "dt_star": dt, "f_star": f, "grid": rows, "note": OPERATOR_NORM_NOTE}


# --------------------------------------------------------------------------
# end-to-end check on the two-qubit toy


@dataclass
class ToyValidation:
    budget: ErrorBudget
    dt_star: float
    predicted: dict        # dt -> model total error
    measured: dict         # dt -> measured deviation
    c_strobe: float
    eps_eff: float

    @property
    def ratio(self) -> float:
        """measured(dt*) / min over the grid; <= 2 is the acceptance condition."""
        return self.measured[self.dt_star] / min(self.measured.values())


def toy_measure(dt: float, T: float, eps_gate: float, strobe: bool = True) -> float:
    """Trace distance after time T between the noisy simulation and exact evolution.

    Each enacted gate is followed by X and Z noise on its qubits with
    per-gate strength ``eps_gate`` (rate eps_gate/dt over the step).  With
    ``strobe=False`` the reference is the noiseless product formula, which
    isolates the noise contribution.
    """
    from . import exact as ex

    terms = ex.toy_pair_terms()
    psi0 = ex.toy_pair_initial()
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * T:
        raise ValueError("T must be a multiple of dt")
    noise = ex.NoiseModel(tuple(ex.LocalOp.pauli(p, [q]) for q in (0, 1) for p in "XZ"), eps_gate / dt)
    noisy = ex.trotter_channel(psi0, terms, ex.TrotterPlan(dt, steps, gate_noise=noise), keep_states=True)
    if strobe:
        ref = ex.unitary_evolution(psi0, ex.dense_sum(terms, 2), steps * dt)
    else:
        ref = ex.trotter_channel(psi0, terms, ex.TrotterPlan(dt, steps), keep_states=True).states[-1]
    return ex.trace_distance(noisy.states[-1], ref)


def toy_validation(T: float = 2.0, eps_gate: float = 1e-3,
                   fit_dts: Sequence[float] = (0.1, 0.05, 0.025, 0.0125)) -> ToyValidation:
    """Fit the model on the toy, then measure total error around the predicted dt*."""
    from . import exact as ex

    terms = ex.toy_pair_terms()
    h_norm = float(np.linalg.norm(ex.dense_sum(terms, 2), 2))
    strobe = [toy_measure(dt, T, 0.0) for dt in fit_dts]
    c = fit_c_strobe(fit_dts, strobe, T, h_norm)
    # per-gate noise calibrated at a reference step against the noiseless product formula
    dt_ref = fit_dts[len(fit_dts) // 2]
    noise_dev = toy_measure(dt_ref, T, eps_gate, strobe=False)
    eps_eff = noise_dev * dt_ref / (T * len(terms))
    budget = ErrorBudget(h_norm, T, eps_eff, len(terms), c)
    dt_star, _ = optimal_dt(budget)
    # snap to a divisor of T so every grid point lands exactly on T
    dt_star = T / max(1, round(T / dt_star))
    grid = sorted({dt_star * m for m in (0.25, 0.5, 1.0, 2.0, 4.0)})
    grid = [T / max(1, round(T / d)) for d in grid]
    measured = {d: toy_measure(d, T, eps_gate) for d in grid}
    predicted = {d: total_error(budget, d) for d in grid}
    return ToyValidation(budget, dt_star, predicted, measured, c, eps_eff)
