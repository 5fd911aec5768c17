"""Exact small-system dynamics for the toric code.

Qubit ``j`` is edge ``j`` of the lattice and is the ``j``-th most
significant bit of a computational basis index.

The master equation is integrated in the Schroedinger picture,

    drho/dt = -i[H, rho] + gamma * ( -i[Hc, rho] + sum_l L rho L^+ - 1/2 {L^+ L, rho} ),

whose dual acting on observables is the Heisenberg form used to define the
error dynamics.  ``Hc`` and every ``L`` are scaled to unit operator norm so
that ``gamma`` carries the whole rate; ``NoiseModel.bracket_bound`` reports
the resulting bound on the bracketed error term for unit-norm observables.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg

from .lattice import DefectSet, ToricLattice, build_lattice

MAX_DENSE_QUBITS = 12
MAX_LOCAL_QUBITS = 4

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),    # |0><1|
    "+": np.array([[0, 0], [1, 0]], dtype=complex),
}


class DynamicsError(RuntimeError):
    pass


class ConvergenceError(DynamicsError):
    pass


class TooLargeError(ValueError):
    pass


class NonLocalTermError(ValueError):
    pass


# --------------------------------------------------------------------------
# operators


@dataclass(frozen=True, eq=False)
class LocalOp:
    """A matrix acting on an ordered tuple of qubits."""

    qubits: tuple
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        q = tuple(int(i) for i in self.qubits)
        if len(set(q)) != len(q):
            raise ValueError(f"repeated qubit in {q}")
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2 ** len(q), 2 ** len(q)):
            raise ValueError(f"matrix shape {m.shape} does not match {len(q)} qubits")
        object.__setattr__(self, "qubits", q)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pauli(cls, word: str, qubits: Sequence[int]) -> "LocalOp":
        if len(word) != len(qubits):
            raise ValueError("Pauli word and qubit list differ in length")
        return cls(tuple(qubits), reduce(np.kron, [PAULI[c] for c in word]))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def scaled(self, c: complex) -> "LocalOp":
        return LocalOp(self.qubits, c * self.matrix)

    def dense(self, n: int) -> np.ndarray:
        return embed(self.matrix, self.qubits, n)


def embed(matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    dim = 2 ** n
    return apply_left(matrix, qubits, np.eye(dim, dtype=complex), n)


def apply_left(matrix: np.ndarray, qubits: Sequence[int], x: np.ndarray, n: int) -> np.ndarray:
    """``(M on qubits) @ x`` for ``x`` of shape (2**n,) or (2**n, m)."""
    q = len(qubits)
    vec = x.ndim == 1
    cols = 1 if vec else x.shape[1]
    t = x.reshape((2,) * n + (cols,))
    m = matrix.reshape((2,) * (2 * q))
    out = np.tensordot(m, t, axes=(list(range(q, 2 * q)), list(qubits)))
    out = np.moveaxis(out, list(range(q)), list(qubits))
    out = np.ascontiguousarray(out).reshape(2 ** n, cols)
    return out[:, 0] if vec else out


def apply_right(x: np.ndarray, matrix: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """``x @ (M on qubits)``."""
    return apply_left(matrix.T, qubits, x.T, n).T


def _monomial(dense: np.ndarray, tol: float = 1e-12):
    # (source index per row, coefficient per row) if one nonzero per row and column
    nz = np.abs(dense) > tol
    if not (nz.sum(axis=1) == 1).all() or not (nz.sum(axis=0) == 1).all():
        return None
    src = nz.argmax(axis=1)
    return src, dense[np.arange(dense.shape[0]), src]


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a @ b - b @ a, 2))


# --------------------------------------------------------------------------
# toric model


def _check_dense_size(lattice: ToricLattice) -> int:
    n = lattice.n_edges
    if n > MAX_DENSE_QUBITS:
        raise TooLargeError(f"{n} qubits exceed the dense budget of {MAX_DENSE_QUBITS}")
    return n


def stabilizer_ops(lattice: ToricLattice) -> tuple[list[LocalOp], list[LocalOp]]:
    """``A_s`` for every vertex and ``B_p`` for every face as Pauli strings."""
    stars = [LocalOp.pauli("XXXX", sorted(lattice.star(s))) for s in range(lattice.n_vertices)]
    plaqs = [LocalOp.pauli("ZZZZ", sorted(lattice.bound(p))) for p in range(lattice.n_faces)]
    return stars, plaqs


def toric_terms(lattice: ToricLattice) -> list[LocalOp]:
    """Local terms ``1 - A_s`` (vertices first) then ``1 - B_p``."""
    stars, plaqs = stabilizer_ops(lattice)
    eye = np.eye(16, dtype=complex)
    return [LocalOp(op.qubits, eye - op.matrix) for op in stars + plaqs]


def build_toric_hamiltonian(lattice: ToricLattice) -> np.ndarray:
    n = _check_dense_size(lattice)
    return sum(t.dense(n) for t in toric_terms(lattice))


def logical_loops(lattice: ToricLattice) -> dict[str, LocalOp]:
    """Noncontractible loop operators.

    Z1: Z on the horizontal primal loop {(x,0,h)};  Z2: Z on {(0,y,v)}.
    X1: X on the dual loop {(0,y,h)} (anticommutes with Z1);  X2: X on {(x,0,v)}.
    """
    k = lattice.k
    z1 = [lattice.edge(x, 0, "h") for x in range(k)]
    z2 = [lattice.edge(0, y, "v") for y in range(k)]
    x1 = [lattice.edge(0, y, "h") for y in range(k)]
    x2 = [lattice.edge(x, 0, "v") for x in range(k)]
    return {
        "Z1": LocalOp.pauli("Z" * k, z1),
        "Z2": LocalOp.pauli("Z" * k, z2),
        "X1": LocalOp.pauli("X" * k, x1),
        "X2": LocalOp.pauli("X" * k, x2),
    }


def logical_observables(lattice: ToricLattice) -> dict[str, np.ndarray]:
    n = _check_dense_size(lattice)
    return {name: op.dense(n) for name, op in logical_loops(lattice).items()}


def code_state(lattice: ToricLattice, amplitudes: Mapping[tuple[int, int], complex] | None = None) -> np.ndarray:
    """Ground-space vector ``sum_ab c_ab X1^a X2^b |g>``, ``|g>`` the Z1=Z2=+1 ground state."""
    n = _check_dense_size(lattice)
    dim = 2 ** n
    g = np.zeros(dim, complex)
    g[0] = 1.0
    stars, _ = stabilizer_ops(lattice)
    for a in stars:
        g = 0.5 * (g + apply_left(a.matrix, a.qubits, g, n))
    g /= np.linalg.norm(g)
    if amplitudes is None:
        return g
    loops = logical_loops(lattice)
    out = np.zeros(dim, complex)
    for (a, b), c in amplitudes.items():
        v = g
        if a:
            v = apply_left(loops["X1"].matrix, loops["X1"].qubits, v, n)
        if b:
            v = apply_left(loops["X2"].matrix, loops["X2"].qubits, v, n)
        out += c * v
    return out / np.linalg.norm(out)


def exact_syndrome(lattice: ToricLattice, state: np.ndarray, tol: float = 1e-9) -> DefectSet:
    """Defects read from stabilizer expectations of an eigenstate (-1 => defect)."""
    n = _check_dense_size(lattice)
    rho = as_density(state)
    stars, plaqs = stabilizer_ops(lattice)
    out = []
    for ops in (stars, plaqs):
        flagged = set()
        for i, op in enumerate(ops):
            v = expectation(rho, op.dense(n))
            if abs(abs(v) - 1) > tol:
                raise DynamicsError(f"state is not a stabilizer eigenstate (<S>={v:.3g})")
            if v < 0:
                flagged.add(i)
        out.append(frozenset(flagged))
    return DefectSet(out[0], out[1])


# --------------------------------------------------------------------------
# states


def as_density(state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return np.outer(state, state.conj())
    return state


def expectation(state: np.ndarray, obs: np.ndarray) -> float:
    if state.ndim == 1:
        return float(np.real(np.vdot(state, obs @ state)))
    return float(np.real(np.sum(state * obs.T)))


def check_density(rho: np.ndarray, trace_tol: float = 1e-9, herm_tol: float = 1e-9,
                  pos_tol: float = 1e-8) -> None:
    """Raise if ``rho`` is not a unit-trace Hermitian numerically-PSD matrix."""
    tr = np.trace(rho).real
    if abs(tr - 1) > trace_tol:
        raise DynamicsError(f"trace drifted to {tr!r}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise DynamicsError("state lost Hermiticity")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lam < -pos_tol:
        raise DynamicsError(f"state has negative eigenvalue {lam:.3g}")


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = as_density(a) - as_density(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum())


# --------------------------------------------------------------------------
# noise


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Error dynamics of strength ``gamma``.

    ``h_check`` and each Lindblad operator are rescaled to unit operator norm
    on construction; the factors removed are kept in ``scales``.
    """

    lindblads: tuple = ()
    gamma: float = 0.0
    h_check: LocalOp | None = None
    scales: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        ls, scales = [], []
        for op in self.lindblads:
            nrm = op.norm
            if nrm == 0:
                raise ValueError("zero Lindblad operator")
            ls.append(op.scaled(1 / nrm))
            scales.append(nrm)
        hc = self.h_check
        if hc is not None:
            if np.max(np.abs(hc.matrix - hc.matrix.conj().T)) > 1e-12:
                raise ValueError("h_check must be Hermitian")
            nrm = hc.norm
            hc = hc.scaled(1 / nrm) if nrm > 0 else None
            scales.append(nrm)
        object.__setattr__(self, "lindblads", tuple(ls))
        object.__setattr__(self, "h_check", hc)
        object.__setattr__(self, "scales", tuple(scales))

    @property
    def bracket_bound(self) -> float:
        """Bound on |tr rho (bracketed error term)| for observables with norm <= 1."""
        return 2.0 * len(self.lindblads) + (2.0 if self.h_check is not None else 0.0)

    def restricted_to(self, qubits: Iterable[int]) -> "NoiseModel":
        qs = set(qubits)
        ls = tuple(op for op in self.lindblads if set(op.qubits) <= qs)
        hc = self.h_check if self.h_check is not None and set(self.h_check.qubits) <= qs else None
        return NoiseModel(ls, self.gamma, hc)

    def with_gamma(self, gamma: float) -> "NoiseModel":
        return NoiseModel(self.lindblads, gamma, self.h_check)


def single_edge_noise(lattice: ToricLattice, gamma: float, kinds: str = "XZ") -> NoiseModel:
    """One Lindblad per edge and per letter of ``kinds`` (X, Y, Z, - lowering, + raising)."""
    paulis = kinds
    return NoiseModel(tuple(LocalOp.pauli(p, [e]) for e in range(lattice.n_edges) for p in paulis), gamma)


class _Dissipator:
    """Precompiled ``rho -> -i[Hc, rho] + sum_l D_l(rho)`` (unscaled by gamma)."""

    def __init__(self, noise: NoiseModel, n: int):
        self.n = n
        dim = 2 ** n
        self.mono = []
        self.dense = []
        k_total = np.zeros((dim, dim), complex)
        for op in noise.lindblads:
            d = op.dense(n)
            k_total += d.conj().T @ d
            m = _monomial(d)
            if m is not None:
                self.mono.append(m)
            else:
                self.dense.append(d)
        scal = k_total[0, 0]
        if np.allclose(k_total, scal * np.eye(dim), atol=1e-12):
            self.k_scalar, self.k_dense = float(scal.real), None
        else:
            self.k_scalar, self.k_dense = None, k_total
        self.h = noise.h_check.dense(n) if noise.h_check is not None else None

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        for src, c in self.mono:
            out += (c[:, None] * rho[np.ix_(src, src)]) * c.conj()[None, :]
        for d in self.dense:
            out += d @ rho @ d.conj().T
        if self.k_scalar is not None:
            out -= self.k_scalar * rho
        else:
            out -= 0.5 * (self.k_dense @ rho + rho @ self.k_dense)
        if self.h is not None:
            out += -1j * (self.h @ rho - rho @ self.h)
        return out


# --------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    times: np.ndarray
    expectations: dict
    states: list | None = None

    def records(self) -> list[tuple[float, str, float]]:
        return [(float(t), name, float(vals[i]))
                for i, t in enumerate(self.times) for name, vals in sorted(self.expectations.items())]

    def at(self, t: float, tol: float = 1e-9) -> int:
        idx = np.flatnonzero(np.abs(self.times - t) <= tol)
        if idx.size == 0:
            raise ValueError(f"time {t} not sampled")
        return int(idx[0])


def _grid_indices(times: Sequence[float], dt: float, n_steps: int) -> list[int]:
    out = []
    for t in times:
        m = t / dt
        i = int(round(m))
        if abs(m - i) > 1e-9 * max(1.0, abs(m)) or not 0 <= i <= n_steps:
            raise ValueError(f"sample time {t} is not a multiple of the step {dt} within [0, T]")
        out.append(i)
    return out


def unitary_evolution(state: np.ndarray, h: np.ndarray, t: float) -> np.ndarray:
    e, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * e * t)) @ v.conj().T
    if state.ndim == 1:
        return u @ state
    return u @ state @ u.conj().T


def lindblad_evolve(state: np.ndarray, h: np.ndarray, noise: NoiseModel, T: float, dt_int: float,
                    sample_times: Sequence[float] | None = None,
                    observables: Mapping[str, np.ndarray] | None = None,
                    keep_states: bool = False, check_convergence: bool = True,
                    conv_tol: float = 1e-6) -> Trajectory:
    """Integrate the master equation with fixed-step RK4.

    The Hamiltonian part is removed exactly by working in its interaction
    frame (energy eigenbasis); RK4 acts only on the error generator.  With
    ``check_convergence`` the run is repeated at ``dt_int/2`` and the final
    expectations (or state, without observables) must agree to ``conv_tol``.
    """
    if T < 0 or dt_int <= 0:
        raise ValueError("need T >= 0 and dt_int > 0")
    n_steps = int(round(T / dt_int))
    if abs(n_steps * dt_int - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a multiple of dt_int")
    traj = _lindblad_run(state, h, noise, dt_int, n_steps, sample_times, observables, keep_states)
    if check_convergence and noise.gamma > 0 and n_steps > 0:
        fine = _lindblad_run(state, h, noise, dt_int / 2, 2 * n_steps, [T], observables, True)
        if observables:
            diff = max(abs(traj.expectations[k][-1] - fine.expectations[k][-1]) for k in observables)
        else:
            last = traj.states[-1] if traj.states else None
            if last is None:
                last = _lindblad_run(state, h, noise, dt_int, n_steps, [T], None, True).states[-1]
            diff = float(np.max(np.abs(last - fine.states[-1])))
        if diff >= conv_tol:
            raise ConvergenceError(f"halving dt_int={dt_int} changed the result by {diff:.3g}")
    return traj


def _lindblad_run(state, h, noise, dt, n_steps, sample_times, observables, keep_states):
    rho0 = as_density(state)
    dim = rho0.shape[0]
    n = int(round(math.log2(dim)))
    if h.shape != (dim, dim):
        raise ValueError("Hamiltonian and state dimensions differ")
    T = n_steps * dt
    if sample_times is None:
        sample_times = [0.0, T]
    idx = _grid_indices(sample_times, dt, n_steps)
    want = {}
    for j, i in enumerate(idx):
        want.setdefault(i, []).append(j)

    energies, vecs = np.linalg.eigh(h)
    gap = energies[:, None] - energies[None, :]
    vh = vecs.conj().T
    diss = _Dissipator(noise, n) if noise.gamma > 0 else None
    g = noise.gamma

    def to_lab(s, t):
        return vecs @ (np.exp(-1j * gap * t) * s) @ vh

    def rhs(s, t):
        lab = to_lab(s, t)
        return np.exp(1j * gap * t) * (vh @ (g * diss(lab)) @ vecs)

    obs = dict(observables or {})
    times = np.array(sample_times, dtype=float)
    exps = {name: np.zeros(len(times)) for name in obs}
    kept: list | None = [None] * len(times) if keep_states else None

    def record(i, s):
        lab = to_lab(s, i * dt)
        check_density(lab)
        for j in want[i]:
            for name, o in obs.items():
                exps[name][j] = expectation(lab, o)
            if kept is not None:
                kept[j] = lab

    s = vh @ rho0 @ vecs
    if 0 in want:
        record(0, s)
    if diss is None:
        for i in sorted(want):
            if i:
                record(i, s)
    else:
        for i in range(n_steps):
            t = i * dt
            k1 = rhs(s, t)
            k2 = rhs(s + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = rhs(s + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = rhs(s + dt * k3, t + dt)
            s = s + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(s)):
                raise ConvergenceError("integration diverged")
            if i + 1 in want:
                record(i + 1, s)
    return Trajectory(times, exps, kept)


# --------------------------------------------------------------------------
# stroboscopic simulation


@dataclass(frozen=True)
class TrotterPlan:
    dt: float
    n_steps: int
    term_order: tuple | None = None
    gate_noise: NoiseModel | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    @property
    def T(self) -> float:
        return self.dt * self.n_steps


def _qubit_superops(noise: NoiseModel, tau: float) -> list[tuple[int, np.ndarray]] | None:
    """Exact channels exp(tau*gamma*D) per qubit when every generator is single-qubit."""
    if noise.h_check is not None or any(len(op.qubits) != 1 for op in noise.lindblads):
        return None
    eye = np.eye(2)
    gens: dict[int, np.ndarray] = {}
    for op in noise.lindblads:
        m = op.matrix
        kk = m.conj().T @ m
        # row-major vec: vec(A rho B) = (A kron B^T) vec(rho)
        g = np.kron(m, m.conj()) - 0.5 * (np.kron(kk, eye) + np.kron(eye, kk.T))
        q = op.qubits[0]
        gens[q] = gens.get(q, 0) + g
    return [(q, scipy.linalg.expm(noise.gamma * tau * g)) for q, g in sorted(gens.items())]


def _apply_superop(rho: np.ndarray, q: int, sup: np.ndarray, n: int) -> np.ndarray:
    t = rho.reshape((2,) * (2 * n))
    s = sup.reshape(2, 2, 2, 2)
    out = np.tensordot(s, t, axes=([2, 3], [q, n + q]))
    out = np.moveaxis(out, [0, 1], [q, n + q])
    return np.ascontiguousarray(out).reshape(rho.shape)


def _local_noise(rho: np.ndarray, noise: NoiseModel, tau: float, n: int, cache: dict | None = None) -> np.ndarray:
    """Apply exp(tau * gamma * D) for a noise model restricted to a term's support."""
    rate = noise.gamma * tau
    if rate == 0 or (not noise.lindblads and noise.h_check is None):
        return rho
    key = id(noise)
    if cache is not None and key in cache:
        sups = cache[key]
    else:
        sups = _qubit_superops(noise, tau)
        if cache is not None:
            cache[key] = sups
    if sups is not None:
        for q, sup in sups:
            rho = _apply_superop(rho, q, sup, n)
        return rho
    # multi-qubit generators: RK4 substeps through local products
    sub = max(1, int(math.ceil(rate * (1 + len(noise.lindblads)) / 0.05)))
    h = rate / sub

    def d(r):
        out = np.zeros_like(r)
        for op in noise.lindblads:
            m, q = op.matrix, op.qubits
            kk = m.conj().T @ m
            lr = apply_left(m, q, r, n)
            out += apply_right(lr, m.conj().T, q, n)
            out -= 0.5 * (apply_left(kk, q, r, n) + apply_right(r, kk, q, n))
        if noise.h_check is not None:
            hm, q = noise.h_check.matrix, noise.h_check.qubits
            out += -1j * (apply_left(hm, q, r, n) - apply_right(r, hm, q, n))
        return out

    for _ in range(sub):
        k1 = d(rho)
        k2 = d(rho + 0.5 * h * k1)
        k3 = d(rho + 0.5 * h * k2)
        k4 = d(rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return rho


def trotter_channel(state: np.ndarray, terms: Sequence[LocalOp], plan: TrotterPlan,
                    observables: Mapping[str, np.ndarray] | None = None,
                    keep_states: bool = False) -> Trajectory:
    """First-order product formula with per-gate noise, sampled at every step.

    Each step applies ``exp(-i H_i dt)`` for the terms in ``plan.term_order``;
    after each term the gate noise restricted to that term's qubits acts for
    time ``dt`` at strength ``gate_noise.gamma``.
    """
    for t in terms:
        if len(t.qubits) > MAX_LOCAL_QUBITS:
            raise NonLocalTermError(f"term on {len(t.qubits)} qubits exceeds {MAX_LOCAL_QUBITS}")
        if np.max(np.abs(t.matrix - t.matrix.conj().T)) > 1e-12:
            raise ValueError("terms must be Hermitian")
    order = tuple(range(len(terms))) if plan.term_order is None else tuple(plan.term_order)
    if sorted(order) != list(range(len(terms))):
        raise ValueError("term_order must be a permutation of the term indices")
    state = np.asarray(state, dtype=complex)
    dim = state.shape[0]
    n = int(round(math.log2(dim)))
    noisy = plan.gate_noise is not None and plan.gate_noise.gamma > 0
    psi = state if (state.ndim == 1 and not noisy) else None
    rho = None if psi is not None else as_density(state)

    steps = [(terms[i].qubits, scipy.linalg.expm(-1j * plan.dt * terms[i].matrix)) for i in order]
    local_noise = [plan.gate_noise.restricted_to(terms[i].qubits) for i in order] if noisy else None

    sup_cache: dict = {}
    obs = dict(observables or {})
    times = plan.dt * np.arange(plan.n_steps + 1)
    exps = {name: np.zeros(plan.n_steps + 1) for name in obs}
    kept = [] if keep_states else None

    def record(i):
        cur = psi if psi is not None else rho
        if rho is not None:
            check_density(rho)
        for name, o in obs.items():
            exps[name][i] = expectation(cur, o)
        if kept is not None:
            kept.append(cur.copy())

    record(0)
    for i in range(plan.n_steps):
        for j, (q, u) in enumerate(steps):
            if psi is not None:
                psi = apply_left(u, q, psi, n)
            else:
                rho = apply_right(apply_left(u, q, rho, n), u.conj().T, q, n)
                if noisy:
                    rho = _local_noise(rho, local_noise[j], plan.dt, n, sup_cache)
        record(i + 1)
    return Trajectory(times, exps, kept)


def accuracy_delta(ideal: Mapping[str, Sequence[float]] | Trajectory,
                   noisy: Mapping[str, Sequence[float]] | Trajectory, T: float | None = None) -> float:
    """max_j |<X_j>_noisy(T) - <X_j>_ideal(T)| over a shared observable set."""
    a = _values_at(ideal, T)
    b = _values_at(noisy, T)
    if set(a) != set(b):
        raise ValueError(f"observable sets differ: {sorted(a)} vs {sorted(b)}")
    if not a:
        return 0.0
    return max(abs(b[name] - a[name]) for name in a)


def _values_at(tr, T):
    if isinstance(tr, Trajectory):
        i = len(tr.times) - 1 if T is None else tr.at(T)
        return {name: float(v[i]) for name, v in tr.expectations.items()}
    out = {}
    for name, v in tr.items():
        v = np.atleast_1d(np.asarray(v, dtype=float))
        out[name] = float(v[-1])
    return out


# --------------------------------------------------------------------------
# experiments


def toy_pair_terms() -> list[LocalOp]:
    """Non-commuting two-qubit pair ``X (x) 1`` and ``Z (x) Z``."""
    return [LocalOp.pauli("X", [0]), LocalOp.pauli("ZZ", [0, 1])]


def toy_pair_initial() -> np.ndarray:
    """Fixed generic two-qubit start state for the toy pair."""
    v = np.array([1.0, 0.3 + 0.2j, -0.5, 0.7j])
    return v / np.linalg.norm(v)


def dense_sum(terms: Sequence[LocalOp], n: int) -> np.ndarray:
    return sum(t.dense(n) for t in terms)


def edge_multiplicity(terms: Sequence[LocalOp], n: int) -> np.ndarray:
    m = np.zeros(n, int)
    for t in terms:
        m[list(t.qubits)] += 1
    return m


@dataclass
class FaultToleranceResult:
    """Output of the system-vs-simulation accuracy comparison."""

    times: np.ndarray
    delta_system: np.ndarray                 # per sample time
    delta_sim: dict                          # dt -> array per sample time
    per_observable_system: dict              # label -> array
    per_observable_sim: dict                 # dt -> {label -> array}
    c_fit: float
    gamma: float
    gamma_sim: float
    bracket_bound: float
    rows: list = field(default_factory=list)   # (dt, T, d_sys, d_sim, rhs, ok)

    @property
    def holds(self) -> bool:
        return all(r[-1] for r in self.rows)


def fault_tolerance_experiment(k: int = 2, gamma: float = 0.01, dts: Sequence[float] = (0.1, 0.05, 0.025),
                               T: float = 5.0, sample_interval: float = 0.5, dt_int: float = 0.05,
                               initial: Mapping[tuple[int, int], complex] | None = None,
                               noise_kinds: str = "XZ") -> FaultToleranceResult:
    """Compare the noisy system against its noisy stroboscopic simulation.

    System: toric Hamiltonian with single-edge Lindblad noise of strength
    ``gamma`` (one operator per edge for each letter of ``noise_kinds``).
    Simulation: product formula over the stabilizer terms with the same gate
    noise on each term's support at ``gamma / m``, where ``m``
    is the number of terms touching an edge, so every edge sees the same
    total rate as in the system.  The bound checked at every sample time is
    ``delta_sim <= 2 delta_system + c T dt`` with ``c`` fitted by least
    squares to the excess ``delta_sim - delta_system`` against ``T dt``.

    With pure Pauli noise every logical loop is only rescaled in the
    Heisenberg picture, so both deltas coincide and ``c`` fits to ~0; use a
    non-Pauli kind such as ``"-"`` to exercise the bound non-trivially.
    """
    lat = build_lattice(k)
    n = _check_dense_size(lat)
    terms = toric_terms(lat)
    h = build_toric_hamiltonian(lat)
    obs = logical_observables(lat)
    if initial is None:
        c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
        initial = {(0, 0): c / math.sqrt(2), (1, 0): s / math.sqrt(2),
                   (0, 1): c / math.sqrt(2), (1, 1): s / math.sqrt(2)}
    psi0 = code_state(lat, initial)
    mult = edge_multiplicity(terms, n)
    if not (mult == mult[0]).all():
        raise DynamicsError("non-uniform term multiplicity; matched gate noise undefined")
    gamma_sim = gamma / mult[0]

    samples = list(np.round(np.arange(0.0, T + 1e-12, sample_interval), 12))
    ideal = {name: expectation(psi0, o) for name, o in obs.items()}   # code space is stationary
    sys_noise = single_edge_noise(lat, gamma, noise_kinds)
    sys_tr = lindblad_evolve(psi0, h, sys_noise, T, dt_int, sample_times=samples, observables=obs)
    d_sys = np.array([max(abs(sys_tr.expectations[j][i] - ideal[j]) for j in obs) for i in range(len(samples))])

    gate_noise = single_edge_noise(lat, gamma_sim, noise_kinds)
    d_sim, per_sim = {}, {}
    for dt in dts:
        steps = int(round(T / dt))
        tr = trotter_channel(psi0, terms, TrotterPlan(dt, steps, gate_noise=gate_noise), observables=obs)
        idx = [tr.at(t) for t in samples]
        per_sim[dt] = {j: tr.expectations[j][idx] for j in obs}
        d_sim[dt] = np.array([max(abs(tr.expectations[j][i] - ideal[j]) for j in obs) for i in idx])

    x = np.concatenate([np.asarray(samples) * dt for dt in dts])
    y = np.concatenate([d_sim[dt] - d_sys for dt in dts])
    c_fit = max(0.0, float(x @ y / (x @ x))) if x @ x > 0 else 0.0
    rows = []
    for dt in dts:
        for i, t in enumerate(samples):
            rhs = 2 * d_sys[i] + c_fit * t * dt
            rows.append((dt, float(t), float(d_sys[i]), float(d_sim[dt][i]), float(rhs),
                         bool(d_sim[dt][i] <= rhs + 1e-12)))
    per_sys = {j: sys_tr.expectations[j] for j in obs}
    return FaultToleranceResult(np.asarray(samples), d_sys, d_sim, per_sys, per_sim, c_fit, gamma,
                                gamma_sim, sys_noise.bracket_bound, rows)
