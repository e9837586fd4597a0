"""Power flow solvers: Newton-Raphson (primary) and Gauss-Seidel (oracle).

Loads are given as positive consumption (p, q) on the load-attached
buses; injections are negated internally. Voltages are solved at every
bus, with the slack pinned to 1.0 pu / 0.0 rad.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .netmodel import Network

SOLVER = "solver"
MODEL = "model"


class SingularJacobianError(RuntimeError):
    """Jacobian became singular during a Newton iteration."""

    def __init__(self, iteration: int):
        super().__init__(f"singular Jacobian at Newton iteration {iteration}")
        self.iteration = iteration


@dataclass
class SolverSettings:
    mismatch_tolerance: float = 1e-8
    max_iterations: int = 50
    warm_start: bool = True
    gs_max_iterations: int = 20000
    gs_acceleration: float = 1.6  # SOR factor; 1.0 recovers plain Gauss-Seidel

    def __post_init__(self):
        if self.mismatch_tolerance <= 0:
            raise ValueError("mismatch_tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass
class VoltageSolution:
    v: np.ndarray
    a: np.ndarray
    iterations: int
    provenance: str  # "solver" or "model"
    converged: bool
    wall_time: float = 0.0


def injections(network: Network, p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full-bus net injection vectors from load-vector consumption."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != (network.n_loads,) or q.shape != (network.n_loads,):
        raise ValueError(f"expected load vectors of length {network.n_loads}, "
                         f"got {p.shape} and {q.shape}")
    p_inj = np.zeros(network.n_bus)
    q_inj = np.zeros(network.n_bus)
    p_inj[network.load_buses] = -p
    q_inj[network.load_buses] = -q
    return p_inj, q_inj


def power_mismatch(network: Network, p: np.ndarray, q: np.ndarray,
                   v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Real/reactive injection residuals at the pq buses, stacked [dP, dQ].

    This is the quantity driven below mismatch_tolerance at convergence.
    """
    p_inj, q_inj = injections(network, p, q)
    V = v * np.exp(1j * a)
    S = V * np.conj(network.Y @ V)
    pq = network.pq_indices
    return np.concatenate([p_inj[pq] - S.real[pq], q_inj[pq] - S.imag[pq]])


def solve_newton_raphson(network: Network, p: np.ndarray, q: np.ndarray,
                         initial_guess: VoltageSolution | None = None,
                         settings: SolverSettings | None = None) -> VoltageSolution:
    """Polar-coordinate Newton-Raphson power flow with full Jacobian.

    Returns an explicit non-converged result if max_iterations is
    exhausted; raises SingularJacobianError on a singular system.
    """
    settings = settings or SolverSettings()
    start = time.perf_counter()
    n = network.n_bus
    slack = network.slack_index
    pq = network.pq_indices
    p_inj, q_inj = injections(network, p, q)

    if initial_guess is not None:
        v = np.array(initial_guess.v, dtype=float)
        a = np.array(initial_guess.a, dtype=float)
    else:
        v = np.ones(n)
        a = np.zeros(n)
    v[slack] = 1.0
    a[slack] = 0.0

    Y = network.Y
    for iteration in range(settings.max_iterations + 1):
        V = v * np.exp(1j * a)
        I = Y @ V
        S = V * np.conj(I)
        dP = p_inj[pq] - S.real[pq]
        dQ = q_inj[pq] - S.imag[pq]
        mismatch = np.concatenate([dP, dQ])
        if np.max(np.abs(mismatch)) <= settings.mismatch_tolerance:
            return VoltageSolution(v=v, a=a, iterations=iteration, provenance=SOLVER,
                                   converged=True, wall_time=time.perf_counter() - start)
        if iteration == settings.max_iterations:
            break

        # MATPOWER-style complex power flow derivatives
        diagV = np.diag(V)
        diagI = np.diag(I)
        diagVnorm = np.diag(V / np.abs(V))
        dS_da = 1j * diagV @ np.conj(diagI - Y @ diagV)
        dS_dv = diagVnorm @ np.conj(diagI) + diagV @ np.conj(Y @ diagVnorm)

        J = np.block([
            [dS_da.real[np.ix_(pq, pq)], dS_dv.real[np.ix_(pq, pq)]],
            [dS_da.imag[np.ix_(pq, pq)], dS_dv.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(J, mismatch)
        except np.linalg.LinAlgError:
            raise SingularJacobianError(iteration) from None
        a[pq] += dx[:len(pq)]
        v[pq] += dx[len(pq):]

    return VoltageSolution(v=v, a=a, iterations=settings.max_iterations,
                           provenance=SOLVER, converged=False,
                           wall_time=time.perf_counter() - start)


def solve_gauss_seidel(network: Network, p: np.ndarray, q: np.ndarray,
                       settings: SolverSettings | None = None) -> VoltageSolution:
    """Complex-voltage Gauss-Seidel sweep; slow but structurally independent
    of the Newton path, used for cross-verification."""
    settings = settings or SolverSettings()
    start = time.perf_counter()
    n = network.n_bus
    slack = network.slack_index
    pq = network.pq_indices
    p_inj, q_inj = injections(network, p, q)
    S_inj = p_inj + 1j * q_inj

    Y = network.Y
    V = np.ones(n, dtype=complex)
    inv_diag = 1.0 / np.diag(Y)

    accel = settings.gs_acceleration
    for sweep in range(1, settings.gs_max_iterations + 1):
        for i in pq:
            sigma = Y[i] @ V - Y[i, i] * V[i]
            update = inv_diag[i] * (np.conj(S_inj[i] / V[i]) - sigma)
            V[i] += accel * (update - V[i])
        S = V * np.conj(Y @ V)
        residual = np.concatenate([p_inj[pq] - S.real[pq], q_inj[pq] - S.imag[pq]])
        if np.max(np.abs(residual)) <= settings.mismatch_tolerance:
            V[slack] = 1.0
            return VoltageSolution(v=np.abs(V), a=np.angle(V), iterations=sweep,
                                   provenance=SOLVER, converged=True,
                                   wall_time=time.perf_counter() - start)
    return VoltageSolution(v=np.abs(V), a=np.angle(V),
                           iterations=settings.gs_max_iterations, provenance=SOLVER,
                           converged=False, wall_time=time.perf_counter() - start)
