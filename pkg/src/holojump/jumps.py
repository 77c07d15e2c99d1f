"""Quantum-jump unraveling of the master equation.

A run of total time ``T`` is split into ``N`` steps of length ``dt``. Each
step applies exactly one operator: the no-jump propagator
``exp(-i H_eff(t_mid) dt)`` (or ``1 - i H_eff dt`` with ``first_order=True``)
or a jump ``W_k = sqrt(dt) L_k``. Trajectory states are kept unnormalized, so
the squared norm of a final state is the probability of its jump record.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import core
from .errors import BudgetError, DomainError
from .holonomy import IsospectralFamily, ParameterPath
from .lindblad import KappaKind, LindbladModel, classify_kappa

DEFAULT_BUDGET = 200_000
SAMPLE_CHUNK = 1024


class JumpScheme:
    def __init__(self, model: LindbladModel, dt: float, total_time: float,
                 first_order: bool = False):
        if dt <= 0:
            raise DomainError("dt must be positive")
        if total_time <= 0:
            raise DomainError("total_time must be positive")
        self.model = model
        self.steps = max(1, round(total_time / dt))
        self.total_time = float(total_time)
        self.dt = self.total_time / self.steps
        self.first_order = first_order
        self.jump_ops = tuple(math.sqrt(self.dt) * l for l in model.lindblad_ops)
        self._propagators = None

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def channels(self) -> int:
        return len(self.jump_ops)

    def step_times(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) * self.dt

    def h_eff(self, t: float) -> np.ndarray:
        return self.model.hamiltonian_at(t) - 0.5j * self.model.kappa

    def h_eff_steps(self) -> np.ndarray:
        """Effective Hamiltonians at the step midpoints, shape (N, d, d)."""
        if not self.model.time_dependent:
            return (self.h_eff(0.0))[None]
        return self.model.hamiltonians_at(self.step_times()) - 0.5j * self.model.kappa[None]

    @property
    def propagators(self) -> np.ndarray:
        """No-jump step operators W0; a single shared matrix when H is constant."""
        if self._propagators is None:
            heff = self.h_eff_steps()
            if self.first_order:
                props = np.eye(self.dim)[None] - 1j * self.dt * heff
            else:
                props = core.matexp(-1j * self.dt * heff)
            self._propagators = props
        return self._propagators

    def w0(self, m: int) -> np.ndarray:
        props = self.propagators
        return props[m if len(props) > 1 else 0]

    def completeness_defect(self, m: int | None = None) -> float:
        """max over steps of ||W0^dag W0 + sum_k W_k^dag W_k - 1||."""
        props = self.propagators
        idx = range(len(props)) if m is None else [m if len(props) > 1 else 0]
        jump_part = self.dt * self.model.kappa
        eye = np.eye(self.dim)
        return max(core.operator_norm(props[i].conj().T @ props[i] + jump_part - eye)
                   for i in idx)

    def completeness_bound(self) -> float:
        """2 (||H|| + ||kappa||/2)^2 dt^2, maximized over the step Hamiltonians."""
        heff = self.h_eff_steps()
        kappa_norm = core.operator_norm(self.model.kappa)
        h_norm = max(core.operator_norm(h + 0.5j * self.model.kappa) for h in heff)
        return 2.0 * (h_norm + 0.5 * kappa_norm) ** 2 * self.dt ** 2


def build_scheme(model: LindbladModel, dt: float, total_time: float | None = None,
                 first_order: bool = False) -> JumpScheme:
    if total_time is None:
        if model.total_time is None:
            raise DomainError("total_time is required for a constant hamiltonian")
        total_time = model.total_time
    return JumpScheme(model, dt, total_time, first_order=first_order)


@dataclass(frozen=True)
class TrajectoryRecord:
    jump_sequence: tuple[tuple[int, int], ...]
    final_state: np.ndarray
    weight: float

    @property
    def jump_count(self) -> int:
        return len(self.jump_sequence)


def _apply_step(scheme: JumpScheme, m: int, channel: int, psi: np.ndarray) -> np.ndarray:
    if channel == 0:
        return scheme.w0(m) @ psi
    return scheme.jump_ops[channel - 1] @ psi


def replay(scheme: JumpScheme, psi0, jump_sequence) -> list[np.ndarray]:
    """Chain of unnormalized states psi_0, psi_1, ..., psi_N for a jump record.

    ``jump_sequence`` holds ``(step, channel)`` pairs with channels numbered
    from 1; every other step is a no-jump step.
    """
    jumps = dict(jump_sequence)
    psi = np.asarray(psi0, dtype=complex)
    chain = [psi]
    for m in range(scheme.steps):
        psi = _apply_step(scheme, m, jumps.get(m, 0), psi)
        chain.append(psi)
    return chain


def nojump_propagate(scheme: JumpScheme, psi0) -> np.ndarray:
    psi = np.asarray(psi0, dtype=complex)
    props = scheme.propagators
    if len(props) == 1:
        return np.linalg.matrix_power(props[0], scheme.steps) @ psi
    for u in props:
        psi = u @ psi
    return psi


def nojump_propagator(scheme: JumpScheme) -> np.ndarray:
    props = scheme.propagators
    if len(props) == 1:
        return np.linalg.matrix_power(props[0], scheme.steps)
    out = np.eye(scheme.dim, dtype=complex)
    for u in props:
        out = u @ out
    return out


def trajectory_count(steps: int, channels: int, max_jumps: int) -> int:
    return sum(math.comb(steps, n) * channels ** n for n in range(max_jumps + 1))


def _backward_propagators(scheme: JumpScheme) -> np.ndarray:
    """B[m] = W0(N-1) ... W0(m); B[N] = 1."""
    n, d = scheme.steps, scheme.dim
    out = np.empty((n + 1, d, d), dtype=complex)
    out[n] = np.eye(d)
    for m in range(n - 1, -1, -1):
        out[m] = out[m + 1] @ scheme.w0(m)
    return out


def enumerate_trajectories(scheme: JumpScheme, psi0, max_jumps: int,
                           budget: int = DEFAULT_BUDGET) -> list[TrajectoryRecord]:
    """Every trajectory with at most ``max_jumps`` jumps, in lexicographic jump order."""
    if max_jumps < 0:
        raise DomainError("max_jumps must be >= 0")
    count = trajectory_count(scheme.steps, scheme.channels, max_jumps)
    if count > budget:
        raise BudgetError(f"{count} trajectories exceed the enumeration budget of {budget}")
    psi0 = np.asarray(psi0, dtype=complex)
    back = _backward_propagators(scheme)
    records: list[TrajectoryRecord] = []

    def visit(psi, m, seq):
        final = back[m] @ psi
        records.append(TrajectoryRecord(seq, final, float(np.real(np.vdot(final, final)))))
        if len(seq) == max_jumps:
            return
        state = psi
        for step in range(m, scheme.steps):
            for k, w in enumerate(scheme.jump_ops, start=1):
                visit(w @ state, step + 1, seq + ((step, k),))
            state = scheme.w0(step) @ state

    visit(psi0, 0, ())
    return records


def enumerated_density(scheme: JumpScheme, psi0, max_jumps: int):
    """Sum of |psi><psi| over the same trajectories ``enumerate_trajectories`` lists.

    Trajectories are grouped by jump count and carried as unnormalized
    density matrices, so the cost is linear in the number of steps.
    Returns ``(rho, weights)`` with ``weights[n]`` the total probability of
    exactly ``n`` jumps.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    layers = [np.outer(psi0, psi0.conj())] + [np.zeros((scheme.dim,) * 2, complex)] * max_jumps
    ops = scheme.jump_ops
    for m in range(scheme.steps):
        u = scheme.w0(m)
        new = []
        for n, d in enumerate(layers):
            nxt = u @ d @ u.conj().T
            if n > 0:
                prev = layers[n - 1]
                for w in ops:
                    nxt = nxt + w @ prev @ w.conj().T
            new.append(nxt)
        layers = new
    rho = sum(layers)
    weights = [float(np.real(np.trace(d))) for d in layers]
    return rho, weights


def trajectory_seed(seed: int, index: int) -> np.random.SeedSequence:
    """Per-trajectory stream: SeedSequence over the pair (master seed, index)."""
    return np.random.SeedSequence([int(seed), int(index)])


def sample_trajectories(scheme: JumpScheme, psi0, n_traj: int, seed: int) -> list[TrajectoryRecord]:
    """Monte Carlo unraveling with one uniform draw per trajectory and step.

    Trajectory ``i`` draws from ``trajectory_seed(seed, i)`` only, so a
    trajectory is reproducible on its own. States are renormalized each step
    and the final state is scaled to squared norm ``1 / n_traj``.
    """
    if n_traj < 1:
        raise DomainError("n_traj must be >= 1")
    psi0 = core.normalized(psi0)
    ops = scheme.jump_ops
    records: list[TrajectoryRecord] = []
    scale = 1.0 / math.sqrt(n_traj)
    for lo in range(0, n_traj, SAMPLE_CHUNK):
        hi = min(n_traj, lo + SAMPLE_CHUNK)
        draws = np.stack([np.random.default_rng(trajectory_seed(seed, i)).random(scheme.steps)
                          for i in range(lo, hi)])
        psi = np.tile(psi0, (hi - lo, 1))
        jumps: list[list[tuple[int, int]]] = [[] for _ in range(hi - lo)]
        for m in range(scheme.steps):
            cands = np.stack([psi @ scheme.w0(m).T] + [psi @ w.T for w in ops])
            probs = np.sum(np.abs(cands) ** 2, axis=2)  # (channels + 1, B)
            cum = np.cumsum(probs, axis=0)
            cum /= cum[-1]
            choice = np.sum(draws[:, m][None, :] >= cum[:-1], axis=0)
            chosen = cands[choice, np.arange(hi - lo)]
            psi = chosen / np.linalg.norm(chosen, axis=1, keepdims=True)
            for b in np.flatnonzero(choice):
                jumps[b].append((m, int(choice[b])))
        for b in range(hi - lo):
            final = psi[b] * scale
            records.append(TrajectoryRecord(tuple(jumps[b]), final, 1.0 / n_traj))
    return records


def reconstruct_density(records: Sequence[TrajectoryRecord]) -> np.ndarray:
    """Incoherent sum of the records' final states; its trace is the captured weight."""
    if not records:
        raise DomainError("cannot reconstruct a density matrix from no trajectories")
    states = np.stack([r.final_state for r in records])
    return states.T @ states.conj()


@dataclass(frozen=True)
class VisibilityFactor:
    """Measured overall magnitude of the no-jump holonomy.

    ``magnitude`` is what the propagation gives (norm decay, ``exp(-alpha T/2)``
    for kappa = alpha*1); ``literal_magnitude`` is the literal positive-exponent
    factor, kept side by side because the two differ in sign of the exponent.
    """

    magnitude: float
    model_class: KappaKind
    predicted: float | None = None
    literal_magnitude: float | None = None
    exponent_sign: int = -1


@dataclass(frozen=True)
class NoJumpHolonomy:
    subspace_map: np.ndarray
    leakage: float
    visibility: VisibilityFactor
    holonomy: np.ndarray | None = None
    distance: float | None = None


def visibility_prediction(kind: KappaKind, alpha: float, total_time: float,
                          energy: float = 0.0) -> tuple[float, float]:
    """(decay implied by H_eff, literal positive-exponent factor)."""
    rate = alpha if kind is KappaKind.IDENTITY else alpha * energy
    return math.exp(-rate * total_time / 2), math.exp(rate * total_time / 2)


def nojump_holonomy(scheme: JumpScheme, holonomy_u=None) -> NoJumpHolonomy:
    """Restrict the no-jump propagator to the tracked subspace of a family run.

    Leakage is ``||(1 - Pi_end) G Phi_start||^2 / sigma_min(G Phi_start)^2``,
    the worst-case fraction of a code state that ends outside the subspace.
    When ``holonomy_u`` is given, the distance to ``visibility * U`` is
    reported with the global (dynamical) phase removed.
    """
    model = scheme.model
    family: IsospectralFamily = model.family
    path: ParameterPath = model.path
    if family is None:
        raise DomainError("no-jump holonomy needs a family-driven model")
    g = nojump_propagator(scheme)
    phi_start = family.frame_unitary(path.at(0.0)) @ family.basis
    phi_end = family.frame_unitary(path.at(1.0)) @ family.basis
    moved = g @ phi_start
    sub = phi_end.conj().T @ moved
    outside = moved - phi_end @ sub
    sv = np.linalg.svd(moved, compute_uv=False)
    leakage = core.operator_norm(outside) ** 2 / sv[-1] ** 2
    magnitude = float(abs(np.linalg.det(sub)) ** (1.0 / family.degeneracy))
    cls = classify_kappa(model)
    predicted = literal = None
    if cls.kind is not KappaKind.OTHER:
        predicted, literal = visibility_prediction(cls.kind, cls.alpha, scheme.total_time,
                                                 family.energy)
    vis = VisibilityFactor(magnitude, cls.kind, predicted, literal)
    distance = None
    if holonomy_u is not None and predicted is not None:
        distance = core.phase_aligned_distance(sub, predicted * np.asarray(holonomy_u))
    return NoJumpHolonomy(sub, leakage, vis, holonomy_u, distance)
