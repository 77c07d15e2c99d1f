"""Dense Lindblad master-equation integrator used as ground truth."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import core
from .errors import DomainError, IntegrationError, ShapeError
from .holonomy import IsospectralFamily, ParameterPath

POSITIVITY_FLOOR = -1e-6
KAPPA_TOL = 1e-9


class LindbladModel:
    """Hamiltonian source plus Lindblad operators (rates folded into the operators).

    The Hamiltonian is either a fixed matrix or ``family.hamiltonian`` along
    ``path`` with the path fraction mapped affinely onto ``[0, total_time]``.
    """

    def __init__(self, lindblad_ops: Sequence = (), hamiltonian=None, *,
                 family: IsospectralFamily | None = None, path: ParameterPath | None = None,
                 total_time: float | None = None):
        if (hamiltonian is None) == (family is None):
            raise DomainError("give either a fixed hamiltonian or a family with a path")
        if family is not None:
            if path is None or total_time is None or total_time <= 0:
                raise DomainError("a family hamiltonian needs a path and a positive total_time")
            dim = family.dim
            self.hamiltonian = None
        else:
            self.hamiltonian = core.as_matrix(hamiltonian)
            if not core.is_hermitian(self.hamiltonian):
                raise DomainError("hamiltonian must be hermitian")
            dim = self.hamiltonian.shape[0]
        self.family = family
        self.path = path
        self.total_time = None if total_time is None else float(total_time)
        self.lindblad_ops = tuple(core.as_matrix(l) for l in lindblad_ops)
        for l in self.lindblad_ops:
            if l.shape != (dim, dim):
                raise ShapeError(f"Lindblad operator shape {l.shape} does not match dimension {dim}")
        self.dim = dim
        self.kappa = sum((l.conj().T @ l for l in self.lindblad_ops),
                         np.zeros((dim, dim), dtype=complex))
        if np.min(np.linalg.eigvalsh(self.kappa)) < -1e-10:
            raise DomainError("sum of L^dagger L is not positive semidefinite")

    @property
    def time_dependent(self) -> bool:
        return self.family is not None

    def hamiltonian_at(self, t: float) -> np.ndarray:
        if self.family is None:
            return self.hamiltonian
        return self.family.hamiltonian(self.path.at(t / self.total_time))

    def hamiltonians_at(self, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if self.family is None:
            return np.broadcast_to(self.hamiltonian, (len(times), self.dim, self.dim))
        lams = np.array([self.path.at(t / self.total_time) for t in times])
        return self.family.hamiltonians(lams)

    def with_ops(self, ops) -> "LindbladModel":
        return LindbladModel(ops, self.hamiltonian, family=self.family, path=self.path,
                             total_time=self.total_time)


def _dissipator(ops, kappa, rho):
    out = -0.5 * (kappa @ rho + rho @ kappa)
    for l in ops:
        out = out + l @ rho @ l.conj().T
    return out


def _rhs(h, ops, kappa, rho):
    return -1j * (h @ rho - rho @ h) + _dissipator(ops, kappa, rho)


def lindblad_rhs(model: LindbladModel, rho, t: float = 0.0) -> np.ndarray:
    rho = core.as_matrix(rho)
    if rho.shape != (model.dim, model.dim):
        raise ShapeError(f"density matrix shape {rho.shape} does not match model dimension {model.dim}")
    return _rhs(model.hamiltonian_at(t), model.lindblad_ops, model.kappa, rho)


def evolve(model: LindbladModel, rho0, t_final: float, dt: float,
           check_positivity: bool = True) -> np.ndarray:
    """Classical RK4 integration of the master equation from 0 to ``t_final``.

    The step is shrunk to ``t_final / ceil(t_final / dt)``. Each step is
    symmetrized; a negative eigenvalue below -1e-6 raises IntegrationError
    rather than being projected away.
    """
    rho = core.validate_density(rho0)
    if rho.shape != (model.dim, model.dim):
        raise ShapeError("initial state does not match model dimension")
    if t_final < 0 or dt <= 0:
        raise DomainError("need t_final >= 0 and dt > 0")
    if t_final == 0:
        return rho.copy()
    if dt > t_final:
        raise DomainError("dt must not exceed t_final")
    steps = math.ceil(t_final / dt - 1e-9)
    h = t_final / steps
    stage_times = np.arange(steps)[:, None] * h + np.array([0.0, 0.5 * h, h])[None, :]
    hams = model.hamiltonians_at(stage_times.ravel()).reshape(steps, 3, model.dim, model.dim)
    ops, kappa = model.lindblad_ops, model.kappa
    for m in range(steps):
        h0, hm, h1 = hams[m]
        k1 = _rhs(h0, ops, kappa, rho)
        k2 = _rhs(hm, ops, kappa, rho + 0.5 * h * k1)
        k3 = _rhs(hm, ops, kappa, rho + 0.5 * h * k2)
        k4 = _rhs(h1, ops, kappa, rho + h * k3)
        rho = rho + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        if check_positivity:
            low = float(np.linalg.eigvalsh(rho)[0])
            if low < POSITIVITY_FLOOR:
                raise IntegrationError(
                    f"density matrix lost positivity at step {m} (min eigenvalue {low:.3g});"
                    " reduce dt")
    return rho


class KappaKind(enum.Enum):
    IDENTITY = "identity"
    PROPORTIONAL_TO_H = "proportional_to_h"
    OTHER = "other"


@dataclass(frozen=True)
class KappaClass:
    kind: KappaKind
    alpha: float | None = None
    # kappa = a*1 + b*H with both terms present: the sigma_plus/minus branch,
    # where the eigenbasis of H is preserved but kappa is not a single multiple
    sigma_pm_branch: bool = False
    affine: tuple[float, float] | None = None


def _fit(kappa: np.ndarray, h: np.ndarray, tol: float):
    """(alpha with kappa = alpha*H or None, affine (a, b) with kappa = a + b*H or None)."""
    n = h.shape[0]
    hh = float(np.real(np.vdot(h, h)))
    if hh == 0:
        return None, None
    alpha = float(np.real(np.vdot(h, kappa))) / hh
    prop = alpha if np.max(np.abs(kappa - alpha * h)) <= tol else None
    basis = np.stack([np.eye(n).ravel(), h.ravel()], axis=1)
    coef, *_ = np.linalg.lstsq(basis, kappa.ravel(), rcond=None)
    affine = None
    if np.max(np.abs(basis @ coef - kappa.ravel())) <= tol:
        affine = tuple(float(np.real(c)) for c in coef)
    return prop, affine


def classify_kappa(model: LindbladModel, h0=None, tol: float = KAPPA_TOL,
                   samples: int = 9) -> KappaClass:
    """Test kappa = alpha*1, then kappa = alpha*H, fitting alpha by least squares.

    With ``h0`` the test is against that matrix alone. Otherwise a
    family-driven model is tested against H(t) at ``samples`` times spread
    over the run, and must fit with one alpha (or one affine pair) at all of
    them: a fixed operator is generally not proportional to a rotating H.
    """
    kappa = model.kappa
    n = model.dim
    alpha = float(np.real(np.trace(kappa))) / n
    if np.max(np.abs(kappa - alpha * np.eye(n))) <= tol:
        return KappaClass(KappaKind.IDENTITY, alpha)
    if h0 is not None:
        hams = [core.as_matrix(h0)]
    elif model.time_dependent:
        hams = list(model.hamiltonians_at(np.linspace(0.0, model.total_time, samples)))
    else:
        hams = [model.hamiltonian_at(0.0)]
    fits = [_fit(kappa, h, tol) for h in hams]
    props = [p for p, _ in fits]
    if all(p is not None for p in props) and max(props) - min(props) <= tol:
        return KappaClass(KappaKind.PROPORTIONAL_TO_H, props[0])
    affines = [a for _, a in fits]
    if all(a is not None for a in affines) and \
            np.max(np.abs(np.array(affines) - np.array(affines[0]))) <= tol:
        return KappaClass(KappaKind.OTHER, None, sigma_pm_branch=True, affine=affines[0])
    return KappaClass(KappaKind.OTHER, None)
