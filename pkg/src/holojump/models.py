"""Built-in model catalog.

Sphere families use the single-valued frame
``V = exp(-i phi G3) exp(-i theta G2) exp(+i phi G3)`` with parameters
``(theta, phi)``; ``V = 1`` at ``theta = 0``.

Gate families encode an ``n``-dimensional code space next to ``n`` partner
levels at energy ``epsilon``: ``H0 = epsilon * |1><1| (x) 1_n``. For a code
generator ``K`` (hermitian, ``K^2 = 1``) the pair ``G2 = sigma2/2 (x) 1``,
``G3 = -sigma3/2 (x) K`` makes every eigenvector of ``K`` a spin-1/2 Berry
problem with its own partner, so a latitude loop of solid angle ``Omega``
gives the holonomy ``exp(i (Omega/2) K)`` on the code space.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import core
from .errors import DomainError
from .holonomy import FrameFactor, IsospectralFamily, ParameterPath

TWO_PI = 2.0 * math.pi


def spin_half_family() -> IsospectralFamily:
    """H0 = sigma3/2 tracked at E = +1/2; holonomy of a loop is exp(-i Omega/2)."""
    g2 = core.SIGMA2 / 2
    g3 = core.SIGMA3 / 2
    factors = [FrameFactor(1, g3, 1.0), FrameFactor(0, g2, 1.0), FrameFactor(1, g3, -1.0)]
    fam = IsospectralFamily(core.SIGMA3 / 2, factors, energy=0.5, n_params=2,
                            name="spin_half", code_generators=[np.eye(1) * -1.0],
                            period=(0.0, TWO_PI))
    return fam


def gate_family(code_generators: Sequence[np.ndarray], epsilon: float = 1.0,
                name: str = "gate") -> IsospectralFamily:
    """Family whose sphere loops in parameter pair ``a`` realize exp(i t K_a).

    Parameters are ordered ``(theta_0, phi_0, theta_1, phi_1, ...)``.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    gens = [core.as_matrix(k) for k in code_generators]
    if not gens:
        raise DomainError("need at least one code generator")
    n = gens[0].shape[0]
    for k in gens:
        if k.shape != (n, n) or not core.is_hermitian(k) \
                or not np.allclose(k @ k, np.eye(n), atol=1e-12):
            raise DomainError("code generators must be hermitian involutions of equal size")
    h0 = epsilon * core.tensor(np.diag([0.0, 1.0]), np.eye(n))
    g2 = core.tensor(core.SIGMA2 / 2, np.eye(n))
    factors = []
    for a, k in enumerate(gens):
        g3 = core.tensor(-core.SIGMA3 / 2, k)
        theta, phi = 2 * a, 2 * a + 1
        factors += [FrameFactor(phi, g3, 1.0), FrameFactor(theta, g2, 1.0),
                    FrameFactor(phi, g3, -1.0)]
    basis = np.eye(2 * n, dtype=complex)[:, :n]
    period = tuple(TWO_PI if i % 2 else 0.0 for i in range(2 * len(gens)))
    return IsospectralFamily(h0, factors, energy=0.0, n_params=2 * len(gens), basis=basis,
                             name=name, code_generators=gens, period=period)


def qubit_family(epsilon: float = 1.0) -> IsospectralFamily:
    """One logical qubit; parameter pairs 0, 1, 2 drive sigma1, sigma2, sigma3 gates."""
    return gate_family([core.SIGMA1, core.SIGMA2, core.SIGMA3], epsilon, name="qubit")


def two_qubit_family(axes: tuple[int, int] = (1, 1), epsilon: float = 1.0) -> IsospectralFamily:
    """Two logical qubits with a single parameter pair driving sigma_i (x) sigma_j."""
    k = core.tensor(core.pauli(axes[0]), core.pauli(axes[1]))
    return gate_family([k], epsilon, name=f"two_qubit_{axes[0]}{axes[1]}")


def lift_code_operator(family: IsospectralFamily, op) -> np.ndarray:
    """Embed a code-space operator as ``1_2 (x) op`` on a gate family's full space.

    Code and partner levels see the same operator, so a unitary code operator
    stays unitary and ``op^dagger op = alpha * 1`` survives the lift.
    """
    op = core.as_matrix(op)
    n = family.degeneracy
    if op.shape != (n, n):
        raise DomainError(f"operator must be {n}x{n} for family {family.name}")
    if family.dim == n:
        return op
    return core.tensor(np.eye(family.dim // n), op)


def sphere_point(family: IsospectralFamily, slot: int, theta: float, phi: float) -> np.ndarray:
    lam = np.zeros(family.n_params)
    lam[2 * slot] = theta
    lam[2 * slot + 1] = phi
    return lam


def latitude_loop(family: IsospectralFamily, theta: float, steps: int, slot: int = 0,
                  phi_start: float = 0.0, turns: float = 1.0) -> ParameterPath:
    """Latitude circle at polar angle ``theta`` in parameter pair ``slot``."""
    if steps < 1:
        raise DomainError("steps must be >= 1")

    def func(s, theta=theta):
        return sphere_point(family, slot, theta, phi_start + TWO_PI * turns * s)

    samples = np.array([func(s) for s in np.linspace(0.0, 1.0, steps + 1)])
    closed = float(turns).is_integer()
    return ParameterPath(samples, closed=closed, period=family.period, func=func)


def polar_angle_for_gate(angle: float) -> float:
    """Polar angle whose latitude loop has Omega/2 = angle."""
    if not 0.0 <= angle <= TWO_PI:
        raise DomainError("gate angle must lie in [0, 2*pi] for a single latitude loop")
    return math.acos(1.0 - angle / math.pi)


def gate_loop(family: IsospectralFamily, angle: float, steps: int, slot: int = 0,
              reparam=None) -> ParameterPath:
    """Uniform latitude loop realizing exp(i angle K_slot) on a gate family.

    ``reparam`` optionally maps [0, 1] monotonically onto itself; it changes
    the speed along the loop, not its geometry.
    """
    theta = polar_angle_for_gate(angle)
    if reparam is None:
        return latitude_loop(family, theta, steps, slot)

    def func(s):
        return sphere_point(family, slot, theta, TWO_PI * reparam(s))

    samples = np.array([func(s) for s in np.linspace(0.0, 1.0, steps + 1)])
    return ParameterPath(samples, closed=True, period=family.period, func=func)


def smooth_ramp(s: float) -> float:
    """Monotone map of [0, 1] with zero velocity at both ends."""
    return s - math.sin(TWO_PI * s) / TWO_PI


FAMILIES = {
    "spin_half": lambda **kw: spin_half_family(),
    "qubit": lambda epsilon=1.0, **kw: qubit_family(epsilon),
    "two_qubit": lambda epsilon=1.0, axes=(1, 1), **kw: two_qubit_family(tuple(axes), epsilon),
}
