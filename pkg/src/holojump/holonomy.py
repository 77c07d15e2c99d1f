"""Isospectral Hamiltonian families, control paths and path-ordered holonomies.

Conventions
-----------
The frame of the tracked level at ``lam`` is the ``N x n`` matrix
``Phi(lam) = V(lam) @ basis`` whose columns are the frame vectors. The
connection sample along a direction ``d`` is ``a = Phi^dagger (d . grad) Phi``
(entry ``a[g, b] = <phi_g | d phi_b>``) and the overlap is
``p = Phi^dagger Phi``. Coefficients ``x`` of a parallel-transported state
``Phi x`` obey ``dx = -p^{-1} a x``, so every holonomy matrix acts on column
vectors of frame coefficients and later path segments multiply from the left.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import core
from .errors import DomainError, RangeError, ShapeError

FD_STEP = 1e-5
PINV_RCOND = 1e-10

_path_ids = itertools.count()


@dataclass(frozen=True)
class FrameFactor:
    """One factor ``exp(-i * sign * lam[param] * generator)`` of V(lam)."""

    param: int
    generator: np.ndarray
    sign: float = 1.0

    def __post_init__(self):
        g = core.as_matrix(self.generator)
        if not core.is_hermitian(g):
            raise DomainError("frame generators must be hermitian")
        w, u = core.eig_hermitian(g)
        object.__setattr__(self, "generator", g)
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_u", u)

    def exp_batch(self, lams: np.ndarray) -> np.ndarray:
        t = self.sign * lams[:, self.param]
        phases = np.exp(-1j * t[:, None] * self._w[None, :])
        return (self._u[None, :, :] * phases[:, None, :]) @ self._u.conj().T


class IsospectralFamily:
    """H(lam) = V(lam) H0 V(lam)^dagger with V an ordered product of exponentials.

    ``energy`` selects the degenerate level of ``h0`` that is tracked; the
    level's eigenbasis (or an explicit ``basis``) spans the code space at the
    basepoint ``lam = 0`` where ``V = 1``.
    """

    def __init__(self, h0, factors: Sequence[FrameFactor], energy: float, *,
                 n_params: int | None = None, basis=None, name: str = "family",
                 code_generators: Sequence[np.ndarray] = (), period=None,
                 gap_tol: float = core.DEGENERACY_TOL):
        self.h0 = core.as_matrix(h0)
        if not core.is_hermitian(self.h0):
            raise DomainError("h0 must be hermitian")
        self.factors = tuple(factors)
        dim = self.h0.shape[0]
        for f in self.factors:
            if f.generator.shape != (dim, dim):
                raise ShapeError("generator dimension does not match h0")
        self.n_params = n_params if n_params is not None else (
            1 + max((f.param for f in self.factors), default=-1))
        self.energy = float(energy)
        self.name = name
        self.code_generators = tuple(core.as_matrix(k) for k in code_generators)
        self.period = None if period is None else tuple(float(x) for x in period)
        evals, evecs = core.eig_hermitian(self.h0)
        self.spectrum = evals
        level = [i for i, e in enumerate(evals) if abs(e - self.energy) <= gap_tol]
        if not level:
            raise DomainError(f"energy {energy} not in spectrum {evals}")
        if basis is None:
            basis = evecs[:, level]
        else:
            basis = np.asarray(basis, dtype=complex)
            if basis.ndim != 2 or basis.shape[0] != dim:
                raise ShapeError("basis must be an N x n matrix")
            resid = self.h0 @ basis - self.energy * basis
            if np.max(np.abs(resid)) > 1e-9:
                raise DomainError("basis vectors are not eigenvectors at the selected energy")
        self.basis = basis

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    @property
    def degeneracy(self) -> int:
        return self.basis.shape[1]

    def _check_lams(self, lams) -> np.ndarray:
        lams = np.atleast_2d(np.asarray(lams, dtype=float))
        if lams.shape[1] != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {lams.shape[1]}")
        return lams

    def frame_unitaries(self, lams) -> np.ndarray:
        lams = self._check_lams(lams)
        out = np.broadcast_to(np.eye(self.dim, dtype=complex), (len(lams), self.dim, self.dim))
        for f in self.factors:
            out = out @ f.exp_batch(lams)
        return out

    def frame_unitary(self, lam) -> np.ndarray:
        return self.frame_unitaries(lam)[0]

    def hamiltonian(self, lam) -> np.ndarray:
        v = self.frame_unitary(lam)
        return v @ self.h0 @ v.conj().T

    def hamiltonians(self, lams) -> np.ndarray:
        v = self.frame_unitaries(lams)
        return v @ self.h0 @ core.dagger(v)

    def frame_derivatives(self, lams, directions) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(V, dV)`` stacks with dV the analytic directional derivative."""
        lams = self._check_lams(lams)
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        exps = [f.exp_batch(lams) for f in self.factors]
        eye = np.broadcast_to(np.eye(self.dim, dtype=complex), (len(lams), self.dim, self.dim))
        prefix = [eye]
        for e in exps:
            prefix.append(prefix[-1] @ e)
        suffix = [eye]
        for e in reversed(exps):
            suffix.append(e @ suffix[-1])
        suffix.reverse()  # suffix[j] = exps[j] @ ... @ exps[-1]
        dv = np.zeros_like(prefix[-1])
        for j, f in enumerate(self.factors):
            coeff = directions[:, f.param]
            if not np.any(coeff):
                continue
            gen = -1j * f.sign * f.generator
            dv = dv + coeff[:, None, None] * (prefix[j] @ gen @ suffix[j])
        return prefix[-1], dv


@dataclass(frozen=True)
class LocalFrame:
    vectors: np.ndarray  # N x n, columns are frame vectors
    orthonormal: bool

    def gram(self) -> np.ndarray:
        return self.vectors.conj().T @ self.vectors


@dataclass(frozen=True)
class ConnectionSample:
    a: np.ndarray
    p: np.ndarray


@dataclass(frozen=True)
class ParameterPath:
    """Discretized curve in control space; ``samples`` has shape (M, n_params).

    ``period`` lists the period of each coordinate (0 for non-periodic ones);
    a closed path must end on its first sample up to whole periods, so a
    latitude loop can run its azimuth from 0 to 2*pi.
    """

    samples: np.ndarray
    closed: bool = False
    markers: tuple[int, ...] = ()
    period: tuple[float, ...] | None = None
    func: Callable[[float], np.ndarray] | None = field(default=None, compare=False)
    path_id: int = field(default_factory=lambda: next(_path_ids), compare=False)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if s.shape[0] < 2:
            raise ShapeError("a path needs at least two samples")
        if self.period is not None:
            period = tuple(float(x) for x in self.period)
            if len(period) != s.shape[1]:
                raise ShapeError("period needs one entry per coordinate")
            object.__setattr__(self, "period", period)
        if self.closed and not _same_point(s[0], s[-1], self.period):
            raise DomainError("closed path must end exactly at its first sample")
        markers = tuple(int(m) for m in self.markers)
        if any(b <= a for a, b in zip(markers, markers[1:])):
            raise DomainError("markers must be strictly increasing")
        if markers and (markers[0] < 0 or markers[-1] >= s.shape[0]):
            raise RangeError("marker outside the path")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "markers", markers)

    @classmethod
    def from_function(cls, func, steps: int, closed: bool = False,
                      period=None) -> "ParameterPath":
        """Sample ``func`` on ``steps + 1`` uniform points of [0, 1]."""
        s = np.linspace(0.0, 1.0, steps + 1)
        samples = np.array([np.atleast_1d(func(x)) for x in s], dtype=float)
        if closed and period is None:
            samples[-1] = samples[0]
        return cls(samples, closed=closed, period=period, func=func)

    @property
    def steps(self) -> int:
        return self.samples.shape[0] - 1

    def at(self, s: float) -> np.ndarray:
        """Point at fraction ``s`` of the path (uniform in sample index)."""
        if self.func is not None:
            return np.atleast_1d(np.asarray(self.func(s), dtype=float))
        x = np.clip(s, 0.0, 1.0) * self.steps
        k = min(int(np.floor(x)), self.steps - 1)
        t = x - k
        return (1 - t) * self.samples[k] + t * self.samples[k + 1]

    def reversed(self) -> "ParameterPath":
        func = None if self.func is None else (lambda s, f=self.func: f(1.0 - s))
        return ParameterPath(self.samples[::-1].copy(), closed=self.closed,
                             period=self.period, func=func)

    def then(self, other: "ParameterPath") -> "ParameterPath":
        """Concatenate: traverse self, then other (which must start where self ends)."""
        if not np.allclose(self.samples[-1], other.samples[0], atol=1e-12):
            raise DomainError("paths do not join")
        samples = np.vstack([self.samples, other.samples[1:]])
        closed = _same_point(samples[0], samples[-1], self.period)
        return ParameterPath(samples, closed=closed, period=self.period)


def _same_point(x: np.ndarray, y: np.ndarray, period) -> bool:
    if period is None:
        return bool(np.array_equal(x, y))
    for a, b, per in zip(x, y, period):
        d = b - a
        if per:
            d -= round(d / per) * per
        if abs(d) > 1e-12:
            return False
    return True


@dataclass(frozen=True)
class HolonomyResult:
    u: np.ndarray
    path_id: int
    step_count: int
    scheme_order: int = 2
    rank_deficient: bool = False
    # map from initial frame coefficients to final coefficients in the
    # unjumped basis; equals u unless jumps changed the frame
    physical: np.ndarray | None = None

    @property
    def physical_map(self) -> np.ndarray:
        return self.u if self.physical is None else self.physical


def frame_at(family: IsospectralFamily, lam) -> LocalFrame:
    v = family.frame_unitary(lam)
    return LocalFrame(v @ family.basis, orthonormal=True)


def frames(family: IsospectralFamily, lams) -> np.ndarray:
    return family.frame_unitaries(lams) @ family.basis


def connection_batch(family: IsospectralFamily, lams, directions,
                     method: str = "analytic", h: float = FD_STEP):
    """Stacked connection and overlap matrices at many points."""
    lams = family._check_lams(lams)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if method == "analytic":
        v, dv = family.frame_derivatives(lams, directions)
        phi = v @ family.basis
        dphi = dv @ family.basis
    elif method == "fd":
        phi = frames(family, lams)
        dphi = (frames(family, lams + h * directions)
                - frames(family, lams - h * directions)) / (2 * h)
    else:
        raise ValueError(f"unknown connection method {method!r}")
    phi_h = core.dagger(phi)
    return phi_h @ dphi, phi_h @ phi


def connection_at(family: IsospectralFamily, lam, direction,
                  method: str = "analytic", h: float = FD_STEP) -> ConnectionSample:
    a, p = connection_batch(family, lam, direction, method=method, h=h)
    return ConnectionSample(a[0], p[0])


def _segment_data(family: IsospectralFamily, path: ParameterPath, method: str):
    lam = path.samples
    mids = 0.5 * (lam[:-1] + lam[1:])
    dirs = lam[1:] - lam[:-1]
    return connection_batch(family, mids, dirs, method=method)


def _transport_factors(a: np.ndarray, p: np.ndarray, coeff: np.ndarray | None):
    """Per-segment propagators exp(-p^+ a) in the frame ``Phi @ coeff``."""
    rank_deficient = False
    if coeff is not None:
        a = coeff.conj().T @ a @ coeff
        p = coeff.conj().T @ p @ coeff
        sv = np.linalg.svd(coeff, compute_uv=False)
        rank_deficient = bool(sv[-1] <= PINV_RCOND * sv[0])
        p_inv = np.linalg.pinv(p, rcond=PINV_RCOND, hermitian=True)
        gen = p_inv @ a
    else:
        gen = np.linalg.solve(p, a)
    return core.matexp(-gen), rank_deficient


def ordered_product(factors: np.ndarray, n: int) -> np.ndarray:
    u = np.eye(n, dtype=complex)
    for f in factors:
        u = f @ u
    return u


def _check_family_path(family: IsospectralFamily, path: ParameterPath):
    if path.samples.shape[1] != family.n_params:
        raise ShapeError("path dimension does not match the family's parameters")


def holonomy(family: IsospectralFamily, path: ParameterPath,
             method: str = "analytic") -> HolonomyResult:
    """Midpoint product-of-exponentials approximation of P exp(-int p^-1 a)."""
    _check_family_path(family, path)
    a, p = _segment_data(family, path, method)
    factors, _ = _transport_factors(a, p, None)
    u = ordered_product(factors, family.degeneracy)
    return HolonomyResult(u=u, path_id=path.path_id, step_count=path.steps)


@dataclass(frozen=True)
class Jump:
    """Jump with operator ``w`` applied at sample ``index`` of a path.

    ``w`` acts on frame coefficients (n x n), or is a full-space operator in
    the co-moving frame (N x N), which is restricted to the tracked basis.
    ``alpha`` defaults to ``tr(w^dagger w) / n``.
    """

    index: int
    w: np.ndarray
    alpha: float | None = None


def _as_jump(j) -> Jump:
    return j if isinstance(j, Jump) else Jump(*j)


def restrict_to_code(family: IsospectralFamily, w) -> np.ndarray:
    w = core.as_matrix(w)
    n = family.degeneracy
    if w.shape == (n, n):
        return w
    if w.shape == (family.dim, family.dim):
        return family.basis.conj().T @ w @ family.basis
    raise ShapeError(f"jump operator shape {w.shape} fits neither n={n} nor N={family.dim}")


def jump_is_isometric(w: np.ndarray, alpha: float, tol: float = 1e-8) -> bool:
    """True when w^dagger w = alpha * 1 on the code space."""
    n = w.shape[0]
    return alpha > 0 and bool(np.max(np.abs(w.conj().T @ w - alpha * np.eye(n))) <= tol)


def _normalize_jumps(family: IsospectralFamily, path: ParameterPath, jumps):
    out = []
    for j in map(_as_jump, jumps):
        if not 0 <= j.index <= path.steps:
            raise RangeError(f"jump index {j.index} outside path of {path.steps} steps")
        w = restrict_to_code(family, j.w)
        alpha = j.alpha
        if alpha is None:
            alpha = float(np.real(np.trace(w.conj().T @ w))) / w.shape[0]
        out.append(Jump(j.index, w, float(alpha)))
    return sorted(out, key=lambda j: j.index)


def _segments(path: ParameterPath, cut_points: Sequence[int]):
    bounds = sorted({0, *cut_points, path.steps})
    return list(zip(bounds[:-1], bounds[1:]))


def holonomy_with_jumps(family: IsospectralFamily, path: ParameterPath, jumps,
                        method: str = "direct") -> HolonomyResult:
    """Holonomy of a trajectory with instantaneous jumps on the code space.

    ``method="direct"`` transports the jumped frame ``Phi @ (W_l ... W_1)``
    with its own overlap matrix (pseudo-inverted, so rank-deficient jumps
    such as sigma_plus are handled). ``method="composed"`` multiplies
    unjumped segment holonomies conjugated by the accumulated jump,
    ``(1/alpha) C^dagger T C``; it needs every jump to satisfy
    ``W^dagger W = alpha * 1``.
    Several jumps may share an index; they act in list order.
    """
    _check_family_path(family, path)
    jumps = _normalize_jumps(family, path, jumps)
    n = family.degeneracy
    a, p = _segment_data(family, path, "analytic")
    if not jumps:
        factors, _ = _transport_factors(a, p, None)
        u = ordered_product(factors, n)
        return HolonomyResult(u=u, path_id=path.path_id, step_count=path.steps)

    cuts = sorted({j.index for j in jumps})
    coeff = np.eye(n, dtype=complex)
    alpha_total = 1.0
    u = np.eye(n, dtype=complex)
    rank_deficient = False
    for start, stop in _segments(path, cuts):
        for j in (j for j in jumps if j.index == start):
            coeff = j.w @ coeff
            alpha_total *= j.alpha
        seg_a, seg_p = a[start:stop], p[start:stop]
        if method == "direct":
            factors, deficient = _transport_factors(seg_a, seg_p, coeff)
            rank_deficient |= deficient
            seg_u = ordered_product(factors, n)
        elif method == "composed":
            if not jump_is_isometric(coeff, alpha_total):
                raise DomainError("composed route needs W^dagger W = alpha * 1 for every jump")
            factors, _ = _transport_factors(seg_a, seg_p, None)
            seg_u = coeff.conj().T @ ordered_product(factors, n) @ coeff / alpha_total
        else:
            raise ValueError(f"unknown method {method!r}")
        u = seg_u @ u
    for j in (j for j in jumps if j.index == path.steps):
        coeff = j.w @ coeff
        alpha_total *= j.alpha
    physical = coeff @ u / np.sqrt(alpha_total) if alpha_total > 0 else coeff @ u
    return HolonomyResult(u=u, path_id=path.path_id, step_count=path.steps,
                          rank_deficient=rank_deficient, physical=physical)


def segment_transport(family: IsospectralFamily, path: ParameterPath, start: int,
                      stop: int, coeff=None) -> tuple[np.ndarray, bool]:
    """Ordered exponential over samples ``start..stop`` in the frame ``Phi @ coeff``."""
    if not 0 <= start <= stop <= path.steps:
        raise RangeError("segment outside path")
    lam = path.samples[start:stop + 1]
    mids = 0.5 * (lam[:-1] + lam[1:])
    dirs = lam[1:] - lam[:-1]
    n = family.degeneracy
    if start == stop:
        return np.eye(n, dtype=complex), False
    a, p = connection_batch(family, mids, dirs)
    c = None if coeff is None else restrict_to_code(family, coeff)
    factors, deficient = _transport_factors(a, p, c)
    return ordered_product(factors, n), deficient


def gauge_transform(result: HolonomyResult, g) -> HolonomyResult:
    g = core.as_matrix(g)
    if not core.is_unitary(g, 1e-10):
        raise DomainError("gauge transformation must be unitary")
    if g.shape != result.u.shape:
        raise ShapeError("gauge matrix does not match holonomy dimension")
    return HolonomyResult(u=g @ result.u @ g.conj().T, path_id=result.path_id,
                          step_count=result.step_count, scheme_order=result.scheme_order,
                          rank_deficient=result.rank_deficient)
