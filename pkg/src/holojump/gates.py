"""Holonomic gate set, error channels and robustness verdicts."""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import core, models
from .errors import ConsistencyError, DomainError
from .holonomy import (HolonomyResult, IsospectralFamily, ParameterPath, connection_batch,
                       holonomy, holonomy_with_jumps)
from .lindblad import KappaClass, KappaKind, LindbladModel, classify_kappa

ROBUST_TOL = 1e-6
PREDICTION_TOL = 1e-4
PAULI_LABELS = "IXYZ"


@dataclass(frozen=True)
class GateSpec:
    """Gate exp(i angle K) realized by a latitude loop in parameter pair ``slot``."""

    label: str
    generator: np.ndarray
    angle: float
    family: IsospectralFamily
    loop: ParameterPath
    slot: int = 0

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def ideal(self) -> np.ndarray:
        return core.matexp(1j * self.angle * self.generator)

    def closed_system_error(self) -> float:
        return core.operator_norm(holonomy(self.family, self.loop).u - self.ideal())

    def index_at(self, fraction: float) -> int:
        return int(round(fraction * self.loop.steps))


def single_qubit_gate(axis: int, angle: float, steps: int = 400, epsilon: float = 1.0,
                      reparam=None) -> GateSpec:
    """U_i = exp(i angle sigma_i) on the three-axis qubit family."""
    if axis not in (1, 2, 3):
        raise DomainError("single-qubit axis must be 1, 2 or 3")
    fam = models.qubit_family(epsilon)
    loop = models.gate_loop(fam, angle, steps, slot=axis - 1, reparam=reparam)
    return GateSpec(f"U{axis}", core.pauli(axis), angle, fam, loop, slot=axis - 1)


def two_qubit_gate(axes: tuple[int, int] = (1, 1), angle: float = 0.5, steps: int = 400,
                   epsilon: float = 1.0, reparam=None) -> GateSpec:
    """U_3 = exp(i angle sigma_i (x) sigma_j)."""
    fam = models.two_qubit_family(tuple(axes), epsilon)
    loop = models.gate_loop(fam, angle, steps, slot=0, reparam=reparam)
    k = core.tensor(core.pauli(axes[0]), core.pauli(axes[1]))
    return GateSpec(f"U3[{PAULI_LABELS[axes[0]]}{PAULI_LABELS[axes[1]]}]", k, angle, fam, loop)


@dataclass(frozen=True)
class ErrorChannel:
    """Code-space error operators sharing one rate alpha (per unit time)."""

    ops: tuple[np.ndarray, ...]
    rate: float
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        ops = tuple(core.as_matrix(o) for o in self.ops)
        if not ops:
            raise DomainError("an error channel needs at least one operator")
        if self.rate < 0 or not math.isfinite(self.rate):
            raise DomainError("rate must be finite and non-negative")
        if any(o.shape != ops[0].shape for o in ops):
            raise DomainError("channel operators must share one dimension")
        object.__setattr__(self, "ops", ops)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"op{i}" for i in range(len(ops))))

    def lindblad_ops(self) -> list[np.ndarray]:
        return [math.sqrt(self.rate) * o for o in self.ops]


class ConjugationSign(enum.IntEnum):
    PLUS = 1
    MINUS = -1
    DESTROYED = 0


def _generator(gate) -> np.ndarray:
    if isinstance(gate, GateSpec):
        return gate.generator
    if isinstance(gate, (int, np.integer)):
        return core.pauli(int(gate))
    return core.as_matrix(gate)


def conjugation_sign(gate, jump_op, tol: float = 1e-8) -> ConjugationSign:
    """How a jump acts on the gate generator: W^dag K W / alpha = +K, -K, or rank loss.

    ``gate`` may be a GateSpec, a Pauli axis number or the generator itself.
    """
    k = _generator(gate)
    w = core.as_matrix(jump_op)
    if w.shape != k.shape:
        raise DomainError("jump operator and gate generator differ in dimension")
    n = k.shape[0]
    ww = w.conj().T @ w
    alpha = float(np.real(np.trace(ww))) / n
    if alpha <= 0 or np.max(np.abs(ww - alpha * np.eye(n))) > tol * max(1.0, alpha):
        return ConjugationSign.DESTROYED
    conj = w.conj().T @ k @ w / alpha
    if np.max(np.abs(conj - k)) <= tol:
        return ConjugationSign.PLUS
    if np.max(np.abs(conj + k)) <= tol:
        return ConjugationSign.MINUS
    raise DomainError("jump neither commutes nor anticommutes with the gate generator")


def effective_angle(thetas: Sequence[float], signs: Sequence[int] | None = None) -> float:
    """Signed sum of segment angles; the first segment counts positive.

    ``signs[m]`` is the conjugation sign of the jump that ends segment ``m``;
    by default every jump flips, giving the alternating sum.
    """
    thetas = list(thetas)
    if signs is None:
        signs = [-1] * max(0, len(thetas) - 1)
    if len(signs) != max(0, len(thetas) - 1):
        raise DomainError("need one sign per jump (len(thetas) - 1)")
    total, current = 0.0, 1
    for m, theta in enumerate(thetas):
        if m:
            current *= int(signs[m - 1])
        total += current * theta
    return total


def solid_angle_split(family: IsospectralFamily, loop: ParameterPath,
                      jump_points: Sequence[int], generator=None) -> list[float]:
    """Geometric angle accumulated on each stretch between jump sample indices.

    The connection is projected on the code generator K (the loop's
    segment factors are ``exp(i dtheta K)``), so the angles sum to the loop's
    gate angle.
    """
    if not family.code_generators:
        raise DomainError(f"family {family.name!r} has no sphere-type gate generator")
    k = family.code_generators[0] if generator is None else core.as_matrix(generator)
    lam = loop.samples
    a, _ = connection_batch(family, 0.5 * (lam[:-1] + lam[1:]), lam[1:] - lam[:-1])
    n = k.shape[0]
    dtheta = np.real(1j * np.einsum("ij,mji->m", k, a)) / n
    bounds = [0, *sorted(jump_points), loop.steps]
    if bounds != sorted(bounds) or bounds[0] < 0 or bounds[-1] > loop.steps:
        raise DomainError("jump points must lie on the loop")
    return [float(np.sum(dtheta[lo:hi])) for lo, hi in zip(bounds[:-1], bounds[1:])]


class Verdict(enum.Enum):
    ROBUST = "robust"
    SIGN_FLIP = "sign_flip_law"
    DESTROYED = "gate_destroyed"


@dataclass(frozen=True)
class RobustnessReport:
    gate: GateSpec
    channel: ErrorChannel
    jump_pattern: tuple[tuple[int, int], ...]  # (sample index, channel op index)
    verdict: Verdict
    fidelity: float
    effective_angle: float | None
    actual: np.ndarray
    predicted: np.ndarray | None
    residual: np.ndarray | None = None
    singular_values: np.ndarray | None = None
    kappa: KappaClass | None = None
    visibility: float | None = None
    segment_angles: list[float] = field(default_factory=list)


def fidelity(ideal: np.ndarray, actual: np.ndarray) -> float:
    """|tr(ideal^dag actual)| / n, clipped to [0, 1]."""
    n = ideal.shape[0]
    return float(min(1.0, abs(np.trace(ideal.conj().T @ actual)) / n))


def classify_channel(channel: ErrorChannel) -> KappaClass:
    """kappa classification on the code space against a sigma3-type Hamiltonian."""
    n = channel.ops[0].shape[0]
    h_ref = core.tensor(core.SIGMA3, np.eye(n // 2)) if n % 2 == 0 else np.eye(n)
    model = LindbladModel(channel.lindblad_ops(), h_ref)
    return classify_kappa(model, h_ref)


def analyze_gate(gate: GateSpec, channel: ErrorChannel, jump_pattern: Sequence[tuple[int, int]],
                 robust_tol: float = ROBUST_TOL, total_time: float = 1.0) -> RobustnessReport:
    """Transport the gate through a jump pattern and check it against the algebraic law.

    ``jump_pattern`` lists ``(sample index, op index)`` pairs into ``channel.ops``.
    """
    pattern = tuple(sorted(((int(i), int(k)) for i, k in jump_pattern), key=lambda x: x[0]))
    for idx, k in pattern:
        if not 0 <= k < len(channel.ops):
            raise DomainError(f"jump op index {k} not in channel")
        if not 0 <= idx <= gate.loop.steps:
            raise DomainError(f"jump index {idx} outside loop")
    kappa = classify_channel(channel)
    visibility = None
    if kappa.kind is KappaKind.IDENTITY:
        visibility = math.exp(-kappa.alpha * total_time / 2)
    scale = math.sqrt(channel.rate) if channel.rate > 0 else 1.0
    jumps = [(idx, scale * channel.ops[k]) for idx, k in pattern]
    result: HolonomyResult = holonomy_with_jumps(gate.family, gate.loop, jumps)
    ideal = gate.ideal()
    signs = [conjugation_sign(gate, channel.ops[k]) for _, k in pattern]
    common = dict(gate=gate, channel=channel, jump_pattern=pattern, kappa=kappa,
                  visibility=visibility)

    if result.rank_deficient or ConjugationSign.DESTROYED in signs:
        if not result.rank_deficient:
            raise ConsistencyError("algebra predicts rank loss but transport kept full rank")
        residual = result.physical_map
        sv = np.linalg.svd(residual, compute_uv=False)
        return RobustnessReport(verdict=Verdict.DESTROYED, fidelity=fidelity(ideal, residual),
                                effective_angle=None, actual=result.u, predicted=None,
                                residual=residual, singular_values=sv, **common)

    thetas = solid_angle_split(gate.family, gate.loop, [i for i, _ in pattern], gate.generator)
    theta_e = effective_angle(thetas, [int(s) for s in signs])
    predicted = core.matexp(1j * theta_e * gate.generator)
    mismatch = core.operator_norm(result.u - predicted)
    if mismatch > PREDICTION_TOL:
        raise ConsistencyError(
            f"transported holonomy differs from the sign law by {mismatch:.3g}")
    fid = fidelity(ideal, result.u)
    verdict = Verdict.ROBUST if fid >= 1 - robust_tol else Verdict.SIGN_FLIP
    return RobustnessReport(verdict=verdict, fidelity=fid, effective_angle=theta_e,
                            actual=result.u, predicted=predicted, segment_angles=thetas,
                            **common)


def pauli_string(label: str) -> np.ndarray:
    """'XY' -> sigma1 (x) sigma2; 'I' is the identity."""
    try:
        return core.tensor(*(core.pauli(PAULI_LABELS.index(c)) for c in label.upper()))
    except ValueError:
        raise DomainError(f"bad Pauli label {label!r}") from None


def two_qubit_table(gate: GateSpec | None = None, verify: bool = True,
                    fraction: float = 0.3) -> dict[str, ConjugationSign]:
    """Sign of every Pauli-pair jump on a two-qubit gate.

    With ``verify`` each entry is also transported through the loop with one
    jump at ``fraction``; analyze_gate raises if the algebra and the
    transported holonomy disagree.
    """
    gate = gate if gate is not None else two_qubit_gate((1, 1))
    if gate.dim != 4:
        raise DomainError("two_qubit_table needs a two-qubit gate")
    table = {}
    for a, b in itertools.product(PAULI_LABELS, repeat=2):
        label = a + b
        op = pauli_string(label)
        sign = conjugation_sign(gate, op)
        if verify:
            report = analyze_gate(gate, ErrorChannel((op,), 1.0, (label,)),
                                  [(gate.index_at(fraction), 0)])
            expected = Verdict.ROBUST if sign is ConjugationSign.PLUS else Verdict.SIGN_FLIP
            if report.verdict is not expected:
                raise ConsistencyError(f"{label}: transported verdict {report.verdict}")
        table[label] = sign
    return table
