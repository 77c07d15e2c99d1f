"""Dense complex linear algebra and quantum-state primitives.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; states are 1-d
arrays (stored unnormalized when they come out of a trajectory) and density
matrices are square hermitian arrays. Everything here is a pure function.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, ShapeError

HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-8

I2 = np.eye(2, dtype=complex)
SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_plus |1> = |0>, sigma_minus |0> = |1>; |0> is the sigma3 = +1 state
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
PAULIS = (I2, SIGMA1, SIGMA2, SIGMA3)


def pauli(index: int) -> np.ndarray:
    """Return sigma_index (0 is the identity) as a fresh array."""
    if index not in (0, 1, 2, 3):
        raise DomainError(f"Pauli index must be 0..3, got {index}")
    return PAULIS[index].copy()


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def _require_square(a: np.ndarray, what: str = "matrix") -> None:
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"{what} must be square, got shape {a.shape}")


def dagger(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.conj(a), -1, -2)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def is_unitary(a, tol: float = HERMITIAN_TOL) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return bool(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])), initial=0.0) <= tol)


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def tensor(*ops) -> np.ndarray:
    """Kronecker product of one or more matrices, left factor most significant."""
    if not ops:
        raise ShapeError("tensor needs at least one factor")
    out = as_matrix(ops[0])
    for op in ops[1:]:
        out = np.kron(out, as_matrix(op))
    return out


# Pade approximants of exp, Higham (2005) degrees and switching thresholds
# for the 1-norm in double precision.
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def _pade(a: np.ndarray, m: int) -> np.ndarray:
    b = _PADE_COEFFS[m]
    eye = np.broadcast_to(np.eye(a.shape[-1], dtype=complex), a.shape)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a4 @ a2
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
        v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
             + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye)
    else:
        powers = [eye, a2]
        for _ in range(2, (m + 1) // 2):
            powers.append(powers[-1] @ a2)
        u = sum(b[j] * powers[j // 2] for j in range(m, 0, -2))
        u = a @ u
        v = sum(b[j] * powers[j // 2] for j in range(m - 1, -1, -2))
    return np.linalg.solve(v - u, v + u)


def matexp(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade kernel.

    Accepts a single square matrix or a stack ``(..., n, n)``; a stack shares
    one Pade degree and one scaling power chosen from its largest 1-norm.
    """
    a = np.asarray(a, dtype=complex)
    _require_square(a)
    if a.shape[-1] == 0:
        return a.copy()
    norm = float(np.max(np.sum(np.abs(a), axis=-2)))
    if not math.isfinite(norm):
        raise DomainError("matexp input contains non-finite entries")
    for m in (3, 5, 7, 9):
        if norm <= _PADE_THETA[m]:
            return _pade(a, m)
    s = max(0, math.ceil(math.log2(norm / _PADE_THETA[13])))
    out = _pade(a / 2.0**s, 13)
    for _ in range(s):
        out = out @ out
    return out


def _jacobi_sweep_pairs(n: int):
    for p in range(n - 1):
        for q in range(p + 1, n):
            yield p, q


def eig_hermitian(a, tol: float = HERMITIAN_TOL, max_sweeps: int = 60):
    """Cyclic Jacobi diagonalization of a hermitian matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues ascending and the
    eigenvectors as columns.
    """
    a = as_matrix(a)
    _require_square(a)
    n = a.shape[0]
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if not is_hermitian(a, tol * scale):
        raise DomainError("eig_hermitian needs a hermitian matrix")
    w = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    total = float(np.sum(np.abs(w) ** 2))
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.sum(np.abs(w[offdiag]) ** 2))
        if off <= (1e-30 * total if total > 0 else 0.0) or off == 0.0:
            break
        for p, q in _jacobi_sweep_pairs(n):
            apq = w[p, q]
            mag = abs(apq)
            if mag < 1e-290:
                # negligible (possibly subnormal); dividing by it would overflow
                w[p, q] = w[q, p] = 0.0
                continue
            # phase the (p, q) element real, then a real Jacobi rotation
            phase = apq / mag
            app = w[p, p].real
            aqq = w[q, q].real
            theta = (aqq - app) / (2.0 * mag)
            if abs(theta) > 1e100:
                t = 0.5 / theta
            else:
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            # columns: new_p = c*col_p - s*conj(phase)*col_q
            #          new_q = s*phase*col_p + c*col_q
            g_pp, g_pq = c, s * phase
            g_qp, g_qq = -s * np.conj(phase), c
            cp = w[:, p].copy()
            cq = w[:, q].copy()
            w[:, p] = g_pp * cp + g_qp * cq
            w[:, q] = g_pq * cp + g_qq * cq
            rp = w[p, :].copy()
            rq = w[q, :].copy()
            w[p, :] = np.conj(g_pp) * rp + np.conj(g_qp) * rq
            w[q, :] = np.conj(g_pq) * rp + np.conj(g_qq) * rq
            w[p, q] = 0.0
            w[q, p] = 0.0
            vp = v[:, p].copy()
            vq = v[:, q].copy()
            v[:, p] = g_pp * vp + g_qp * vq
            v[:, q] = g_pq * vp + g_qq * vq
    evals = np.real(np.diag(w)).copy()
    order = np.argsort(evals, kind="stable")
    return evals[order], v[:, order]


def cluster_levels(evals, gap_tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Group ascending eigenvalue indices whose consecutive gaps are <= gap_tol."""
    groups: list[list[int]] = []
    for i, e in enumerate(evals):
        if groups and abs(e - evals[groups[-1][-1]]) <= gap_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def norm(psi) -> float:
    return float(np.linalg.norm(psi))


def normalized(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return psi / np.linalg.norm(psi)


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def validate_density(rho, tol: float = HERMITIAN_TOL) -> np.ndarray:
    rho = as_matrix(rho)
    _require_square(rho, "density matrix")
    if not is_hermitian(rho, tol):
        raise DomainError("density matrix is not hermitian")
    return rho


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b``."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ShapeError(f"trace_distance on mismatched shapes {a.shape}, {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    evals, _ = eig_hermitian(diff)
    return 0.5 * float(np.sum(np.abs(evals)))


def operator_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a), 2)) if np.size(a) else 0.0


def phase_aligned_distance(a, b) -> float:
    """Spectral-norm distance after removing the best global phase of ``b``."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    overlap = np.trace(b.conj().T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return operator_norm(a - phase * b)
