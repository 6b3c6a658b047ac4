"""State-vector kernels and superoperators shared by the dynamical models.

State vectors of ``n`` qubits are handled as tensors of shape ``(2,) * n``
with qubit 0 on axis 0 (the most significant index bit).
"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


def _axis_index(ndim: int, axis: int, value: int) -> Tuple:
    index = [slice(None)] * ndim
    index[axis] = value
    return tuple(index)


def apply_single_qubit(psi: np.ndarray, axis: int, U: np.ndarray) -> None:
    """Apply a 2x2 matrix on one axis of a state tensor, in place."""
    i0 = _axis_index(psi.ndim, axis, 0)
    i1 = _axis_index(psi.ndim, axis, 1)
    a0 = psi[i0].copy()
    a1 = psi[i1]
    psi[i0] = U[0, 0] * a0 + U[0, 1] * a1
    psi[i1] = U[1, 0] * a0 + U[1, 1] * a1


def x_rotation(theta: float) -> np.ndarray:
    """exp(i theta sigma_x)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def field_rotation(bx: float, by: float, bz: float, tau: float) -> np.ndarray:
    """exp(-i tau (bx sigma_x + by sigma_y + bz sigma_z))."""
    norm = np.sqrt(bx * bx + by * by + bz * bz)
    if norm == 0.0:
        return IDENTITY_2.copy()
    generator = (bx * SIGMA_X + by * SIGMA_Y + bz * SIGMA_Z) / norm
    return np.cos(norm * tau) * IDENTITY_2 - 1j * np.sin(norm * tau) * generator


def apply_driver(psi: np.ndarray, theta: float, axes: Iterable[int]) -> None:
    """Apply exp(i theta sigma_x) on every listed axis (the -A sum sigma_x driver)."""
    U = x_rotation(theta)
    for axis in axes:
        apply_single_qubit(psi, axis, U)


PairBlock = Tuple[Tuple, Tuple, float, float]


def xx_yy_blocks(ndim: int, ax1: int, ax2: int, a: float, b: float, tau: float) -> List[PairBlock]:
    """Index pairs and (cos, sin) of the two 2-state blocks of exp(-i tau (a XX + b YY)).

    XX and YY commute; on {|00>, |11>} the generator is (a - b) X and on
    {|01>, |10>} it is (a + b) X, so both blocks exponentiate exactly.
    """
    blocks = []
    for (p0, p1), (q0, q1), strength in (((0, 0), (1, 1), a - b), ((0, 1), (1, 0), a + b)):
        index_p = [slice(None)] * ndim
        index_q = [slice(None)] * ndim
        index_p[ax1], index_p[ax2] = p0, p1
        index_q[ax1], index_q[ax2] = q0, q1
        blocks.append((tuple(index_p), tuple(index_q), np.cos(strength * tau), np.sin(strength * tau)))
    return blocks


def apply_pair_blocks(psi: np.ndarray, blocks: List[PairBlock]) -> None:
    for index_p, index_q, c, s in blocks:
        u = psi[index_p].copy()
        v = psi[index_q]
        psi[index_p] = c * u - 1j * s * v
        psi[index_q] = c * v - 1j * s * u


def expectation_x(psi: np.ndarray, axis: int) -> float:
    """<sigma_x> on one axis of a normalized state tensor."""
    i0 = _axis_index(psi.ndim, axis, 0)
    i1 = _axis_index(psi.ndim, axis, 1)
    return float(2.0 * np.real(np.vdot(psi[i0], psi[i1])))


def z_spins(n: int) -> np.ndarray:
    """(n, 2**n) matrix of S_k for every basis index."""
    index = np.arange(2**n)
    return np.array([1 - 2 * ((index >> (n - 1 - k)) & 1) for k in range(n)], dtype=float)


def embed_operator(op: np.ndarray, position: int, n: int) -> np.ndarray:
    """Kronecker embedding of a single-qubit operator at ``position``."""
    result = np.array([[1.0 + 0j]])
    for k in range(n):
        result = np.kron(result, op if k == position else IDENTITY_2)
    return result


def driver_matrix(n: int) -> np.ndarray:
    """Dense sum_i sigma_x^i."""
    return sum(embed_operator(SIGMA_X, k, n) for k in range(n))


def liouvillian(H: np.ndarray, channels: Sequence[Tuple[float, np.ndarray]]) -> np.ndarray:
    """Row-major vectorized GKSL generator for rates and jump operators.

    With ``vec`` the row-major flattening, vec(A rho B) = (A kron B^T) vec(rho).
    """
    d = H.shape[0]
    eye = np.eye(d)
    generator = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for rate, L in channels:
        if rate == 0.0:
            continue
        LdL = L.conj().T @ L
        generator += rate * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return generator


def lindblad_rhs(rho: np.ndarray, H: np.ndarray, channels: Sequence[Tuple[float, np.ndarray]]) -> np.ndarray:
    """d rho / dt in matrix form."""
    out = -1j * (H @ rho - rho @ H)
    for rate, L in channels:
        if rate == 0.0:
            continue
        Ld = L.conj().T
        LdL = Ld @ L
        out += rate * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return out
