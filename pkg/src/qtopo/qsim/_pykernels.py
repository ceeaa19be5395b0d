"""Pure numpy gate kernels.

Qubit 0 is the most significant bit of the basis index.  Every function
updates ``amps`` (complex128, C-contiguous, length 2**nq) in place.
"""
import numpy as np

RY, X, H, CZ, PERM = 0, 1, 2, 3, 4

_SQRT1_2 = 1.0 / np.sqrt(2.0)


def _split(amps, nq, q):
    return amps.reshape(1 << q, 2, 1 << (nq - q - 1))


def apply_ry(amps, nq, q, theta):
    v = _split(amps, nq, q)
    c, s = np.cos(0.5 * theta), np.sin(0.5 * theta)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = c * a0 - s * a1
    v[:, 1, :] = s * a0 + c * a1


def apply_x(amps, nq, q):
    v = _split(amps, nq, q)
    v[:] = v[:, ::-1, :].copy()


def apply_h(amps, nq, q):
    v = _split(amps, nq, q)
    a0 = v[:, 0, :].copy()
    a1 = v[:, 1, :]
    v[:, 0, :] = (a0 + a1) * _SQRT1_2
    v[:, 1, :] = (a0 - a1) * _SQRT1_2


def apply_cz(amps, nq, q1, q2):
    if q1 > q2:
        q1, q2 = q2, q1
    v = amps.reshape(1 << q1, 2, 1 << (q2 - q1 - 1), 2, 1 << (nq - q2 - 1))
    v[:, 1, :, 1, :] *= -1


def apply_perm(amps, nq, q0, width, perm):
    """Basis permutation on qubits q0..q0+width-1: |k> -> |perm[k]>."""
    v = amps.reshape(1 << q0, 1 << width, 1 << (nq - q0 - width))
    out = np.empty_like(v)
    out[:, perm, :] = v
    v[:] = out


def run_program(amps, nq, codes, qa, qb, angles, perm_data, perm_offsets):
    for k in range(len(codes)):
        code = codes[k]
        if code == RY:
            apply_ry(amps, nq, qa[k], angles[k])
        elif code == CZ:
            apply_cz(amps, nq, qa[k], qb[k])
        elif code == H:
            apply_h(amps, nq, qa[k])
        elif code == X:
            apply_x(amps, nq, qa[k])
        elif code == PERM:
            w = qb[k]
            off = perm_offsets[k]
            apply_perm(amps, nq, qa[k], w, perm_data[off:off + (1 << w)])
        else:
            raise ValueError(f"unknown gate code {code}")
