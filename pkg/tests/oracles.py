"""Independent reference implementations used to pin expected values.

Everything here is deliberately naive: dense operators assembled from the
definition of the dynamics, direct mode summation for point values, brute
force loops for norms.  None of it shares code paths with the package
internals it checks.
"""

import numpy as np
from scipy.linalg import expm

TWO_PI = 2.0 * np.pi


def mode_list(K):
    """All nonzero lattice sites, in the same order the package uses."""
    out = []
    for k1 in range(-K, K + 1):
        for k2 in range(-K, K + 1):
            if k1 or k2:
                out.append((k1, k2))
    return out


def dense_generator(v, lattice_K, kappa):
    """Matrix of the truncated dynamics c' = L c on the scalar lattice.

    The advection part is assembled as an explicit convolution: velocity
    mode p times scalar mode q feeds scalar mode p + q with weight
    -2 pi i v_p (sigma(p) . q), sigma(p) = p_perp / |p|.  Diffusion is the
    diagonal -4 pi^2 kappa |k|^2.
    """
    modes = mode_list(lattice_K)
    index = {m: i for i, m in enumerate(modes)}
    n = len(modes)
    L = np.zeros((n, n), dtype=complex)
    v_modes = [tuple(int(x) for x in m) for m in v.lattice.modes]
    for (p1, p2), vp in zip(v_modes, v.coeffs):
        if vp == 0:
            continue
        norm = np.hypot(p1, p2)
        s1, s2 = -p2 / norm, p1 / norm
        for (q1, q2), qi in index.items():
            tgt = index.get((p1 + q1, p2 + q2))
            if tgt is not None:
                L[tgt, qi] += -TWO_PI * 1j * vp * (s1 * q1 + s2 * q2)
    for (k1, k2), ki in index.items():
        L[ki, ki] += -kappa * TWO_PI ** 2 * (k1 * k1 + k2 * k2)
    return L, modes, index


def exact_coeffs(v, theta0, kappa, lattice_K, t):
    """Coefficients at time t of the truncated system, via a matrix
    exponential."""
    L, modes, index = dense_generator(v, lattice_K, kappa)
    c0 = np.zeros(len(modes), dtype=complex)
    for (k1, k2), c in zip(theta0.lattice.modes, theta0.coeffs):
        if (k1, k2) in index:
            c0[index[(k1, k2)]] = c
        elif c != 0:
            raise ValueError("initial condition sticks out of the lattice")
    return expm(L * t) @ c0, modes


def point_value(coeffs, modes, x1, x2):
    """Direct mode summation, no FFT."""
    total = 0.0 + 0.0j
    for (k1, k2), c in zip(modes, coeffs):
        total += c * np.exp(TWO_PI * 1j * (k1 * x1 + k2 * x2))
    return total.real


def velocity_point_value(v, x1, x2):
    """Direct summation of both velocity components at one point."""
    u1 = 0.0 + 0.0j
    u2 = 0.0 + 0.0j
    for (p1, p2), vp in zip(v.lattice.modes, v.coeffs):
        if vp == 0:
            continue
        norm = np.hypot(p1, p2)
        ph = vp * np.exp(TWO_PI * 1j * (p1 * x1 + p2 * x2))
        u1 += ph * (-p2 / norm)
        u2 += ph * (p1 / norm)
    return u1.real, u2.real


def sobolev_sq(field, s):
    """Brute-force sum of |k|^(2s) |c_k|^2 over the lattice."""
    total = 0.0
    for (k1, k2), c in zip(field.lattice.modes, field.coeffs):
        total += float((k1 * k1 + k2 * k2) ** s) * float(abs(c)) ** 2
    return total


def trajectory_distance_sq(coeff_a, coeff_b, times):
    """Trapezoid in time of the summed squared coefficient gaps."""
    prof = [float(np.sum(np.abs(ca - cb) ** 2))
            for ca, cb in zip(coeff_a, coeff_b)]
    return float(np.trapezoid(prof, times))
