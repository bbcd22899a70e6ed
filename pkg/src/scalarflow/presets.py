"""Named initial conditions and velocity families used throughout the package.

The trigonometric identities behind each builder are spelled out because the
coefficient conventions (complex exponentials, paired conjugate modes) make
sign errors easy.
"""

import numpy as np

from .errors import ConfigError
from .fields import FourierScalarField, FourierVelocityField, ModeLattice


def sin_x1(K: int = 1) -> FourierScalarField:
    """theta(x) = sin(2 pi x1): c_(1,0) = -i/2, conjugate partner filled in."""
    return FourierScalarField.from_mode_dict(ModeLattice(K), {(1, 0): -0.5j})


def sin_x2(K: int = 1) -> FourierScalarField:
    """theta(x) = sin(2 pi x2)."""
    return FourierScalarField.from_mode_dict(ModeLattice(K), {(0, 1): -0.5j})


def symmetric_ic(K: int = 1) -> FourierScalarField:
    """theta(x) = sin(2 pi x1) + sin(2 pi x2), symmetric under x1 <-> x2."""
    return FourierScalarField.from_mode_dict(
        ModeLattice(K), {(1, 0): -0.5j, (0, 1): -0.5j})


def random_scalar(K: int, rng, decay: float = 4.0, sup_one: bool = True) -> FourierScalarField:
    """Random smooth scalar with |c_k| ~ |k|^-decay, optionally sup-normalized."""
    lat = ModeLattice(K)
    z = rng.standard_normal(lat.n_modes) + 1j * rng.standard_normal(lat.n_modes)
    f = FourierScalarField(lat, z * lat.norms ** (-decay))
    if sup_one:
        s = f.sup_abs()
        if s > 0:
            f = f * (1.0 / s)
    return f


def uniform_drift(ax: float, ay: float):
    """Not representable: constant drift needs the k = 0 mode, which is excluded."""
    raise ConfigError("mean-free fields cannot carry a constant drift component")


def radial_flow(c: float, K: int = 1) -> FourierVelocityField:
    """u(x) = c (cos(2 pi x2), -cos(2 pi x1)).

    Streamlines are the level sets of sin(2 pi x1) + sin(2 pi x2), so this
    flow transports nothing when started from symmetric_ic.  Amplitudes:
    mode (0,1) has perp/|k| = (-1, 0), so v_(0,1) = -c/2 puts c/2 on
    exp(2 pi i x2) in the first component; mode (1,0) has perp/|k| = (0, 1),
    so v_(1,0) = -c/2 puts -c/2 on exp(2 pi i x1) in the second.
    """
    return FourierVelocityField.from_mode_dict(
        ModeLattice(K), {(0, 1): -0.5 * c, (1, 0): -0.5 * c})


def laminar_cos(a: float, K: int = 1) -> FourierVelocityField:
    """u(x) = (0, a cos(2 pi x1)): unidirectional shear, profile depends on x1 only.

    Mode (1,0) has perp/|k| = (0, 1); v_(1,0) = a/2 puts a/2 on exp(2 pi i x1)
    in the second component.
    """
    return FourierVelocityField.from_mode_dict(ModeLattice(K), {(1, 0): 0.5 * a})


def laminar_profile(profile_coeffs: dict, K: int = 0) -> FourierVelocityField:
    """u(x) = (0, g(x1)) for mean-free g(x1) = sum_j g_j exp(2 pi i j x1).

    Only wavenumbers (j, 0) participate; v_(j,0) = sign(j) g_j.
    """
    Kmin = max(abs(int(j)) for j in profile_coeffs) if profile_coeffs else 1
    lat = ModeLattice(max(K, Kmin))
    entries = {}
    for j, g in profile_coeffs.items():
        j = int(j)
        if j == 0:
            raise ConfigError("profile must be mean-free (no j = 0 term)")
        entries[(j, 0)] = np.sign(j) * g
    return FourierVelocityField.from_mode_dict(lat, entries)


def stream_cos_x2(K: int = 1) -> FourierVelocityField:
    """u(x) = (cos(2 pi x2), 0), the flow of stream function sin(2 pi x2)/(2 pi)."""
    return FourierVelocityField.from_mode_dict(ModeLattice(K), {(0, 1): -0.5})


def random_velocity(K: int, rng, s: float, norm: float = 1.0) -> FourierVelocityField:
    """Random velocity rescaled to the requested H^s norm."""
    from .fields import sobolev_norm

    lat = ModeLattice(K)
    z = rng.standard_normal(lat.n_modes) + 1j * rng.standard_normal(lat.n_modes)
    v = FourierVelocityField(lat, z * lat.norms ** (-s - 1.0))
    cur = sobolev_norm(v, s)
    if cur == 0.0:
        raise ConfigError("degenerate random draw, try another seed")
    return v * (norm / cur)
