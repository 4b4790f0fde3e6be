"""Built-in pair kernels: neighbor count, Lennard-Jones (+ Coulomb) and SPH density."""

from __future__ import annotations

import numpy as np

from .reduction import EVEN, ODD, Output, PairKernel


def count_kernel() -> PairKernel:
    def pair_fn(i, j, pi, pj, dx, d2):
        return (np.ones(i.shape, dtype=d2.dtype),)

    return PairKernel(pair_fn, (Output("count", EVEN),), name="count")


def cubic_spline(r, h):
    """Normalized 3D cubic B-spline with compact support radius ``h``.

    ``W(0, h) = 8 / (pi h^3)``.
    """
    r = np.asarray(r)
    h = np.asarray(h)
    q = r / h
    sigma = 8.0 / (np.pi * h**3)
    inner = 1.0 - 6.0 * q**2 + 6.0 * q**3
    outer = 2.0 * (1.0 - q) ** 3
    w = np.where(q <= 0.5, inner, np.where(q <= 1.0, outer, 0.0))
    return sigma * w


def sph_density_kernel(mass_field: str = "m", include_self: bool = True) -> PairKernel:
    """``rho_i = sum_j m_j W(d_ij, h_i)``; the postamble adds ``m_i W(0, h_i)``.

    The contribution depends on ``h_i`` and ``m_j`` only, so it is truly
    even under i<->j exchange only when radii and masses are uniform.
    """

    def pair_fn(i, j, pi, pj, dx, d2):
        return (pj[mass_field] * cubic_spline(np.sqrt(d2), pi["h"]),)

    def postamble(i, pi, reduced, count):
        (rho,) = reduced
        if include_self:
            rho = rho + pi[mass_field] * cubic_spline(0.0, pi["h"]).astype(rho.dtype)
        return (rho,)

    return PairKernel(pair_fn, (Output("rho", EVEN),), inputs=(mass_field,), postamble=postamble,
                      name="density")


def lj_kernel(epsilon: float = 1.0, sigma: float = 1.0, coulomb: float | None = None,
              charge_field: str = "q") -> PairKernel:
    """12/6 Lennard-Jones force (odd) and pair energy (even).

    With ``coulomb`` set, adds ``coulomb * q_i q_j / r`` truncated at the
    neighbor cutoff.  Energies are per-pair, so the system energy is half
    the sum of the ``energy`` output.
    """
    s2 = sigma * sigma

    def pair_fn(i, j, pi, pj, dx, d2):
        if np.any(d2 == 0):
            raise ValueError("coincident particles in Lennard-Jones kernel")
        inv = 1.0 / d2
        sr6 = (s2 * inv) ** 3
        fmag = 24.0 * epsilon * inv * (2.0 * sr6 * sr6 - sr6)
        energy = 4.0 * epsilon * (sr6 * sr6 - sr6)
        if coulomb is not None:
            qq = coulomb * pi[charge_field] * pj[charge_field]
            r = np.sqrt(d2)
            energy = energy + qq / r
            fmag = fmag + qq * inv / r
        return fmag[:, None] * dx, energy

    inputs = (charge_field,) if coulomb is not None else ()
    return PairKernel(pair_fn, (Output("force", ODD, dim=3), Output("energy", EVEN)), inputs=inputs,
                      name="lj")
