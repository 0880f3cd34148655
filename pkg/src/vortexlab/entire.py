"""Entire functions of the form P(z) * exp(Q(z)) with polynomial P and Q.

Everything downstream works with log|phi| rather than phi itself: the vortex
solvers only ever consume 2*log|phi| as a coefficient field, and that stays
finite (exactly -inf at zeros of P) even where Re Q is large enough that
exp(Q) would overflow a double.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly


def _trim(coeffs) -> tuple[complex, ...]:
    """Drop trailing coefficients that are exactly zero (keep at least one)."""
    c = [complex(x) for x in coeffs]
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class EntireFunction:
    """phi(z) = P(z) * exp(Q(z)).

    Coefficients are stored ascending, so p=(a0, a1, a2) means
    a0 + a1 z + a2 z^2.  The default exponent is the zero polynomial.
    """

    p: tuple[complex, ...]
    q: tuple[complex, ...] = (0j,)

    def __post_init__(self):
        p = _trim(self.p)
        q = _trim(self.q)
        if not all(np.isfinite(c) for c in p + q):
            raise ValueError("coefficients must be finite")
        if p == (0j,):
            raise ValueError("polynomial part must not be identically zero")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_roots(cls, roots, q=(0j,), scale=1.0 + 0j) -> "EntireFunction":
        if len(roots):
            p = scale * npoly.polyfromroots(list(roots))
        else:
            p = np.array([scale], dtype=complex)
        return cls(tuple(p), tuple(q))

    @property
    def degree(self) -> int:
        return len(self.p) - 1

    def is_polynomial(self) -> bool:
        """True when the exponent is constant, i.e. phi is a polynomial up to scale."""
        return len(self.q) <= 1

    def eval(self, z):
        """phi(z) itself.  Raises OverflowError instead of returning inf;
        use log_abs for anything that has to survive large Re Q."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            out = npoly.polyval(z, np.asarray(self.p)) * np.exp(npoly.polyval(z, np.asarray(self.q)))
        if not np.all(np.isfinite(out)):
            raise OverflowError("phi overflows here; work with log_abs instead")
        return out

    def log_abs(self, z):
        """log|phi(z)| = log|P(z)| + Re Q(z), exactly -inf at zeros of P."""
        z = np.asarray(z, dtype=complex)
        pz = npoly.polyval(z, np.asarray(self.p))
        with np.errstate(divide="ignore"):
            return np.log(np.abs(pz)) + np.real(npoly.polyval(z, np.asarray(self.q)))

    def subsolution_profile(self, z, k: int):
        """(2/k) log|phi|, the lower barrier every complete solution sits above."""
        return (2.0 / k) * self.log_abs(z)

    def zeros(self, tol: float = 1e-10, max_iter: int = 500) -> np.ndarray:
        """All roots of the polynomial part, by simultaneous Aberth iteration.

        Acceptance is the scaled residual |P_monic(z_i)| <= tol * (1+|z_i|)^deg,
        which stays meaningful for clustered (multiple) roots where the
        iterates stall at distance ~ tol^(1/m) from the true root.  Output is
        sorted by (Re, Im) so runs are reproducible.
        """
        d = self.degree
        if d == 0:
            return np.zeros(0, dtype=complex)
        monic = np.asarray(self.p, dtype=complex) / self.p[-1]
        dmonic = npoly.polyder(monic)
        radius = 1.0 + np.max(np.abs(monic[:-1]))
        ang = 2 * np.pi * (np.arange(d) + 0.5) / d + 0.4
        # slight radial wobble: breaks symmetric stalls for real-coefficient P
        z = radius * np.exp(1j * ang) * (1 + 0.02 * np.cos(3 * ang))
        ok = np.zeros(d, dtype=bool)
        for _ in range(max_iter):
            pz = npoly.polyval(z, monic)
            ok = np.abs(pz) <= tol * (1.0 + np.abs(z)) ** d
            if np.all(ok):
                break
            dpz = npoly.polyval(z, dmonic)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = pz / dpz
                pair = z[:, None] - z[None, :]
                np.fill_diagonal(pair, np.inf)
                repel = np.sum(1.0 / pair, axis=1)
                corr = newton / (1.0 - newton * repel)
            corr = np.where(np.isfinite(corr), corr, 0.05 * radius * np.exp(1j * ang))
            z = z - np.where(ok, 0.0, corr)
        if not np.all(ok):
            raise RuntimeError("root iteration did not reach the residual target")
        order = np.lexsort((np.round(z.imag, 12), np.round(z.real, 12)))
        return z[order]
