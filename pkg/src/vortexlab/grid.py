"""Square grids, scalar fields, and the discretized vortex problem.

Conventions used everywhere in the package:

* fields are (n, n) arrays indexed [i, j] with i along x and j along y,
  so values[i, j] approximates w(x_i, y_j) and z = x[:, None] + 1j * y[None, :];
* n is odd, the origin is the center node, h = 2 R / (n - 1);
* the Laplacian is the standard 5-point stencil, defined on the interior,
  returned as a full array with zeros on the boundary ring;
* norms and residuals are taken over interior nodes only, since the ring
  carries Dirichlet data.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .entire import EntireFunction


@dataclass(frozen=True)
class GridDomain:
    """Uniform grid on the square [-R, R]^2 with n nodes per side (n odd)."""

    R: float
    n: int

    def __post_init__(self):
        if self.n < 5 or self.n % 2 == 0:
            raise ValueError("n must be odd and at least 5")
        if not (self.R > 0):
            raise ValueError("R must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.R / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.R, self.R, self.n)

    def zz(self) -> np.ndarray:
        ax = self.axis
        return ax[:, None] + 1j * ax[None, :]

    def interior_mask(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def ring_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def inner_mask(self) -> np.ndarray:
        """Nodes of the centered half-square |x| <= R/2, |y| <= R/2.

        Quantities of record (invariants, convergence of the continuation,
        field comparisons) are evaluated here, far from the Dirichlet ring.
        """
        ax = self.axis
        keep = np.abs(ax) <= 0.5 * self.R + 1e-12 * self.R
        return keep[:, None] & keep[None, :]

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != (self.n, self.n):
            raise ValueError("field shape does not match the grid")
        lap = np.zeros_like(v)
        lap[1:-1, 1:-1] = (
            v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]
        ) / self.h**2
        return lap

    def restrict_half(self, values: np.ndarray) -> tuple["GridDomain", np.ndarray]:
        """Slice out the inner half-square as its own grid (same spacing).

        Requires (n - 1) divisible by 4 so the half-square boundary lands on
        grid nodes exactly.
        """
        if (self.n - 1) % 4 != 0:
            raise ValueError("restriction needs (n - 1) divisible by 4")
        q = (self.n - 1) // 4
        sl = slice(q, 3 * q + 1)
        sub = GridDomain(0.5 * self.R, 2 * q + 1)
        return sub, np.array(values[sl, sl])


@dataclass
class ScalarField:
    """A real field on a grid, finite everywhere by construction."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.n, self.domain.n):
            raise ValueError("field shape does not match the grid")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite entries")

    def bilinear(self, xs, ys) -> np.ndarray:
        """Bilinear interpolation at points inside the square."""
        d = self.domain
        gx = (np.asarray(xs, dtype=float) + d.R) / d.h
        gy = (np.asarray(ys, dtype=float) + d.R) / d.h
        i0 = np.clip(np.floor(gx).astype(int), 0, d.n - 2)
        j0 = np.clip(np.floor(gy).astype(int), 0, d.n - 2)
        t = gx - i0
        u = gy - j0
        v = self.values
        return (
            (1 - t) * (1 - u) * v[i0, j0]
            + t * (1 - u) * v[i0 + 1, j0]
            + (1 - t) * u * v[i0, j0 + 1]
            + t * u * v[i0 + 1, j0 + 1]
        )


def interior_max_norm(domain: GridDomain, values: np.ndarray) -> float:
    """Max absolute value over interior nodes."""
    return float(np.max(np.abs(values[1:-1, 1:-1])))


def write_field_csv(path, domain: GridDomain, values: np.ndarray) -> None:
    ax = ["%.17g" % t for t in domain.axis]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "y", "value"])
        for i in range(domain.n):
            for j in range(domain.n):
                out.writerow([ax[i], ax[j], "%.17g" % values[i, j]])


def read_field_csv(path) -> tuple[GridDomain, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    m = data.shape[0]
    n = int(round(np.sqrt(m)))
    if n * n != m:
        raise ValueError("field file is not a full square grid")
    R = float(np.max(data[:, 0]))
    dom = GridDomain(R, n)
    vals = data[:, 2].reshape(n, n)
    x_expect = np.repeat(dom.axis, n)
    if not np.allclose(data[:, 0], x_expect, atol=1e-12 * max(R, 1.0)):
        raise ValueError("field file nodes are not in grid order")
    return dom, vals


@dataclass
class VortexProblem:
    """Delta w = e^w - |phi|^2 e^{-(k-1) w} discretized on a square grid.

    The coefficient enters only through a2 = 2 log|phi| sampled at the nodes,
    which is -inf at zeros of phi; exp then produces an exact 0 there, so no
    special-casing is needed anywhere downstream.
    """

    phi: EntireFunction
    k: int
    domain: GridDomain
    a2: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be an integer >= 2")
        self.a2 = 2.0 * self.phi.log_abs(self.domain.zz())

    def rhs(self, w: np.ndarray) -> np.ndarray:
        """F(w) = e^w - exp(2 log|phi| - (k-1) w)."""
        return np.exp(w) - np.exp(self.a2 - (self.k - 1) * w)

    def rhs_prime(self, w: np.ndarray) -> np.ndarray:
        """dF/dw, strictly positive: the discrete problem is monotone."""
        return np.exp(w) + (self.k - 1) * np.exp(self.a2 - (self.k - 1) * w)

    def residual(self, w: np.ndarray) -> np.ndarray:
        """Laplacian(w) - F(w) on the interior, zeros on the ring."""
        r = self.domain.laplacian(w) - self.rhs(w)
        r[0, :] = r[-1, :] = 0.0
        r[:, 0] = r[:, -1] = 0.0
        return r

    def residual_norm(self, w: np.ndarray) -> float:
        return interior_max_norm(self.domain, self.residual(w))

    def profile(self) -> np.ndarray:
        """(2/k) log|phi| at the nodes: -inf at zeros, exact solution when
        phi has no zeros at all."""
        return self.phi.subsolution_profile(self.domain.zz(), self.k)
