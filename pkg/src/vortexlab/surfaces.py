"""Geometric development of normalized solutions.

Two normalizations of the base equation carry geometric meaning:

* WANG_K3 (k = 3): Delta w = 2 e^w - 4|U|^2 e^{-2w}.  Solutions integrate to
  definite affine spheres in R^3 with Pick differential U dz^3 and Blaschke
  metric e^w |dz|^2.  Obtained from the base solver via phi = 4U and
  w = w_eq1 - log 2.
* HARMONIC_K2 (k = 2): Delta w = e^{2w} - |q|^2 e^{-2w}.  Solutions integrate
  to spacelike constant-mean-curvature surfaces in Minkowski R^{2,1} whose
  Gauss map is harmonic into the hyperboloid, with Hopf differential q dz^2.
  Obtained via phi = 2q and w = w_eq1/2 - (log 2)/2.

Both substitutions are locked operationally: the normalized residual is
checked against the base residual on every call (they agree exactly for
WANG_K3 and up to a factor 1/2 for HARMONIC_K2).

Development integrates the first-order frame systems edge by edge with one
RK4 step per grid edge, coefficients at the edge midpoint taken as endpoint
averages for w and its derivatives and exact values for the holomorphic
differential.  The fill order is a fixed spanning tree: along the x-axis
from the origin, then vertically along each column.  Traversing an edge
backwards integrates the reversed ODE (it is not the matrix inverse of the
forward step); the mismatch accumulated around a plaquette is the measured
holonomy defect.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .entire import EntireFunction
from .grid import GridDomain, VortexProblem

WANG_SHIFT = np.log(2.0)
RESIDUAL_GATE = 1e-7


class SurfaceMode(str, enum.Enum):
    WANG_K3 = "WANG_K3"
    HARMONIC_K2 = "HARMONIC_K2"


_FACTOR = {SurfaceMode.WANG_K3: 4.0, SurfaceMode.HARMONIC_K2: 2.0}
_MODE_K = {SurfaceMode.WANG_K3: 3, SurfaceMode.HARMONIC_K2: 2}


def geometric_problem(
    differential: EntireFunction, mode: SurfaceMode, domain: GridDomain
) -> VortexProblem:
    """Base-equation problem whose solutions normalize to the given mode."""
    mode = SurfaceMode(mode)
    c = _FACTOR[mode]
    phi = EntireFunction(tuple(c * a for a in differential.p), differential.q)
    return VortexProblem(phi, _MODE_K[mode], domain)


@dataclass
class NormalizedSolution:
    """A solution of the mode's normalized equation on its grid."""

    mode: SurfaceMode
    differential: EntireFunction
    domain: GridDomain
    w: np.ndarray

    def residual(self) -> np.ndarray:
        """Interior residual of the normalized equation (zeros on the ring)."""
        dom = self.domain
        la = 2.0 * self.differential.log_abs(dom.zz())
        if self.mode is SurfaceMode.WANG_K3:
            f = 2.0 * np.exp(self.w) - 4.0 * np.exp(la - 2.0 * self.w)
        else:
            f = np.exp(2.0 * self.w) - np.exp(la - 2.0 * self.w)
        r = dom.laplacian(self.w) - f
        r[0, :] = r[-1, :] = 0.0
        r[:, 0] = r[:, -1] = 0.0
        return r

    def residual_norm(self) -> float:
        return float(np.max(np.abs(self.residual()[1:-1, 1:-1])))

    def restrict_half(self) -> "NormalizedSolution":
        sub, vals = self.domain.restrict_half(self.w)
        return NormalizedSolution(self.mode, self.differential, sub, vals)


def normalize(w_eq1: np.ndarray, problem: VortexProblem, mode: SurfaceMode) -> NormalizedSolution:
    """Convert a base-equation solution into the mode's normalization.

    The affine substitution w -> c w + log d is derived by matching
    exponents; here it lands on w - log 2 (k=3) and w/2 - (log 2)/2 (k=2),
    with the differential recovered from phi = 4U resp. phi = 2q.  The
    result is gated by the normalized residual, so wrong constants cannot
    slip through.
    """
    mode = SurfaceMode(mode)
    if problem.k != _MODE_K[mode]:
        raise ValueError("mode %s needs k = %d" % (mode.value, _MODE_K[mode]))
    c = _FACTOR[mode]
    diff = EntireFunction(tuple(a / c for a in problem.phi.p), problem.phi.q)
    if mode is SurfaceMode.WANG_K3:
        w = w_eq1 - WANG_SHIFT
    else:
        w = 0.5 * w_eq1 - 0.5 * WANG_SHIFT
    sol = NormalizedSolution(mode, diff, problem.domain, w)
    base = float(np.max(np.abs(problem.residual(w_eq1)[1:-1, 1:-1])))
    res = sol.residual_norm()
    expected = base if mode is SurfaceMode.WANG_K3 else 0.5 * base
    if res > max(10.0 * 1e-9, 2.0 * expected + 1e-12):
        raise ValueError(
            "normalization failed its residual lock: %.3e vs base %.3e" % (res, base)
        )
    return sol


def blaschke_curvature(sol: NormalizedSolution, tol_solve: float = 1e-9) -> np.ndarray:
    """Curvature of the Blaschke metric, k_h = -1 + 2|U|^2 e^{-3w}.

    Cross-checked against -(1/2) e^{-w} laplacian(w) on interior nodes, same
    contract as the base-equation curvature: disagreement means w does not
    solve Wang's equation.
    """
    if sol.mode is not SurfaceMode.WANG_K3:
        raise ValueError("Blaschke curvature is defined for the k=3 normalization")
    dom = sol.domain
    la = 2.0 * sol.differential.log_abs(dom.zz())
    k_alg = -1.0 + 2.0 * np.exp(la - 3.0 * sol.w)
    k_sten = -0.5 * np.exp(-sol.w) * dom.laplacian(sol.w)
    interior = dom.interior_mask()
    bound = 10.0 * tol_solve * np.exp(-sol.w)
    bad = interior & (np.abs(k_alg - k_sten) > bound)
    if np.any(bad):
        worst = float(np.max(np.abs(k_alg - k_sten)[bad]))
        raise ValueError("curvature cross-check failed by %.3e: w unconverged" % worst)
    return k_alg


def jacobian_field(sol: NormalizedSolution) -> np.ndarray:
    """Gauss-map Jacobian J = e^{2w} - |q|^2 e^{-2w} (positive iff the map
    is an orientation-preserving local diffeomorphism)."""
    if sol.mode is not SurfaceMode.HARMONIC_K2:
        raise ValueError("the Gauss-map Jacobian is defined for the k=2 normalization")
    la = 2.0 * sol.differential.log_abs(sol.domain.zz())
    return np.exp(2.0 * sol.w) - np.exp(la - 2.0 * sol.w)


# ---------------------------------------------------------------------------
# derivative fields and edge transfer matrices


def _grad(domain: GridDomain, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nodal gradient: centered interior, one-sided second order on the rim."""
    h = domain.h
    wx = np.empty_like(w)
    wx[1:-1, :] = (w[2:, :] - w[:-2, :]) / (2 * h)
    wx[0, :] = (-3 * w[0, :] + 4 * w[1, :] - w[2, :]) / (2 * h)
    wx[-1, :] = (3 * w[-1, :] - 4 * w[-2, :] + w[-3, :]) / (2 * h)
    wy = np.empty_like(w)
    wy[:, 1:-1] = (w[:, 2:] - w[:, :-2]) / (2 * h)
    wy[:, 0] = (-3 * w[:, 0] + 4 * w[:, 1] - w[:, 2]) / (2 * h)
    wy[:, -1] = (3 * w[:, -1] - 4 * w[:, -2] + w[:, -3]) / (2 * h)
    return wx, wy


def _rk4_transfer(ma, mm, mb, s: float) -> np.ndarray:
    """One-step RK4 transfer matrix for S' = M(t) S across one edge."""
    d = ma.shape[-1]
    eye = np.eye(d, dtype=ma.dtype)
    k1 = ma
    k2 = mm @ (eye + (0.5 * s) * k1)
    k3 = mm @ (eye + (0.5 * s) * k2)
    k4 = mb @ (eye + s * k3)
    return eye + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _wang_mats(w, wz, uval) -> tuple[np.ndarray, np.ndarray]:
    """d/dx and d/dy coefficient matrices for the stacked (f, f_z, f_zbar)."""
    shape = np.shape(w)
    A = np.zeros(shape + (3, 3), dtype=complex)
    B = np.zeros(shape + (3, 3), dtype=complex)
    half_ew = 0.5 * np.exp(w)
    ue = uval * np.exp(-w)
    A[..., 0, 1] = 1.0
    A[..., 1, 1] = wz
    A[..., 1, 2] = ue
    A[..., 2, 0] = half_ew
    B[..., 0, 2] = 1.0
    B[..., 1, 0] = half_ew
    B[..., 2, 1] = np.conj(ue)
    B[..., 2, 2] = np.conj(wz)
    return A + B, 1j * (A - B)


def _cmc_mats(w, wx, wy, qval) -> tuple[np.ndarray, np.ndarray]:
    """d/dx and d/dy matrices for the stacked (f, f_x, f_y, N) in R^{2,1},
    written in the conformally rescaled frame (f, e^{-w}f_x, e^{-w}f_y, N).

    Second fundamental form b11 = e^{2w} + Re q, b22 = e^{2w} - Re q,
    b12 = -Im q: trace 2 e^{2w} relative to I = e^{2w} dz dzbar gives mean
    curvature 1, and the Gauss and Codazzi equations reduce exactly to the
    normalized equation and to holomorphy of q.

    Rescaling removes the Christoffel diagonal (the w_x resp. w_y terms)
    from the tangent rows: the remaining 3x3 block is so(2,1)-valued, so
    RK4 keeps the Minkowski products of (e1, e2, N) to integrator accuracy.
    Integrating the diagonal numerically instead leaks an O(h^2) error into
    <N,N> that accumulates along the fill path and trips the hyperboloid
    gate on any solved (non-affine) w.  The conformal factor is restored
    exactly at the edge endpoints, where e^{w} is known.
    """
    shape = np.shape(w)
    ew = np.exp(w)
    emw = np.exp(-w)
    be1 = ew + qval.real * emw  # b11 e^{-w}
    be2 = -qval.imag * emw     # b12 e^{-w}
    be3 = ew - qval.real * emw  # b22 e^{-w}
    Cx = np.zeros(shape + (4, 4), dtype=float)
    Cy = np.zeros(shape + (4, 4), dtype=float)
    Cx[..., 0, 1] = ew
    Cx[..., 1, 2] = -wy
    Cx[..., 1, 3] = -be1
    Cx[..., 2, 1] = wy
    Cx[..., 2, 3] = -be2
    Cx[..., 3, 1] = -be1
    Cx[..., 3, 2] = -be2
    Cy[..., 0, 2] = ew
    Cy[..., 1, 2] = wx
    Cy[..., 1, 3] = -be2
    Cy[..., 2, 1] = -wx
    Cy[..., 2, 3] = -be3
    Cy[..., 3, 1] = -be2
    Cy[..., 3, 2] = -be3
    return Cx, Cy


def _edge_transfers(sol: NormalizedSolution):
    """Forward and reverse RK4 transfer matrices for every grid edge."""
    dom = sol.domain
    h = dom.h
    w = sol.w
    zz = dom.zz()
    wx, wy = _grad(dom, w)
    if sol.mode is SurfaceMode.WANG_K3:
        wz = 0.5 * (wx - 1j * wy)
        un = sol.differential.eval(zz)
        mx, my = _wang_mats(w, wz, un)
        umx = sol.differential.eval(zz[:-1, :] + 0.5 * h)
        umy = sol.differential.eval(zz[:, :-1] + 0.5j * h)
        mmx, _ = _wang_mats(
            0.5 * (w[:-1, :] + w[1:, :]), 0.5 * (wz[:-1, :] + wz[1:, :]), umx
        )
        _, mmy = _wang_mats(
            0.5 * (w[:, :-1] + w[:, 1:]), 0.5 * (wz[:, :-1] + wz[:, 1:]), umy
        )
    else:
        qn = sol.differential.eval(zz)
        mx, my = _cmc_mats(w, wx, wy, qn)
        qmx = sol.differential.eval(zz[:-1, :] + 0.5 * h)
        qmy = sol.differential.eval(zz[:, :-1] + 0.5j * h)
        mmx, _ = _cmc_mats(
            0.5 * (w[:-1, :] + w[1:, :]),
            0.5 * (wx[:-1, :] + wx[1:, :]),
            0.5 * (wy[:-1, :] + wy[1:, :]),
            qmx,
        )
        _, mmy = _cmc_mats(
            0.5 * (w[:, :-1] + w[:, 1:]),
            0.5 * (wx[:, :-1] + wx[:, 1:]),
            0.5 * (wy[:, :-1] + wy[:, 1:]),
            qmy,
        )
    tx = _rk4_transfer(mx[:-1, :], mmx, mx[1:, :], h)
    tx_rev = _rk4_transfer(-mx[1:, :], -mmx, -mx[:-1, :], h)
    ty = _rk4_transfer(my[:, :-1], mmy, my[:, 1:], h)
    ty_rev = _rk4_transfer(-my[:, 1:], -mmy, -my[:, :-1], h)
    return tx, tx_rev, ty, ty_rev


# ---------------------------------------------------------------------------
# development


@dataclass
class DevelopedSurface:
    mode: SurfaceMode
    domain: GridDomain
    frames: np.ndarray  # (n, n, rows, 3): rows (f, f_z, f_zbar) or (f, f_x, f_y, N)
    positions: np.ndarray  # (n, n, 3) real
    imag_max: float  # WANG only: largest |Im f| seen (reality drift)
    conj_defect: float  # WANG only: max |f_zbar - conj(f_z)|


def _sweep(transfers, s0: np.ndarray, n: int) -> np.ndarray:
    tx, tx_rev, ty, ty_rev = transfers
    S = np.zeros((n, n) + s0.shape, dtype=s0.dtype)
    c = (n - 1) // 2
    S[c, c] = s0
    for i in range(c, n - 1):
        S[i + 1, c] = tx[i, c] @ S[i, c]
    for i in range(c - 1, -1, -1):
        S[i, c] = tx_rev[i, c] @ S[i + 1, c]
    for j in range(c, n - 1):
        S[:, j + 1] = np.matmul(ty[:, j], S[:, j])
    for j in range(c - 1, -1, -1):
        S[:, j] = np.matmul(ty_rev[:, j], S[:, j + 1])
    return S


def develop_affine_sphere(sol: NormalizedSolution) -> DevelopedSurface:
    """Integrate the affine frame (f, f_z, f_zbar) over the grid.

    The initial frame at the origin is f = (0,0,1), f_z = (a, -ia, 0)/2 with
    a = e^{w(0)/2}, f_zbar = conj(f_z): it makes the induced metric at the
    origin equal e^{w(0)} |dz|^2, keeps f real, and fixes the frame volume
    det(f, f_z, f_zbar) = (i/2) e^w, which the system then transports (the
    coefficient trace is exactly d(w)).  Reality is not enforced during
    propagation; its drift is measured and gated.
    """
    if sol.mode is not SurfaceMode.WANG_K3:
        raise ValueError("affine development needs the k=3 normalization")
    if sol.residual_norm() > RESIDUAL_GATE:
        raise ValueError("w does not solve Wang's equation closely enough to develop")
    n = sol.domain.n
    c = (n - 1) // 2
    a = np.exp(0.5 * sol.w[c, c])
    s0 = np.array(
        [
            [0.0, 0.0, 1.0],
            [0.5 * a, -0.5j * a, 0.0],
            [0.5 * a, 0.5j * a, 0.0],
        ],
        dtype=complex,
    )
    S = _sweep(_edge_transfers(sol), s0, n)
    if not np.all(np.isfinite(S.view(float))):
        raise ArithmeticError("frame propagation produced non-finite values")
    imag_max = float(np.max(np.abs(S[:, :, 0, :].imag)))
    conj_defect = float(np.max(np.abs(S[:, :, 2, :] - np.conj(S[:, :, 1, :]))))
    if imag_max > 1e-6:
        raise ArithmeticError("developed surface lost reality: |Im f| = %.3e" % imag_max)
    return DevelopedSurface(
        sol.mode, sol.domain, S, np.ascontiguousarray(S[:, :, 0, :].real), imag_max, conj_defect
    )


def mdot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Minkowski product with signature (+, +, -) on the last axis."""
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] - u[..., 2] * v[..., 2]


def develop_cmc(sol: NormalizedSolution) -> tuple[DevelopedSurface, np.ndarray]:
    """Integrate the Gauss-Weingarten frame (f, f_x, f_y, N) in R^{2,1}.

    Starts at f = 0, f_x = e^{w(0)} e_1, f_y = e^{w(0)} e_2, N = (0, 0, 1):
    the future-pointing unit timelike normal on the hyperboloid.  Aborts if
    the normal drifts off the hyperboloid by more than 1e-5 anywhere.
    Returns the surface and the Gauss map field N.
    """
    if sol.mode is not SurfaceMode.HARMONIC_K2:
        raise ValueError("CMC development needs the k=2 normalization")
    if sol.residual_norm() > RESIDUAL_GATE:
        raise ValueError("w does not solve the harmonic-map equation closely enough")
    n = sol.domain.n
    s0 = np.eye(4, 3, k=-1, dtype=float)  # f = 0, e1, e2, N at the origin
    S = _sweep(_edge_transfers(sol), s0, n)
    if not np.all(np.isfinite(S)):
        raise ArithmeticError("frame propagation produced non-finite values")
    ew = np.exp(sol.w)
    S[:, :, 1, :] *= ew[:, :, None]  # back to f_x = e^{w} e1
    S[:, :, 2, :] *= ew[:, :, None]
    N = np.ascontiguousarray(S[:, :, 3, :])
    drift = float(np.max(np.abs(mdot(N, N) + 1.0)))
    if drift > 1e-5:
        raise ArithmeticError("Gauss map left the hyperboloid: |<N,N>+1| = %.3e" % drift)
    surf = DevelopedSurface(sol.mode, sol.domain, S, np.ascontiguousarray(S[:, :, 0, :]), 0.0, 0.0)
    return surf, N


def holonomy_defect(surface: DevelopedSurface, sol: NormalizedSolution) -> float:
    """Worst relative frame mismatch around an elementary plaquette.

    Each of the four edges is traversed with the same one-step RK4 used in
    development (reverse edges integrate the reversed ODE).  The loop is
    applied to the developed frame at the plaquette corner and compared with
    max-norms.  Plaquettes touching the region rim are excluded: the rim's
    one-sided gradient stencils would otherwise dominate the measurement.
    """
    tx, tx_rev, ty, ty_rev = _edge_transfers(sol)
    loop = ty_rev[:-1, :] @ tx_rev[:, 1:] @ ty[1:, :] @ tx[:, :-1]
    frames = surface.frames
    if sol.mode is SurfaceMode.HARMONIC_K2:
        frames = frames.copy()
        emw = np.exp(-sol.w)
        frames[:, :, 1, :] *= emw[:, :, None]  # transfers act on the rescaled frame
        frames[:, :, 2, :] *= emw[:, :, None]
    S = frames[:-1, :-1]
    delta = (loop - np.eye(loop.shape[-1], dtype=loop.dtype)) @ S
    num = np.max(np.abs(delta), axis=(-2, -1))
    den = np.max(np.abs(S), axis=(-2, -1))
    rel = num / den
    if rel.shape[0] > 2:
        rel = rel[1:-1, 1:-1]
    return float(np.max(rel))


def reconstruct_metric(surface: DevelopedSurface) -> np.ndarray:
    """Log-density of the induced metric, from the frames alone.

    WANG_K3: the frame volume det(f, f_z, f_zbar) equals (i/2) e^w when f
    develops an affine sphere with the chosen gauge, so w = log(2 |det|);
    compare with w_norm.  HARMONIC_K2: the flat Minkowski products give
    <f_x, f_x> = <f_y, f_y> = e^{2w}; the symmetrized log is returned and
    compares with 2 w_norm.
    """
    if surface.mode is SurfaceMode.WANG_K3:
        det = np.linalg.det(surface.frames)
        return np.log(2.0 * np.abs(det))
    fx = surface.frames[:, :, 1, :]
    fy = surface.frames[:, :, 2, :]
    return np.log(0.5 * (mdot(fx, fx) + mdot(fy, fy)))


def export_mesh(surface: DevelopedSurface, path) -> None:
    """Wavefront OBJ: n^2 vertices, 2(n-1)^2 triangles, 9 significant digits."""
    P = surface.positions
    if not np.all(np.isfinite(P)):
        raise ValueError("cannot export non-finite positions")
    n = surface.domain.n
    lines = []
    for i in range(n):
        for j in range(n):
            lines.append("v %.9g %.9g %.9g" % (P[i, j, 0], P[i, j, 1], P[i, j, 2]))
    for i in range(n - 1):
        for j in range(n - 1):
            a = i * n + j + 1
            b = (i + 1) * n + j + 1
            cc = (i + 1) * n + j + 2
            d = i * n + j + 2
            lines.append("f %d %d %d" % (a, b, cc))
            lines.append("f %d %d %d" % (a, cc, d))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_gauss_csv(path, domain: GridDomain, normals: np.ndarray) -> None:
    import csv

    ax = ["%.17g" % t for t in domain.axis]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "y", "N1", "N2", "N3"])
        for i in range(domain.n):
            for j in range(domain.n):
                out.writerow(
                    [
                        ax[i],
                        ax[j],
                        "%.17g" % normals[i, j, 0],
                        "%.17g" % normals[i, j, 1],
                        "%.17g" % normals[i, j, 2],
                    ]
                )
