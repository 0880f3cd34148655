"""Normalization to the geometric equations and frame development."""

import numpy as np
import pytest

from vortexlab.entire import EntireFunction
from vortexlab.grid import GridDomain
from vortexlab import solve
from vortexlab import surfaces as dev

WANG = dev.SurfaceMode.WANG_K3
HARMONIC = dev.SurfaceMode.HARMONIC_K2


def _exact_wang_constant(c0=1.5 + 0.5j, R=1.0, n=161):
    diff = EntireFunction(p=(c0,))
    prob = dev.geometric_problem(diff, WANG, GridDomain(R, n))
    return dev.normalize(prob.profile(), prob, WANG), c0


def _exact_cmc_exponential(R=1.0, n=161):
    diff = EntireFunction(p=(1.0,), q=(0.0, 2.0))
    prob = dev.geometric_problem(diff, HARMONIC, GridDomain(R, n))
    return dev.normalize(prob.profile(), prob, HARMONIC)


def test_geometric_problem_embeds_the_differential():
    diff = EntireFunction(p=(0.0, 1.0))
    pw = dev.geometric_problem(diff, WANG, GridDomain(2.0, 41))
    assert pw.k == 3
    assert pw.phi.p == (0.0 + 0j, 4.0 + 0j)
    ph = dev.geometric_problem(diff, HARMONIC, GridDomain(2.0, 41))
    assert ph.k == 2
    assert ph.phi.p == (0.0 + 0j, 2.0 + 0j)


def test_normalize_constant_differential():
    sol, c0 = _exact_wang_constant()
    target = np.log(2.0 * abs(c0) ** 2) / 3.0
    assert np.abs(sol.w - target).max() <= 1e-12
    assert sol.residual_norm() <= 1e-12


def test_normalize_degenerate_exponential_is_linear():
    sol = _exact_cmc_exponential()
    assert np.abs(sol.w - sol.domain.zz().real).max() <= 1e-12
    assert sol.residual_norm() <= 1e-11


def test_normalize_checks_k():
    diff = EntireFunction(p=(0.0, 1.0))
    prob = dev.geometric_problem(diff, HARMONIC, GridDomain(2.0, 41))
    with pytest.raises(ValueError):
        dev.normalize(np.zeros((41, 41)), prob, WANG)


def test_unconverged_fields_pass_normalize_but_not_develop():
    # normalize is a unit conversion and judges only its own substitution;
    # solve quality is gated at the development entry point
    diff = EntireFunction(p=(1.0,))
    prob = dev.geometric_problem(diff, WANG, GridDomain(2.0, 41))
    sol = dev.normalize(prob.profile() + 0.3, prob, WANG)
    assert sol.residual_norm() > 1e-2
    with pytest.raises(ValueError):
        dev.develop_affine_sphere(sol)


def test_normalized_wang_solution_satisfies_its_equation(wang_z_family):
    assert wang_z_family[161].sol.residual_norm() <= 1e-8


def test_blaschke_curvature_flat_for_constant():
    sol, _ = _exact_wang_constant(n=41)
    K = dev.blaschke_curvature(sol)
    assert np.abs(K[1:-1, 1:-1]).max() <= 1e-10


def test_blaschke_curvature_nonpositive_on_solved_field(wang_z_family):
    # away from the lifted ring: the rim rows carry O(h^2) sign noise
    sol = wang_z_family[81].sol
    K = dev.blaschke_curvature(sol)
    region = sol.domain.interior_mask() & sol.domain.inner_mask()
    assert K[region].max() < 0.0
    assert K[region].min() < -1e-3


def test_develop_constant_is_machine_flat():
    sol, _ = _exact_wang_constant()
    surf = dev.develop_affine_sphere(sol)
    assert surf.imag_max <= 1e-8
    assert dev.holonomy_defect(surf, sol) <= 1e-11
    rec = dev.reconstruct_metric(surf)
    assert np.abs(rec - sol.w)[1:-1, 1:-1].max() <= 1e-8


def test_develop_gate_refuses_unconverged_fields():
    sol, _ = _exact_wang_constant(n=41)
    broken = dev.NormalizedSolution(sol.mode, sol.differential, sol.domain,
                                    sol.w + 0.05 * np.cos(sol.domain.zz().real))
    with pytest.raises(ValueError):
        dev.develop_affine_sphere(broken)


def test_restricted_cubic_defect_small_and_decreasing(z3_family):
    d161 = z3_family[161].defect
    d321 = z3_family[321].defect
    assert z3_family[161].sol.domain.R == pytest.approx(1.5)
    assert d161 <= 1e-4
    assert d321 < d161


@pytest.mark.xfail(
    strict=True,
    reason="the transfer error of an independently solved field scales like "
    "h^2 per plaquette on top of an O(h^2)-accurate field, giving a "
    "~16x defect drop per refinement instead of the plain-stencil 4x",
)
def test_restricted_cubic_defect_halving_ratio(z3_family):
    ratio = z3_family[161].defect / z3_family[321].defect
    assert 3.5 <= ratio <= 4.5


def test_corrupted_solution_flags_holonomy(wang_z_family):
    st = wang_z_family[161]
    dom = st.sol.domain
    bump = 0.1 * np.exp(-np.abs(dom.zz()) ** 2 / (2 * 0.05**2))
    broken = dev.NormalizedSolution(st.sol.mode, st.sol.differential, dom,
                                    st.sol.w + bump)
    assert dev.holonomy_defect(st.surface, broken) > 1e-2


def test_minkowski_product_signature():
    e1 = np.array([1.0, 0.0, 0.0])
    e3 = np.array([0.0, 0.0, 1.0])
    assert dev.mdot(e1, e1) == 1.0
    assert dev.mdot(e3, e3) == -1.0


def test_cmc_development_of_degenerate_exponential():
    sol = _exact_cmc_exponential()
    surf, normals = dev.develop_cmc(sol)
    assert dev.holonomy_defect(surf, sol) <= 1e-6
    rec = dev.reconstruct_metric(surf)
    assert np.abs(rec - 2.0 * sol.w)[1:-1, 1:-1].max() <= 1e-6
    assert np.abs(dev.mdot(normals, normals) + 1.0).max() <= 1e-6
    assert normals[..., 2].min() >= 1.0 - 1e-9  # future-pointing sheet


@pytest.mark.xfail(
    strict=True,
    raises=ArithmeticError,
    reason="at R=3 the edge transfers see h*|coefficient| of order one "
    "(|q| e^{2x} ~ e^6), so frame propagation overflows its drift gate; "
    "develop after restricting instead",
)
def test_cmc_development_of_degenerate_exponential_wide():
    sol = _exact_cmc_exponential(R=3.0, n=121)
    surf, normals = dev.develop_cmc(sol)
    assert dev.holonomy_defect(surf, sol) <= 1e-6


def test_cmc_development_of_solved_field(qz_state):
    assert dev.holonomy_defect(qz_state.surface, qz_state.sol_inner) <= 1e-4
    assert np.abs(dev.mdot(qz_state.normals, qz_state.normals) + 1.0).max() <= 1e-6
    assert qz_state.normals[..., 2].min() >= 1.0 - 1e-9


def test_jacobian_positive_for_solved_field(qz_state):
    inner = qz_state.prob.domain.inner_mask()
    assert qz_state.jac[inner].min() > 0.0


def test_export_mesh_obj(tmp_path):
    sol, _ = _exact_wang_constant(n=5)
    surf = dev.develop_affine_sphere(sol)
    path = tmp_path / "surface.obj"
    dev.export_mesh(surf, path)
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(t) for t in line.split()[1:]])
            elif line.startswith("f "):
                faces.append([int(t) for t in line.split()[1:]])
    assert len(verts) == 25
    assert len(faces) == 2 * 16
    flat = surf.positions.reshape(-1, 3)
    assert np.abs(np.array(verts) - flat).max() <= 1e-6
    idx = np.array(faces)
    assert idx.min() == 1 and idx.max() == 25  # OBJ indices are 1-based


def test_gauss_csv(tmp_path, qz_state):
    path = tmp_path / "gauss.csv"
    dev.write_gauss_csv(path, qz_state.surface.domain, qz_state.normals)
    with open(path) as fh:
        assert fh.readline().strip() == "x,y,N1,N2,N3"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    n = qz_state.surface.domain.n
    assert data.shape == (n * n, 5)
    assert np.array_equal(data[:, 2:].reshape(n, n, 3), qz_state.normals)
