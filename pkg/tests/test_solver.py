import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from layerkit.errors import InputError, PivotBreakdown, SignError
from layerkit.meshes import Mesh1D, MeshSpec, build_mesh, uniform_mesh
from layerkit.solver import (
    CD, RD, DiscreteSolution, SPProblem, Tridiagonal, assemble_central, assemble_fem_p1,
    assemble_upwind, error_energy, error_energy_parts, error_max, manufactured_problem,
    solve, thomas_solve,
)


def const(v):
    return lambda x: np.full(np.shape(x), float(v))


def random_mesh(rng, N):
    h = rng.uniform(0.05, 1.0, N)
    x = np.concatenate([[0.0], np.cumsum(h) / h.sum()])
    x[-1] = 1.0
    return Mesh1D(x)


# ---------------------------------------------------------------- Thomas

def test_thomas_identity():
    rhs = np.array([1.0, -2.0, 3.5])
    sys = Tridiagonal(np.zeros(2), np.ones(3), np.zeros(2), rhs)
    assert np.array_equal(thomas_solve(sys), rhs)


def test_thomas_hand_inverse():
    # [[2,-1,0],[-1,2,-1],[0,-1,2]] has inverse (1/4)[[3,2,1],[2,4,2],[1,2,3]]
    sys = Tridiagonal(np.array([-1.0, -1.0]), np.array([2.0, 2.0, 2.0]),
                      np.array([-1.0, -1.0]), np.array([1.0, 0.0, 0.0]))
    assert np.allclose(thomas_solve(sys), [0.75, 0.5, 0.25], rtol=1e-15)


def test_thomas_random_diagonally_dominant():
    rng = np.random.default_rng(7)
    n = 100
    sub, sup = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    sys = Tridiagonal(sub, diag, sup, rhs)
    u = thomas_solve(sys)
    assert np.max(np.abs(sys.to_dense() @ u - rhs)) <= 1e-10 * np.max(np.abs(rhs))


def test_thomas_zero_pivot():
    with pytest.raises(PivotBreakdown):
        thomas_solve(Tridiagonal(np.array([1.0]), np.array([0.0, 1.0]), np.array([1.0]),
                                 np.ones(2)))
    with pytest.raises(PivotBreakdown):
        thomas_solve(Tridiagonal(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]),
                                 np.ones(2)))


def test_tridiagonal_dimension_check():
    with pytest.raises(InputError):
        Tridiagonal(np.zeros(1), np.ones(3), np.zeros(2), np.ones(3))


# ---------------------------------------------------------------- manufactured problems

@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
@pytest.mark.parametrize("gamma", [1.0, 2.5])
def test_manufactured_cd_residual_symbolic(eps, gamma):
    x = sp.symbols("x")
    E, g = sp.Rational(1) * sp.nsimplify(eps), sp.nsimplify(gamma)
    u = (sp.exp(-g * x / E) - sp.exp(-g / E)) / (1 - sp.exp(-g / E)) + x * (1 - x)
    f_sym = sp.lambdify(x, -E * sp.diff(u, x, 2) - g * sp.diff(u, x) + u, "numpy")
    du_sym = sp.lambdify(x, sp.diff(u, x), "numpy")
    p = manufactured_problem("cd", eps, gamma)
    xs = np.linspace(0, 1, 1000)
    scale = 1.0 + np.abs(f_sym(xs))
    assert np.max(np.abs(p.f(xs) - f_sym(xs)) / scale) <= 1e-8
    assert np.max(np.abs(p.dexact(xs) - du_sym(xs)) / (1 + np.abs(du_sym(xs)))) <= 1e-10
    assert p.ua == pytest.approx(float(p.exact(0.0))) and p.ub == pytest.approx(float(p.exact(1.0)))
    assert p.ua == pytest.approx(1.0, abs=1e-15) and p.ub == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_manufactured_rd_residual_symbolic(eps):
    x = sp.symbols("x")
    E, g = sp.nsimplify(eps), sp.Integer(1)
    u = sp.exp(-g * x / E) + sp.exp(-g * (1 - x) / E) + sp.cos(sp.pi * x)
    f_sym = sp.lambdify(x, -E ** 2 * sp.diff(u, x, 2) + g ** 2 * u, "numpy")
    p = manufactured_problem("rd", eps)
    xs = np.linspace(0, 1, 1000)
    assert np.max(np.abs(p.f(xs) - f_sym(xs)) / (1 + np.abs(f_sym(xs)))) <= 1e-8


def test_smooth_regime_upwind_accuracy():
    p = manufactured_problem("cd", 1.0)
    assert error_max(solve(p, uniform_mesh(1024))) <= 1e-2


def test_sign_errors():
    bad_b = SPProblem(CD, 0.1, const(1.0), c=const(0.0), b=const(-1.0))
    with pytest.raises(SignError):
        assemble_upwind(bad_b, uniform_mesh(4))
    bad_c = SPProblem(RD, 0.1, const(1.0), c=const(0.0))
    with pytest.raises(SignError):
        assemble_central(bad_c, uniform_mesh(4))
    with pytest.raises(InputError):
        assemble_central(manufactured_problem("cd", 0.1), uniform_mesh(4))
    with pytest.raises(InputError):
        assemble_upwind(manufactured_problem("rd", 0.1), uniform_mesh(4))


# ---------------------------------------------------------------- upwind

def test_upwind_zero_data():
    p = SPProblem(CD, 1e-3, const(0.0), c=const(1.0), b=const(1.0))
    assert np.array_equal(solve(p, uniform_mesh(16)).values, np.zeros(17))


def test_upwind_two_cells_by_hand():
    # -u'' - u' = 1, h = 1/2:  (2/h^2 + 1/h) u_1 = 1  ->  u_1 = 1/10
    p = SPProblem(CD, 1.0, const(1.0), c=const(0.0), b=const(1.0))
    sol = solve(p, uniform_mesh(2))
    assert sol.values[1] == pytest.approx(0.1, rel=1e-15)
    assert sol.values[0] == 0.0 and sol.values[2] == 0.0


def test_upwind_conservative_equals_simple_on_uniform_constant_b():
    p = manufactured_problem("cd", 1e-2)
    m = uniform_mesh(32)
    a = solve(p, m).values
    b = solve(p, m, conservative=True).values
    assert np.allclose(a, b, rtol=1e-13, atol=1e-15)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(2, 60), eps=st.floats(1e-8, 1.0),
       conservative=st.booleans())
def test_upwind_discrete_maximum_principle(seed, N, eps, conservative):
    rng = np.random.default_rng(seed)
    mesh = random_mesh(rng, N)
    coef = rng.uniform(0.0, 2.0, 4)
    p = SPProblem(CD, eps, f=lambda x: coef[0] * (1 + np.sin(7 * x)) ** 2,
                  c=lambda x: coef[1] * (1 + x), b=lambda x: 1.0 + coef[2] * x * x,
                  gamma=1.0, ua=float(rng.uniform(0, 1)), ub=float(rng.uniform(0, 1)))
    sys = assemble_upwind(p, mesh, conservative)
    assert sys.is_m_matrix_pattern()
    assert np.all(solve(p, mesh, conservative=conservative).values >= -1e-14)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(2, 60), eps=st.floats(1e-8, 1.0))
def test_central_discrete_maximum_principle(seed, N, eps):
    rng = np.random.default_rng(seed)
    mesh = random_mesh(rng, N)
    p = SPProblem(RD, eps, f=lambda x: (1 + np.cos(5 * x)) ** 2, c=lambda x: 1.0 + x,
                  gamma=1.0, ua=float(rng.uniform(0, 1)), ub=0.0)
    assert assemble_central(p, mesh).is_m_matrix_pattern()
    assert np.all(solve(p, mesh, "central").values >= -1e-14)


# ---------------------------------------------------------------- constant reproduction

@pytest.mark.parametrize("scheme,kind", [("upwind", CD), ("central", RD), ("fem", CD), ("fem", RD)])
def test_constant_reproduction(scheme, kind):
    K, c = 2.75, 1.5
    rng = np.random.default_rng(3)
    mesh = random_mesh(rng, 23)
    if kind == CD:
        p = SPProblem(CD, 1e-3, const(c * K), c=const(c), b=lambda x: 1 + x, ua=K, ub=K)
    else:
        p = SPProblem(RD, 1e-3, const(c * K), c=const(c), ua=K, ub=K)
    assert np.allclose(solve(p, mesh, scheme).values, K, rtol=1e-13)


# ---------------------------------------------------------------- central and FEM

def test_central_two_cells_by_hand():
    # -u'' + u = 2 + x(1-x) has u = x(1-x); (8 + 1) u_1 = f(1/2) = 9/4
    p = SPProblem(RD, 1.0, lambda x: 2 + x * (1 - x), c=const(1.0))
    sol = solve(p, uniform_mesh(2), "central")
    assert sol.values[1] == pytest.approx(0.25, rel=1e-15)


def test_central_m_matrix_on_generated_meshes():
    p = manufactured_problem("rd", 1e-4)
    for fam in ("Shishkin", "SType", "BakhvalovType", "EmelyanovComposite", "Uniform"):
        mesh = build_mesh(MeshSpec(fam, eps=1e-4, N=64, layer_side="Both"))
        assert assemble_central(p, mesh).is_m_matrix_pattern()


def test_fem_reaction_against_fine_reference():
    p = SPProblem(RD, 1.0, const(1.0), c=const(1.0))
    coarse = uniform_mesh(10)
    ref = solve(p, uniform_mesh(10_000), "fem")
    sol = solve(p, coarse, "fem")
    ref_at = np.interp(coarse.nodes, ref.mesh.nodes, ref.values)
    assert np.max(np.abs(sol.values - ref_at)) <= 1e-4


def test_fem_reaction_symmetric():
    rng = np.random.default_rng(11)
    mesh = random_mesh(rng, 17)
    sys = assemble_fem_p1(manufactured_problem("rd", 1e-2), mesh)
    assert np.array_equal(sys.sub, sys.sup)


def test_determinism():
    p = manufactured_problem("cd", 1e-6)
    m = build_mesh(MeshSpec("Shishkin", eps=1e-6, N=128))
    a, b = solve(p, m).values, solve(p, m).values
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("scheme,kind,order", [("upwind", "cd", 0.9), ("central", "rd", 1.9),
                                                ("fem", "rd", 1.9), ("fem", "cd", 1.9)])
def test_smooth_refinement_orders(scheme, kind, order):
    p = manufactured_problem(kind, 1.0)
    e = [error_max(solve(p, uniform_mesh(N), scheme)) for N in (32, 64, 128)]
    rates = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(rates >= order)


# ---------------------------------------------------------------- error norms

def test_errors_vanish_on_exact_nodal_values():
    p = manufactured_problem("cd", 1e-2)
    m = build_mesh(MeshSpec("Shishkin", eps=1e-2, N=32))
    sol = DiscreteSolution(m, p.exact(m.nodes), "Upwind", p)
    assert error_max(sol) == 0.0
    h1, l2 = error_energy_parts(sol)
    # the energy error is then the interpolation error; bound it crudely
    assert error_energy(sol) <= 1.0 and h1 >= 0 and l2 >= 0


def test_energy_error_two_cells_x_squared():
    # e = x^2 - interpolant: per cell |e|_1^2 = h^3/3 and ||e||_0^2 = h^5/30
    p = SPProblem(CD, 1.0, const(0.0), c=const(0.0), b=const(1.0),
                  exact=lambda x: np.asarray(x) ** 2, dexact=lambda x: 2 * np.asarray(x))
    m = uniform_mesh(2)
    sol = DiscreteSolution(m, m.nodes ** 2, "FemP1", p)
    h1, l2 = error_energy_parts(sol)
    assert h1 ** 2 == pytest.approx(1 / 12, rel=1e-13)
    assert l2 ** 2 == pytest.approx(1 / 480, rel=1e-13)
    assert error_energy(sol) == pytest.approx(math.sqrt(41 / 480), rel=1e-13)


def test_energy_norm_dominates_weighted_seminorm():
    p = manufactured_problem("cd", 1e-4)
    sol = solve(p, build_mesh(MeshSpec("SType", eps=1e-4, N=64)), "fem")
    h1, _ = error_energy_parts(sol)
    assert error_energy(sol) >= math.sqrt(p.eps) * h1


def test_error_needs_exact():
    p = SPProblem(CD, 0.1, const(1.0), c=const(0.0), b=const(1.0))
    with pytest.raises(InputError):
        error_max(solve(p, uniform_mesh(4)))
