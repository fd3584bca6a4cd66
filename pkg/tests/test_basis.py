import numpy as np
import pytest

from zkrect import BcCase, eigen_system, project, synthesize
from zkrect.errors import ConfigError

CASES = ["a", "b", "c", "d"]


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("L", [1.0, np.pi])
def test_gram_matrix_is_identity(case, L):
    sys_ = eigen_system(case, L, 32)
    G = sys_.gram_matrix()
    assert np.max(np.abs(G - np.eye(32))) < 1e-10


@pytest.mark.parametrize("case", CASES)
def test_eigen_relation_analytic(case):
    sys_ = eigen_system(case, np.pi, 16)
    y = np.linspace(0.01, np.pi - 0.01, 57)
    for l in range(16):
        res = sys_.d2psi(l, y) + sys_.lambdas[l] * sys_.psi(l, y)
        assert np.max(np.abs(res)) < 1e-10 * max(1.0, sys_.lambdas[l])


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("L", [1.0, np.pi])
def test_eigen_relation_finite_difference(case, L):
    # independent check: centered second difference reproduces -lambda psi
    sys_ = eigen_system(case, L, 12)
    h = 1e-5 * L
    y = np.linspace(0.1 * L, 0.9 * L, 23)
    for l in range(1, 12):
        lam = sys_.lambdas[l]
        if lam == 0.0:
            continue
        dd = (sys_.psi(l, y + h) - 2 * sys_.psi(l, y)
              + sys_.psi(l, y - h)) / h ** 2
        rel = np.max(np.abs(dd + lam * sys_.psi(l, y))) / lam
        assert rel < 1e-5


@pytest.mark.parametrize("L", [1.0, np.pi])
def test_trace_conditions(L):
    tol = 1e-12
    n = 20
    a = eigen_system("a", L, n)
    b = eigen_system("b", L, n)
    c = eigen_system("c", L, n)
    d = eigen_system("d", L, n)
    ends = np.array([0.0, L])
    for l in range(n):
        assert np.max(np.abs(a.psi(l, ends))) < tol
        assert np.max(np.abs(b.dpsi(l, ends))) < tol
        assert abs(c.psi(l, np.array([0.0]))[0]) < tol
        assert abs(c.dpsi(l, np.array([L]))[0]) < tol
        assert abs(d.psi(l, np.array([0.0]))[0]
                   - d.psi(l, np.array([L]))[0]) < tol
        assert abs(d.dpsi(l, np.array([0.0]))[0]
                   - d.dpsi(l, np.array([L]))[0]) < tol


@pytest.mark.parametrize("case", CASES)
def test_eigenvalues_sorted_and_constant_first(case):
    sys_ = eigen_system(case, 2.0, 16)
    lam = sys_.lambdas
    assert np.all(np.diff(lam) >= -1e-14)
    if case in ("b", "d"):
        # zero mode leads and is flat
        assert lam[0] == 0.0
        y = np.linspace(0.0, 2.0, 11)
        assert np.ptp(sys_.psi(0, y)) < 1e-14
    else:
        assert lam[0] > 0.0


def test_periodic_eigenvalues_come_in_pairs():
    sys_ = eigen_system("d", 1.5, 9)
    lam = sys_.lambdas
    assert lam[0] == 0.0
    for i in (1, 3, 5, 7):
        assert lam[i] == pytest.approx(lam[i + 1], rel=0, abs=1e-12)


@pytest.mark.parametrize("case", CASES)
def test_project_synthesize_round_trip(case):
    rng = np.random.default_rng(7)
    sys_ = eigen_system(case, np.pi, 12)
    coeffs = rng.standard_normal(12)
    samples = sys_.synthesize(coeffs)          # values at quadrature nodes
    back = sys_.project(samples)
    assert np.max(np.abs(back - coeffs)) < 1e-12


def test_module_level_project_synthesize_agree():
    sys_ = eigen_system("c", 1.0, 8)
    coeffs = np.arange(8.0)
    assert np.allclose(synthesize(coeffs, sys_), sys_.synthesize(coeffs),
                       rtol=0, atol=1e-14)
    vals = sys_.synthesize(coeffs)
    assert np.allclose(project(vals, sys_), sys_.project(vals),
                       rtol=0, atol=1e-14)


def test_refine_keeps_modes_and_orthonormality():
    sys_ = eigen_system("a", np.pi, 10)
    fine = sys_.refine(2.0)
    assert np.array_equal(fine.lambdas, sys_.lambdas)
    assert fine.nodes.size > sys_.nodes.size
    G = fine.gram_matrix()
    assert np.max(np.abs(G - np.eye(10))) < 1e-12


def test_quadrature_weights_positive_and_sum_to_L():
    for case in CASES:
        sys_ = eigen_system(case, 2.5, 8)
        assert np.all(sys_.weights > 0)
        assert np.sum(sys_.weights) == pytest.approx(2.5, rel=1e-12)


def test_case_parse():
    assert BcCase.parse("a") is BcCase.DIRICHLET_DIRICHLET
    assert BcCase.parse("d") is BcCase.PERIODIC
    assert BcCase.parse(BcCase.NEUMANN_NEUMANN) is BcCase.NEUMANN_NEUMANN
    with pytest.raises(ConfigError):
        BcCase.parse("e")


def test_bad_arguments_rejected():
    with pytest.raises(ConfigError):
        eigen_system("a", -1.0, 8)
    with pytest.raises(ConfigError):
        eigen_system("a", 1.0, 0)
