"""Boundary-potential synthesis: wall identities, kernel structure,
truncation reporting, and stencil-order residual decay."""

import numpy as np
import pytest

from zkrect import (eigen_system, eval_j0, eval_j0_dx, eval_j1, eval_j1_dx,
                    make_theta_grid, pde_residual, potential_field, trace_hat)
from zkrect.cubic import limit_root_pair
from zkrect.errors import (DomainError, GridError, InvalidInputError,
                           ShapeError)
from zkrect.potentials import _kernel


@pytest.fixture(scope="module")
def pulse_setup():
    sys_ = eigen_system("a", np.pi, 6)
    t = np.linspace(0.0, 1.0, 201)
    pulse = np.exp(-(((t - 0.5) / 0.15) ** 2))
    nu = pulse[:, None] * sys_.psi(1, sys_.nodes)[None, :]
    hat = trace_hat(nu, t, sys_, make_theta_grid(40.0, 0.05))
    scale = float(np.sqrt(np.mean(pulse ** 2)))
    return sys_, t, nu, hat, scale


def test_theta_grid_symmetric_and_uniform():
    g = make_theta_grid(10.0, 0.5)
    assert 0.0 in g
    assert np.allclose(g, -g[::-1])
    assert np.allclose(np.diff(g), 0.5)
    with pytest.raises(InvalidInputError):
        make_theta_grid(-1.0, 0.5)
    with pytest.raises(InvalidInputError):
        make_theta_grid(10.0, 20.0)


def test_trace_hat_conjugate_symmetry(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    vals = hat.values
    assert np.max(np.abs(vals - np.conj(vals[::-1]))) < 1e-12 * np.max(
        np.abs(vals))


def test_trace_hat_shape_guard(pulse_setup):
    sys_, t, nu, *_ = pulse_setup
    with pytest.raises(ShapeError):
        trace_hat(nu[:, :3], t, sys_)


def test_truncation_flag(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    # the 0.15-wide pulse still carries ~1e-5 relative mass at the window
    # edges, so it is reported as truncated
    assert hat.truncated
    narrow = np.exp(-(((t - 0.5) / 0.08) ** 2))
    nu2 = narrow[:, None] * sys_.psi(1, sys_.nodes)[None, :]
    hat2 = trace_hat(nu2, t, sys_)
    assert not hat2.truncated


def test_wall_identities(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    nodes = sys_.nodes
    j0 = eval_j0(hat, t, 0.0, nodes)
    rec = np.sqrt(np.mean((j0 - nu) ** 2)) / scale
    assert rec < 1e-3
    # the complementary traces vanish identically at the wall
    assert np.max(np.abs(eval_j0_dx(hat, t, 0.0, nodes))) < 1e-3 * scale
    assert np.max(np.abs(eval_j1(hat, t, 0.0, nodes))) < 1e-3 * scale
    # and the second family hands the trace to its normal derivative
    j1x = eval_j1_dx(hat, t, 0.0, nodes)
    assert np.sqrt(np.mean((j1x - nu) ** 2)) / scale < 1e-3


def test_reconstruction_improves_under_theta_refinement(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    fine = trace_hat(nu, t, sys_, make_theta_grid(60.0, 0.025))
    def rec_err(h):
        j0 = eval_j0(h, t, 0.0, sys_.nodes)
        return np.sqrt(np.mean((j0 - nu) ** 2)) / scale
    e_coarse, e_fine = rec_err(hat), rec_err(fine)
    assert e_fine < e_coarse < 1e-3
    assert fine.tail_fraction() < hat.tail_fraction()


def test_field_bounded_into_the_half_strip(pulse_setup):
    # roots have Re >= 0, so every Fourier component is non-increasing as
    # x -> -inf; the theta = 0 component of the j0 kernel is constant in x,
    # so boundedness (not decay) is the sharp statement
    sys_, t, nu, hat, scale = pulse_setup
    wall = np.max(np.abs(eval_j0(hat, t, 0.0, sys_.nodes)))
    near = np.max(np.abs(eval_j0(hat, t, -0.5, sys_.nodes)))
    far = np.max(np.abs(eval_j0(hat, t, -6.0, sys_.nodes)))
    assert near < 1.5 * wall
    assert far < 1.5 * wall


def test_kernel_symmetric_under_root_swap():
    rng = np.random.default_rng(8)
    for _ in range(20):
        pair = limit_root_pair(rng.uniform(-30, 30), rng.uniform(-10, 10))
        r1 = np.array([pair.r1])
        r2 = np.array([pair.r2])
        for kind in ("j0", "j1", "j0x", "j1x"):
            a = _kernel(kind, r1, r2, -0.7)
            b = _kernel(kind, r2, r1, -0.7)
            assert np.max(np.abs(a - b)) < 1e-10 * max(1.0, np.max(np.abs(a)))


def test_kernel_confluent_limit_continuous():
    # approach equal roots: the two-root formula must glide into the
    # closed-form limit rather than blow up on the 1/(r1 - r2) factor
    r = np.array([0.9 + 0.4j])
    x = -0.8
    exact_j0 = (1.0 - r * x) * np.exp(r * x)
    exact_j1 = x * np.exp(r * x)
    for eps in (1e-7, 1e-9, 1e-11):
        rp = r * (1.0 + eps)
        assert abs(_kernel("j0", r, rp, x)[0] - exact_j0[0]) < 1e-5
        assert abs(_kernel("j1", r, rp, x)[0] - exact_j1[0]) < 1e-5


def test_positive_x_rejected(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    with pytest.raises(DomainError):
        eval_j0(hat, t, 0.3, sys_.nodes)
    with pytest.raises(DomainError):
        potential_field(hat, "j0", t, np.linspace(-1.0, 0.5, 8), sys_.nodes)


def test_potential_field_metadata(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    tg = np.linspace(0.3, 0.7, 21)
    xg = np.linspace(-0.5, 0.0, 11)
    fld = potential_field(hat, "j1", tg, xg, sys_.nodes)
    md = fld.metadata
    assert md["kind"] == "j1"
    assert md["theta_max"] == pytest.approx(40.0)
    assert md["input_truncated"] is True
    assert fld.values.shape == (21, 11, sys_.nodes.size)
    assert fld.imag_residual < 1e-8
    with pytest.raises(InvalidInputError):
        potential_field(hat, "j2", tg, xg, sys_.nodes)


def test_residual_grid_guards(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    tg = np.linspace(0.3, 0.7, 21)
    ok_x = np.linspace(-1.0, 0.0, 17)
    with pytest.raises(GridError):
        pde_residual(potential_field(hat, "j0", tg,
                                     np.linspace(-1.0, 0.0, 5), sys_.nodes))
    with pytest.raises(GridError):
        pde_residual(potential_field(hat, "j0", tg[:2], ok_x, sys_.nodes))
    fld = potential_field(hat, "j0", tg, ok_x, np.linspace(0.1, 3.0, 9))
    with pytest.raises(GridError):
        pde_residual(fld)


def test_residual_decays_at_second_order(pulse_setup):
    sys_, t, nu, hat, scale = pulse_setup
    tg = np.linspace(0.2, 0.8, 481)
    res = []
    for nx in (16, 32):
        xg = np.linspace(-1.0, 0.0, nx + 1)
        res.append(pde_residual(potential_field(hat, "j0", tg, xg,
                                                sys_.nodes)))
    assert 3.0 < res[0] / res[1] < 5.0


def test_residual_detects_wrong_drift(pulse_setup):
    # evaluating with a deliberately wrong advection coefficient must leave
    # an O(1) residual: the audit actually measures the equation
    sys_, t, nu, hat, scale = pulse_setup
    tg = np.linspace(0.2, 0.8, 481)
    xg = np.linspace(-1.0, 0.0, 33)
    fld = potential_field(hat, "j0", tg, xg, sys_.nodes)
    honest = pde_residual(fld)
    wrong = pde_residual(fld, config=2.5)
    assert wrong > 50 * honest
