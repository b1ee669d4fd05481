import numpy as np
import pytest

from staterec.exceptions import DegenerateSensorError
from staterec.fem import v_inner, v_norm
from staterec.sensing import (
    Sensor,
    build_measurement_space,
    draw_sensors,
    kernel_load_vector,
    measure,
    riesz_representer,
)

# the benchmark's documented example sensor
EXAMPLE_SENSOR = Sensor(center=(0.23, 0.75), tau=0.06)


@pytest.fixture(scope="module")
def mspace(space4):
    return build_measurement_space(space4, draw_sensors(8, seed=404))


def test_sensor_validation():
    with pytest.raises(ValueError):
        Sensor(center=(0.0, 0.5), tau=0.1)
    with pytest.raises(ValueError):
        Sensor(center=(0.5, 0.5), tau=0.0)


def test_load_normalization(space4):
    load = kernel_load_vector(space4, EXAMPLE_SENSOR)
    # applying the load to the constant-1 nodal function (boundary included)
    assert abs(load.sum() - 1.0) < 1e-12
    assert abs(load @ np.ones(space4.nodes.shape[0]) - 1.0) < 1e-8


def test_load_gaussian_variant(space4):
    load = kernel_load_vector(space4, EXAMPLE_SENSOR, kernel="gaussian")
    assert abs(load.sum() - 1.0) < 1e-12
    with pytest.raises(ValueError):
        kernel_load_vector(space4, EXAMPLE_SENSOR, kernel="triangle")


def test_flat_kernel_approaches_domain_mean(space5, rng):
    # a huge spread makes the functional the plain mean over the domain
    sensor = Sensor(center=(0.5, 0.5), tau=50.0)
    load = kernel_load_vector(space5, sensor)
    u = rng.standard_normal(space5.n_interior)
    # exact integral of the P1 interpolant with zero boundary values
    direct_mean = space5.h**2 * u.sum()
    assert abs(load[space5.interior] @ u - direct_mean) <= 1e-3 * max(abs(direct_mean), 1.0)


def test_riesz_defining_identity(space4, rng):
    load = kernel_load_vector(space4, EXAMPLE_SENSOR)
    omega = riesz_representer(space4, EXAMPLE_SENSOR)
    for _ in range(5):
        v = rng.standard_normal(space4.n_interior)
        assert abs(v_inner(space4, omega, v) - load[space4.interior] @ v) < 1e-9
    assert abs(v_norm(space4, omega) ** 2 - load[space4.interior] @ omega.coefficients) < 1e-9


def test_representer_gram_symmetry(space4):
    s1 = Sensor(center=(0.25, 0.25), tau=0.06)
    s2 = Sensor(center=(0.75, 0.75), tau=0.08)
    w1 = riesz_representer(space4, s1)
    w2 = riesz_representer(space4, s2)
    assert abs(v_inner(space4, w1, w2) - v_inner(space4, w2, w1)) < 1e-10


def test_measurement_space_dimension(space4):
    sensors = draw_sensors(10, seed=42)
    ms = build_measurement_space(space4, sensors)
    assert ms.m == 10
    gram = ms.basis.gram()
    assert np.max(np.abs(gram - np.eye(10))) < 1e-10


def test_span_preserved(space4, mspace):
    # representers project exactly onto the basis span and vice versa
    coords = mspace.basis.coords(mspace.representers)
    recon = coords @ mspace.basis.vectors
    diff = mspace.representers - recon
    norms = [v_norm(space4, row) for row in diff]
    assert max(norms) < 1e-10


def test_single_sensor_basis(space4):
    ms = build_measurement_space(space4, [EXAMPLE_SENSOR])
    omega = riesz_representer(space4, EXAMPLE_SENSOR)
    expected = omega.coefficients / v_norm(space4, omega)
    assert np.allclose(ms.basis.vectors[0], expected, atol=1e-12)


def test_duplicate_sensor_degenerate(space4):
    with pytest.raises(DegenerateSensorError) as err:
        build_measurement_space(space4, [EXAMPLE_SENSOR, EXAMPLE_SENSOR])
    assert err.value.index == 1


def test_measure_orthonormality(space4, mspace):
    w = measure(mspace, mspace.basis.vectors[0], mspace.m)
    assert w[0] == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(w[1:])) < 1e-10


def test_measure_complement_is_zero(space4, mspace, rng):
    u = rng.standard_normal(space4.n_interior)
    w = mspace.measure(u)
    residual = u - w @ mspace.basis.vectors
    assert np.max(np.abs(mspace.measure(residual))) < 1e-10


def test_measure_contraction_and_pythagoras(space4, mspace, rng):
    for _ in range(5):
        u = rng.standard_normal(space4.n_interior)
        w = mspace.measure(u)
        assert np.linalg.norm(w) <= v_norm(space4, u) + 1e-12
        residual = u - w @ mspace.basis.vectors
        lhs = v_norm(space4, u) ** 2
        rhs = w @ w + v_norm(space4, residual) ** 2
        assert abs(lhs - rhs) < 1e-8


def test_measure_nested(space4, mspace, rng):
    u = rng.standard_normal(space4.n_interior)
    full = mspace.measure(u, mspace.m)
    for m in (1, 3, 5):
        assert np.allclose(mspace.measure(u, m), full[:m], atol=1e-13)


def test_measure_idempotent(space4, mspace, rng):
    u = rng.standard_normal(space4.n_interior)
    w = mspace.measure(u)
    projected = w @ mspace.basis.vectors
    assert np.max(np.abs(mspace.measure(projected) - w)) < 1e-10


def test_measure_range_errors(mspace, rng):
    u = rng.standard_normal(mspace.space.n_interior)
    with pytest.raises(ValueError):
        mspace.measure(u, mspace.m + 1)
    with pytest.raises(ValueError):
        mspace.measure(u, 0)


def test_draw_sensors_deterministic():
    a = draw_sensors(5, seed=11)
    b = draw_sensors(5, seed=11)
    assert a == b
    for s in a:
        assert 0.1 <= s.center[0] <= 0.9 and 0.1 <= s.center[1] <= 0.9
        assert 0.05 <= s.tau <= 0.1
