"""Oracle tests for array geometry, steering, and near-field responses."""

import numpy as np
import pytest

from slacsim.geometry import (ArrayKind, Direction, Wavelength, direction_between,
                              element_positions, fraunhofer_distance,
                              near_field_response, steering_vector, ula, upa)

C_LIGHT = 299792458.0


def test_wavelength_from_carrier():
    wl = Wavelength(30e9)
    assert wl.lam == pytest.approx(C_LIGHT / 30e9)
    assert wl.wavenumber == pytest.approx(2 * np.pi / wl.lam)


def test_wavelength_rejects_nonpositive():
    with pytest.raises(ValueError):
        Wavelength(0.0)


def test_ula_positions_centered_oracle():
    arr = ula(4, 0.5)
    pos = element_positions(arr)
    # 4 elements, spacing 0.5, centered on the reference point, along x
    expected_x = np.array([-0.75, -0.25, 0.25, 0.75])
    assert np.allclose(pos[:, 0], expected_x)
    assert np.allclose(pos[:, 1:], 0.0)
    assert np.allclose(pos.mean(axis=0), 0.0)


def test_upa_positions_centered_oracle():
    arr = upa(2, 2, 1.0)
    pos = element_positions(arr)
    assert pos.shape == (4, 3)
    assert np.allclose(pos.mean(axis=0), 0.0)
    # 2x2 grid in the x-z plane at unit spacing
    xs = sorted(pos[:, 0])
    zs = sorted(pos[:, 2])
    assert np.allclose(xs, [-0.5, -0.5, 0.5, 0.5])
    assert np.allclose(zs, [-0.5, -0.5, 0.5, 0.5])
    assert np.allclose(pos[:, 1], 0.0)


def test_upa_reference_offset():
    ref = np.array([1.0, 2.0, 3.0])
    arr = upa(3, 3, 0.25, reference_point=ref)
    pos = element_positions(arr)
    assert np.allclose(pos.mean(axis=0), ref)


def test_steering_vector_elementwise_oracle():
    wl = Wavelength(30e9)
    arr = upa(3, 2, wl.lam / 2)
    d = Direction(azimuth=0.4, elevation=-0.2)
    a = steering_vector(arr, d, wl)
    pos = element_positions(arr)
    u = d.unit_vector()
    for m in range(arr.num_elements):
        expected = np.exp(1j * wl.wavenumber * u @ (pos[m] - arr.reference_point))
        assert a[m] == pytest.approx(expected, abs=1e-12)


def test_steering_broadside_all_ones():
    wl = Wavelength(30e9)
    arr = ula(8, wl.lam / 2, axis=(1.0, 0.0, 0.0))
    # broadside: direction orthogonal to the array axis
    a = steering_vector(arr, Direction(azimuth=np.pi / 2, elevation=0.0), wl)
    assert np.allclose(a, 1.0)


def test_steering_unit_modulus():
    wl = Wavelength(28e9)
    arr = upa(4, 4, wl.lam / 2)
    a = steering_vector(arr, Direction(azimuth=1.1, elevation=0.3), wl)
    assert np.allclose(np.abs(a), 1.0)


def test_near_field_response_distance_oracle():
    wl = Wavelength(30e9)
    arr = upa(3, 3, wl.lam / 2)
    src = np.array([0.2, 0.5, -0.1])
    b = near_field_response(arr, src, wl)
    pos = element_positions(arr)
    d_ref = np.linalg.norm(src - arr.reference_point)
    for m in range(arr.num_elements):
        d_m = np.linalg.norm(src - pos[m])
        expected = np.exp(-1j * wl.wavenumber * (d_m - d_ref))
        assert b[m] == pytest.approx(expected, abs=1e-12)


def test_near_field_unit_modulus():
    wl = Wavelength(30e9)
    arr = upa(8, 8, wl.lam / 2)
    b = near_field_response(arr, [1.0, 3.0, -2.0], wl)
    assert np.allclose(np.abs(b), 1.0)


def test_fraunhofer_distance_oracle():
    # 32x32 half-wavelength UPA at lambda = 0.01 m: D = sqrt(2)*31*0.005,
    # 2 D^2 / lambda = 9.61 m
    wl = Wavelength(C_LIGHT / 0.01)
    arr = upa(32, 32, 0.005)
    d = np.sqrt(2.0) * 31 * 0.005
    assert fraunhofer_distance(arr, wl) == pytest.approx(2 * d * d / 0.01, rel=1e-12)


def test_far_field_limit_of_near_field_response():
    """Beyond 100x the Fraunhofer distance the near-field response converges
    to the plane-wave steering vector (elementwise phase error < 1e-2 rad)."""
    wl = Wavelength(30e9)
    arr = upa(16, 16, wl.lam / 2)
    r = 100.0 * fraunhofer_distance(arr, wl)
    direction = Direction(azimuth=0.7, elevation=0.25)
    src = arr.reference_point + r * direction.unit_vector()
    b = near_field_response(arr, src, wl)
    a = steering_vector(arr, direction, wl)
    phase_err = np.angle(b * np.conj(a))
    assert np.max(np.abs(phase_err)) < 1e-2


def test_direction_between_unit_vector():
    d = direction_between([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    assert np.allclose(d.unit_vector(), np.ones(3) / np.sqrt(3.0))


def test_upa_kind():
    arr = upa(2, 3, 0.5)
    assert arr.kind is ArrayKind.UPA
    assert arr.num_elements == 6
