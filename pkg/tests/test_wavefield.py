import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wvasim.config import OpticalSetup
from wvasim.constants import ATTOSECOND, DEG
from wvasim.polarization import WeakValue, angular_frequency, weak_value
from wvasim.simulation import analytic_period, nominal_period
from wvasim.wavefield import (FieldMap, GridError, InterferenceSpec, SamplingError,
                              TemporalEnvelope, TransverseGrid, apply_double_slit, crop_center,
                              demagnify, far_field, fringe_shift_theory, interfere,
                              interfere_arrays, make_input_beam)

LAM, F = 632.992e-9, 1.0


def gaussian_fraunhofer(x2, y2, s):
    """Exact transform of exp(-(x^2+y^2)/s^2) through a lens of focal F."""
    lf = LAM * F
    return (math.pi * s * s / (1j * lf)) * np.exp(-(math.pi * s / lf) ** 2 * (x2**2 + y2**2))


def test_grid_validation():
    with pytest.raises(GridError):
        TransverseGrid(100, 256, 1e-6, 1e-6)
    with pytest.raises(GridError):
        TransverseGrid(128, 256, 1e-6, 1e-6)
    with pytest.raises(GridError):
        TransverseGrid(256, 256, 0.0, 1e-6)
    g = TransverseGrid(256, 512, 1e-6, 2e-6)
    assert g.x[128] == 0.0 and g.y[256] == 0.0
    assert g.extent == (256e-6, 1024e-6)


def test_fieldmap_shape_check_and_read_only():
    g = TransverseGrid(256, 256, 1e-6, 1e-6)
    with pytest.raises(GridError):
        FieldMap(g, np.zeros((256, 512), complex))
    fm = FieldMap(g, np.ones((256, 256), complex))
    with pytest.raises(ValueError):
        fm.amplitude[0, 0] = 2


def test_input_beam_requires_margin():
    g = TransverseGrid(256, 256, 10e-6, 10e-6)
    with pytest.raises(GridError):
        make_input_beam(g, 0.65e-3)
    beam = make_input_beam(g, 0.5e-3)
    # 1/e^2 intensity diameter
    row = beam.intensity[128]
    x = g.x
    assert row[np.argmin(abs(x - 0.25e-3))] == pytest.approx(math.exp(-2), rel=1e-12)


def test_far_field_of_gaussian_matches_closed_form():
    s = 0.2e-3
    src = TransverseGrid(256, 256, 10 * s / 256, 10 * s / 256)
    beam = make_input_beam(src, 2 * s)
    det = TransverseGrid(256, 256, 20e-6, 20e-6)
    ff = far_field(beam, F, LAM, det)
    yy, xx = np.meshgrid(det.y, det.x, indexing="ij")
    exact = gaussian_fraunhofer(xx, yy, s)
    assert np.max(abs(ff.amplitude - exact)) < 1e-9 * np.max(abs(exact))


def test_fft_path_conserves_power_and_matches_matrix_dft():
    src = TransverseGrid(256, 256, 8e-6, 8e-6)
    beam = make_input_beam(src, 0.3e-3)
    lf = LAM * F
    det = TransverseGrid(256, 256, lf / (256 * 8e-6), lf / (256 * 8e-6))
    ff = far_field(beam, F, LAM, det)
    assert ff.power == pytest.approx(beam.power, rel=1e-12)
    nudged = TransverseGrid(256, 256, det.dx * (1 - 1e-9), det.dy * (1 - 1e-9))
    mft = far_field(beam, F, LAM, nudged)
    assert np.max(abs(mft.amplitude - ff.amplitude)) < 1e-6 * np.max(abs(ff.amplitude))


def test_far_field_rejects_aliasing_window():
    src = TransverseGrid(256, 256, 50e-6, 50e-6)
    det = TransverseGrid(4096, 256, 10e-6, 10e-6)
    with pytest.raises(SamplingError):
        far_field(make_input_beam(src, 1e-3), F, LAM, det)


def test_double_slit_masks_are_disjoint_mirror_images():
    g = TransverseGrid(256, 1024, 20e-6, 10e-6)
    beam = make_input_beam(g, 1e-3)
    up, lo = apply_double_slit(beam, 2e-3, 0.3e-3)
    ys_up = g.y[np.any(up.amplitude != 0, axis=1)]
    ys_lo = g.y[np.any(lo.amplitude != 0, axis=1)]
    assert ys_up.min() > 1e-3 and ys_up.max() < 1.3e-3
    assert np.allclose(np.sort(-ys_lo), ys_up)
    assert not np.any((up.amplitude != 0) & (lo.amplitude != 0))


def test_demagnify_conserves_power():
    g = TransverseGrid(256, 256, 10e-6, 10e-6)
    beam = make_input_beam(g, 0.4e-3)
    small = demagnify(beam, 0.085)
    assert small.grid.dx == pytest.approx(0.85e-6)
    assert small.power == pytest.approx(beam.power, rel=1e-12)


def test_temporal_overlap():
    env = TemporalEnvelope(1e-9)
    assert env.overlap(0.0) == 1.0
    assert env.overlap(1e-9) == pytest.approx(math.exp(-0.5))
    with pytest.raises(ValueError):
        TemporalEnvelope(0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.5, 89), st.floats(-89, -0.5), st.floats(0, 30), st.floats(-2000, 2000),
       st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_interfere_equals_coherent_sum(bu, bd, tau_as, t0_as, vis, seed):
    rng = np.random.default_rng(seed)
    uu = rng.normal(size=(8, 5)) + 1j * rng.normal(size=(8, 5))
    ud = rng.normal(size=(8, 5)) + 1j * rng.normal(size=(8, 5))
    om = angular_frequency(LAM)
    tau = tau_as * ATTOSECOND
    spec = InterferenceSpec(weak_value(bu * DEG, tau, om), weak_value(bd * DEG, tau, om),
                            tau, om, t0=t0_as * ATTOSECOND, visibility=vis)
    au, ad = 1 / abs(spec.weak_value_u.value), 1 / abs(spec.weak_value_d.value)
    full = abs(au * uu * np.exp(1j * spec.phase) + ad * ud) ** 2
    incoherent = au**2 * abs(uu) ** 2 + ad**2 * abs(ud) ** 2
    expected = (1 - vis) * incoherent + vis * full  # gamma = 1 at attosecond delays
    assert np.allclose(interfere_arrays(uu, ud, spec), expected, rtol=1e-10, atol=1e-12)


def test_interfere_checks_grids():
    g1 = TransverseGrid(256, 256, 1e-6, 1e-6)
    g2 = TransverseGrid(256, 256, 2e-6, 1e-6)
    spec = InterferenceSpec(WeakValue(1.0), WeakValue(-1.0), 0.0, 1.0)
    with pytest.raises(GridError):
        interfere(FieldMap(g1, np.ones((256, 256), complex)),
                  FieldMap(g2, np.ones((256, 256), complex)), spec)


def test_spec_validation_and_phase():
    om = angular_frequency(LAM)
    with pytest.raises(ValueError):
        InterferenceSpec(WeakValue(1.0), WeakValue(-1.0), 0.0, om, visibility=1.5)
    spec = InterferenceSpec(WeakValue(-1.0), WeakValue(1.0), 1e-18, om, t0=9e-16)
    assert spec.relative_delay == pytest.approx(-2e-18 + 9e-16)
    assert fringe_shift_theory(spec, 1.5e-3) == pytest.approx(1.5e-3 * spec.phase / (2 * math.pi))
    with pytest.raises(ValueError):
        fringe_shift_theory(spec, 0.0)
    with pytest.raises(ValueError):
        InterferenceSpec(WeakValue(400.0), WeakValue(1.0), 1e-11, om).check_weak_regime()


def test_crop_center():
    a = np.arange(64).reshape(8, 8)
    c = crop_center(a, 4, 2)
    assert c.shape == (4, 2) and c[0, 0] == a[2, 3]
    with pytest.raises(GridError):
        crop_center(a, 9, 2)


def test_fringe_period_geometry(sim16):
    setup = sim16.setup
    assert nominal_period(setup) == pytest.approx(1.489e-3, rel=1e-3)
    assert sim16.fringe_period == pytest.approx(analytic_period(setup), rel=1e-3)
    assert sim16.fringe_period == pytest.approx(nominal_period(setup), rel=0.02)


def test_fringe_moves_up_for_positive_phase(sim45):
    # at +-45 deg, phi = -2 w tau: positive delay moves fringes to lower rows
    ref = sim45.intensity(0.0).sum(axis=1)
    moved = sim45.intensity(20 * ATTOSECOND).sum(axis=1)
    centre = np.argmax(ref[800:1200]) + 800
    window = slice(centre - 50, centre + 50)
    assert np.argmax(moved[window]) < np.argmax(ref[window])
