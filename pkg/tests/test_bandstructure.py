import csv
import io
import json
import os

import numpy as np
import pytest

from yeebands import bandstructure as bs
from yeebands.bandstructure import (
    AllPointsFailed,
    BandResult,
    BandRow,
    band_gaps,
    gap_between,
    run_bands,
    sweep_permittivity,
)
from yeebands.eigensolver import ConvergenceError, SolverConfig
from yeebands.lattice import KPath, kpath_samples, kpath_ticks, preset, preset_cell
from yeebands.material import Geometry, PermittivityField, Sphere, sample_B
from yeebands.spectral import eigen_angles

CFG = SolverConfig(num_eigs=6)


@pytest.fixture(scope="module")
def cubic4():
    return preset_cell(preset("cubic", (4, 4, 4)))


def _sphere(lat, eps=13.0):
    return sample_B(Geometry((Sphere((0.5, 0.5, 0.5), 0.15, eps),)), lat)


def _vacuum_omega(lat, k, count):
    q = np.sort(np.repeat(eigen_angles(lat, k).lambda_q, 2))[:count]
    return np.sqrt(q) / (2 * np.pi)


def test_vacuum_path_matches_closed_form(cubic4):
    lat, cell = cubic4
    samples = kpath_samples(KPath.parse("G-X-M|R-G", 2), cell)
    res = run_bands(lat, PermittivityField.uniform(lat.n), samples, CFG)
    assert len(res.rows) == len(samples)
    for row in res.rows:
        assert row.status == bs.STATUS_OK
        np.testing.assert_allclose(row.omega, _vacuum_omega(lat, row.k_solved, 6), rtol=1e-10)
        assert np.all(np.diff(row.omega) >= 0) and np.all(row.omega >= 0)


def test_single_point_gives_one_row(cubic4):
    lat, _ = cubic4
    res = run_bands(lat, _sphere(lat), [(0.0, np.array([0.25, 0.0, 0.0]))], CFG)
    assert len(res.rows) == 1 and res.rows[0].index == 0


def test_gamma_shift_is_recorded(cubic4):
    lat, cell = cubic4
    samples = kpath_samples(KPath.parse("G-X", 2), cell)
    res = run_bands(lat, _sphere(lat), samples, CFG)
    assert res.rows[0].gamma_shift and not res.rows[1].gamma_shift
    shift = res.rows[0].k_solved - res.rows[0].k
    # toward the next sample, of size GAMMA_SHIFT |b1| / (2 pi)
    toward = samples[1][1] / np.linalg.norm(samples[1][1])
    np.testing.assert_allclose(shift / np.linalg.norm(shift), toward, atol=1e-12)
    assert np.linalg.norm(shift) == pytest.approx(bs.GAMMA_SHIFT)
    assert res.metadata["gamma_shifts"][0]["index"] == 0


def test_continuity_sc_sphere_16():
    lat, cell = preset_cell(preset("cubic", (16, 16, 16)))
    res = run_bands(lat, _sphere(lat), kpath_samples(KPath.parse("G-X", 10), cell), SolverConfig())
    b = res.bands()
    assert b.shape == (11, 10) and not np.isnan(b).any()
    # Jumps are taken against the linear trend of each band so that the
    # light-line slope itself does not count; a dropped or spurious
    # eigenvalue still shows up as a jump of one band spacing.
    spacing = (b[:, -1] - b[:, 0]) / (b.shape[1] - 1)
    jump = np.abs(b[2:] - 2 * b[1:-1] + b[:-2])
    assert np.all(jump < 0.2 * spacing[1:-1, None])


def test_order_does_not_change_result(cubic4):
    lat, cell = cubic4
    samples = kpath_samples(KPath.parse("G-X-M", 2), cell)
    field = _sphere(lat)
    a = run_bands(lat, field, samples, CFG)
    b = run_bands(lat, field, samples, CFG, order=list(range(len(samples)))[::-1])
    assert a.csv_text() == b.csv_text()


def test_threads_do_not_change_result(cubic4):
    lat, cell = cubic4
    samples = kpath_samples(KPath.parse("X-M-R", 2), cell)
    field = _sphere(lat)
    assert run_bands(lat, field, samples, CFG, threads=1).csv_text() == \
        run_bands(lat, field, samples, CFG, threads=3).csv_text()


def test_scaling_lengths_scales_omega(cubic4):
    lat, _ = cubic4
    field = _sphere(lat)
    big = lat.scaled(2.0)
    ks = [np.array([0.2, 0.1, 0.0]), np.array([0.5, 0.5, 0.25])]
    a = run_bands(lat, field, [(0.0, k) for k in ks], CFG).bands()
    b = run_bands(big, field, [(0.0, k / 2.0) for k in ks], CFG).bands()
    np.testing.assert_allclose(b, a / 2.0, rtol=1e-10)


# ---------------------------------------------------------------------------
# Failures
# ---------------------------------------------------------------------------


def test_failed_rows_serialise_with_status(cubic4, monkeypatch):
    lat, _ = cubic4
    real = bs.solve_k

    def flaky(lattice, k, *args, **kwargs):
        if k[1] > 0:
            raise ConvergenceError("forced", 1.0, 5)
        return real(lattice, k, *args, **kwargs)

    monkeypatch.setattr(bs, "solve_k", flaky)
    samples = [(0.0, np.array([0.2, 0.0, 0.0])), (0.1, np.array([0.2, 0.1, 0.0]))]
    res = run_bands(lat, _sphere(lat), samples, CFG)
    assert [r.status for r in res.rows] == ["ok", "failed"]
    assert "forced" in res.rows[1].message
    rows = list(csv.reader(io.StringIO(res.csv_text())))
    assert rows[2][5] == "failed" and rows[2][6:] == ["nan"] * 6
    assert np.isnan(res.bands()[1]).all()


def test_all_failed_raises(cubic4):
    lat, _ = cubic4
    with pytest.raises(AllPointsFailed):
        run_bands(lat, _sphere(lat), [(0.0, np.array([0.2, 0.1, 0.0]))],
                  SolverConfig(num_eigs=4, max_inner=1))


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _fake(rows_omega, ks=None):
    rows = []
    for i, om in enumerate(rows_omega):
        k = np.zeros(3) if ks is None else ks[i]
        rows.append(BandRow(i, 0.1 * i, k, bs.STATUS_OK, np.asarray(om, dtype=float)))
    return BandResult(rows, len(rows_omega[0]))


def test_csv_format():
    res = _fake([[0.1, 1 / 3], [0.2, 0.4]])
    lines = res.csv_text().splitlines()
    assert lines[0] == "index,s,kx,ky,kz,status,omega_1,omega_2"
    assert len(lines) == 3
    assert lines[1].split(",")[7] == format(1 / 3, ".17g")
    assert float(lines[1].split(",")[7]) == 1 / 3


def test_gap_extraction():
    res = _fake([[0.1, 0.5, 0.6], [0.3, 0.65, 0.7]])
    gaps = band_gaps(res)
    assert len(gaps) == 1
    g = gaps[0]
    assert g["lower_band"] == 1 and g["lower"] == 0.3 and g["upper"] == 0.5
    assert g["width"] == pytest.approx(0.2) and g["midgap"] == pytest.approx(0.4)
    assert gap_between(res, 1) == g and gap_between(res, 2) is None


def test_touching_bands_are_not_a_gap():
    res = _fake([[0.5, 0.5 * (1 + 1e-12)], [0.2, 0.6]])
    assert band_gaps(res) == []


def test_vacuum_has_no_gap(cubic4):
    lat, cell = cubic4
    p = preset("cubic", (4, 4, 4))
    samples = kpath_samples(KPath.parse(p.path, 3), cell)
    res = run_bands(lat, PermittivityField.uniform(lat.n), samples, SolverConfig(num_eigs=4))
    assert band_gaps(res) == []


def test_write_outputs(tmp_path):
    res = _fake([[0.1, 0.2], [0.3, 0.4]])
    res.metadata["note"] = np.float64(1.5)
    res.write_csv(str(tmp_path / "out.csv"))
    res.write_json(str(tmp_path / "sub" / "out.json"))
    res.write_svg(str(tmp_path / "out.svg"), [(0.0, "Γ"), (0.1, "X")])
    assert (tmp_path / "out.csv").read_text() == res.csv_text()
    data = json.loads((tmp_path / "sub" / "out.json").read_text())
    assert data["num_bands"] == 2 and len(data["rows"]) == 2 and data["metadata"]["note"] == 1.5
    svg = (tmp_path / "out.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2 and "Γ" in svg
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]


def test_svg_ticks_from_path(cubic4):
    _, cell = cubic4
    ticks = kpath_ticks(KPath.parse("G-X|M-R", 2), cell)
    assert [t[0] for t in ticks] == [0, 2, 3, 5]
    assert ticks[1][1] == pytest.approx(ticks[2][1])


# ---------------------------------------------------------------------------
# Permittivity sweep
# ---------------------------------------------------------------------------


def test_sweep_repeated_eps_identical(cubic4):
    lat, _ = cubic4
    samples = [(0.0, np.array([0.25, 0.0, 0.0])), (0.1, np.array([0.5, 0.0, 0.0]))]
    out = sweep_permittivity(lat, lambda e: _sphere(lat, e), samples, CFG, [6.0, 6.0])
    assert out[0].csv_text() == out[1].csv_text()
    assert out[0].metadata["eps_in"] == 6.0 and "gaps" in out[0].metadata
    with pytest.raises(ValueError):
        sweep_permittivity(lat, lambda e: _sphere(lat, e), samples, CFG, [0.5])
