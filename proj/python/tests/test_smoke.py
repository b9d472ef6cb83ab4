import os
import pathlib

import numpy as np
import pytest

import rcto

CONFIGS = pathlib.Path(
    os.environ.get("RCTO_CONFIG_DIR", pathlib.Path(__file__).resolve().parents[2] / "configs")
)


def test_load_and_normalize():
    p = rcto.load_problem(str(CONFIGS / "tiny.cfg"))
    assert (p.nx, p.ny) == (6, 4)
    assert p.member_count == 5
    again = rcto.build_problem(p.normalize())
    assert again.normalize() == p.normalize()


def test_config_errors_raise():
    with pytest.raises(rcto.Error, match="config"):
        rcto.build_problem('{"mesh": {"nx": 0, "ny": 2}}')


def test_gradients_are_accurate():
    fams = rcto.check_gradients(rcto.load_problem(str(CONFIGS / "tiny.cfg")))
    assert [f["name"] for f in fams] == ["x_c", "x_t", "x_p"]
    assert all(f["max_rel_error"] < 1e-4 for f in fams)


def test_aci_wide_section():
    r = rcto.aci(str(CONFIGS / "prismatic_3in.sec"))
    assert r["load_kN"] == pytest.approx(19.2, rel=0.05)


def test_optimize_and_bundle_round_trip(tmp_path):
    p = rcto.load_problem(str(CONFIGS / "tiny.cfg"))
    seen = []
    res = rcto.optimize(p, str(tmp_path / "out"), progress=lambda rec: seen.append(rec["compliance"]))
    assert len(seen) == len(res["history"])
    assert res["density"].shape == (24,)
    assert np.all((res["density"] >= 0) & (res["density"] <= 1))
    back = rcto.read_bundle(str(tmp_path / "out"))
    assert np.array_equal(back["density"], res["density"])
    assert np.array_equal(back["sizing"], res["sizing"])
    assert rcto.density_grid(res, p.nx, p.ny).shape == (4, 6)
    rcto.export_bundle(str(tmp_path / "out"), "vtk", str(tmp_path / "vtk"))
    assert (tmp_path / "vtk" / "design.vtk").read_text().startswith("# vtk DataFile Version 3.0")


def test_vts_reports_thickness():
    text = (CONFIGS / "tiny.cfg").read_text().replace('"mode": "binary"', '"mode": "vts"')
    p = rcto.build_problem(text.replace('"max_iters": 40', '"max_iters": 10'))
    assert p.mode == "vts"
    res = rcto.optimize(p)
    assert np.allclose(res["thickness"], res["density"] * 1.0)
    assert np.array_equal(res["sub_minimum"] == 1.0, res["density"] < 0.05)
