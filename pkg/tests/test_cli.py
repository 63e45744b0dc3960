import csv
import io
import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest
from referencing import Registry, Resource

from oimac.cli import DECOMP_KINDS, bounds_csv, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def _validator():
    def load(name):
        return json.loads(resources.files("oimac").joinpath(f"schema/{name}").read_text())
    report, dist = load("report.schema.json"), load("distribution.schema.json")
    reg = Registry().with_resources([(s["$id"], Resource.from_contents(s))
                                     for s in (report, dist)])
    return jsonschema.Draft202012Validator(report, registry=reg)


# ---------------------------------------------------------------- bounds

def test_peak_csv_shape_and_ordering(capsys):
    code, out, _ = run(capsys, "bounds", "--family", "peak", "--a1", "0.3", "--snr-steps", "5")
    assert code == 0
    assert out.splitlines()[0] == "snr_db,sigma,bound_name,kind,value"
    rows = _rows(out)
    assert len(rows) == 5 * 4
    for i in range(0, len(rows), 4):
        block = rows[i:i + 4]
        up = min(float(r["value"]) for r in block if r["kind"] == "upper")
        assert all(float(r["value"]) <= up for r in block if r["kind"] == "lower")
        assert float(block[0]["sigma"]) == pytest.approx(10 ** (-float(block[0]["snr_db"]) / 10))


def test_sigma_follows_db_convention(capsys):
    _, out, _ = run(capsys, "bounds", "--family", "average", "--e1", "0.44", "--snr-lo", "20",
                    "--snr-hi", "40", "--snr-steps", "2", "--db-convention", "20")
    assert float(_rows(out)[0]["sigma"]) == pytest.approx(0.1)


def test_units_round_trip_exactly():
    req = dict(family="peak_average", a1=0.3, alpha1=0.4, alpha2=None, e1=None,
               snr_lo=0.0, snr_hi=30.0, snr_steps=4, bounds=None, db_convention=10,
               seed=None, jobs=1)
    nats = _rows(bounds_csv(dict(req, units="nats")))
    bits = _rows(bounds_csv(dict(req, units="bits")))
    for a, b in zip(nats, bits):
        assert float(b["value"]) == float(a["value"]) / math.log(2)


def test_output_is_byte_identical_across_runs_and_jobs():
    req = dict(family="peak_average", a1=0.3, alpha1=0.1, alpha2=0.4, e1=None,
               snr_lo=0.0, snr_hi=40.0, snr_steps=6, bounds=None, db_convention=10,
               units="nats", seed=None, jobs=1)
    a = bounds_csv(req)
    assert bounds_csv(req) == a
    assert bounds_csv(dict(req, jobs=2)) == a


def test_config_file_and_flags_win(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"family": "peak", "a1": 0.3, "snr_steps": 3, "units": "bits"}))
    _, out, _ = run(capsys, "bounds", "--config", str(cfg), "--snr-steps", "2",
                    "--bounds", "upper")
    rows = _rows(out)
    assert len(rows) == 2 and {r["bound_name"] for r in rows} == {"upper"}
    assert float(rows[0]["value"]) == pytest.approx(
        0.5 * math.log1p(1 / 4) / math.log(2))


def test_out_file(tmp_path, capsys):
    dest = tmp_path / "b.csv"
    code, out, _ = run(capsys, "bounds", "--family", "peak", "--a1", "0.3", "--snr-steps", "2",
                       "--out", str(dest))
    assert code == 0 and out == ""
    assert dest.read_text().startswith("snr_db,")


@pytest.mark.parametrize("argv", [
    ["bounds", "--family", "peak", "--a1", "0.3", "--bounds", "lower_truncexp"],
    ["bounds", "--family", "peak", "--a1", "0.3", "--snr-lo", "10", "--snr-hi", "5"],
    ["bounds", "--family", "peak", "--a1", "0.3", "--snr-steps", "1"],
    ["bounds", "--family", "peak"],
    ["bounds", "--family", "peak", "--a1", "0.7"],
    ["bounds", "--config", "/nonexistent.json"],
    ["bounds", "--family", "comet"],
    ["decompose", "uniform-contracted"],
    ["decompose", "uniform-contracted", "--k", "1"],
])
def test_errors_exit_one(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:  # argparse usage errors
        code = exc.code
    assert code == 1
    assert "error" in capsys.readouterr().err


# ---------------------------------------------------------------- decompose

DECOMP_ARGS = {
    "uniform-binary": ["--a", "3/8"],
    "uniform-contracted": ["--k", "3"],
    "exp-verdu": ["--a", "0.5"],
    "exp-binary": ["--a", "0.44"],
    "truncexp-binary": ["--a", "0.5", "--lam", "1"],
    "truncexp-contracted": ["--k", "3", "--lam", "1"],
    "discrete-uniform": ["--k1", "1", "--n", "3"],
    "geometric": ["--lam", "0.2", "--lam1", "0.5"],
    "truncgeom": ["--k1", "1", "--n", "3", "--lambda", "0.2"],
}


def test_every_kind_has_an_example():
    assert set(DECOMP_ARGS) == set(DECOMP_KINDS)


@pytest.mark.parametrize("kind", DECOMP_KINDS)
def test_decompose_reports_validate(capsys, kind):
    code, out, _ = run(capsys, "decompose", kind, *DECOMP_ARGS[kind])
    assert code == 0
    rep = json.loads(out)
    _validator().validate(rep)
    assert rep["pass"] and rep["kind"]


def test_decompose_exp_binary_mean(capsys):
    _, out, _ = run(capsys, "decompose", "exp-binary", "--a", "0.44")
    rep = json.loads(out)
    assert rep["mean_residual"] <= 1e-9
    idx = rep["index_set"]
    assert idx and idx == sorted(set(idx))


def test_decompose_truncgeom_structure(capsys):
    _, out, _ = run(capsys, "decompose", "truncgeom", "--k1", "1", "--n", "3", "--lam", "0.2")
    u1, u2 = json.loads(out)["factors"]
    assert u1["count"] == 2 and u2["count"] == 3 and u2["spacing"] == 2.0


def test_decompose_seeded_mc(capsys):
    _, out, _ = run(capsys, "decompose", "uniform-contracted", "--k", "3", "--seed", "5")
    rep = json.loads(out)
    assert rep["mc_ks"] is not None
    assert any(c["name"].startswith("monte-carlo") for c in rep["checks"])


# ---------------------------------------------------------------- check

def test_check_rearrangement_orders(capsys):
    code, out, _ = run(capsys, "check", "rearrangement")
    rep = json.loads(out)
    assert code == 1 and "b_5 > r_5" in rep["failures"] and "note" in rep
    code, out, _ = run(capsys, "check", "rearrangement", "--order", "unmerged")
    assert code == 0 and json.loads(out)["pass"]


def test_check_asymptotes(capsys):
    code, out, _ = run(capsys, "check", "asymptotes")
    rep = json.loads(out)
    assert code == 0 and all(r["error"] <= 0.01 for r in rep["rows"])


def test_check_ordering_subset(capsys):
    code, out, _ = run(capsys, "check", "ordering", "--figures", "fig3,fig4", "--steps", "5")
    rep = json.loads(out)
    assert code == 0 and [f["name"] for f in rep["figures"]] == ["fig3", "fig4"]
    assert run(capsys, "check", "ordering", "--figures", "fig9")[0] == 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "oimac", "check", "asymptotes"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["pass"]
