import csv
import io
import json
import math

import pytest

from septracer.cli import main, parse_grid


def run(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr().out
    return rc, out


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# schema: septracer.")
    return list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))


def test_parse_grid():
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("3,1,2", int) == [1, 2, 3]
    with pytest.raises(Exception):
        parse_grid("1,nan")


def test_gf_table(capsys):
    rc, out = run(capsys, ["gf", "--x", "0,2", "--t", "0,1", "--lambda=-0.5,0,0.5",
                           "--rho-minus", "0.7", "--rho-plus", "0.3"])
    assert rc == 0
    rows = table(out)
    assert len(rows) == 12
    for r in rows:
        if float(r["lambda"]) == 0:
            assert float(r["re_gf"]) == pytest.approx(1.0, abs=1e-14)
        if float(r["t"]) == 0:
            lam, x = float(r["lambda"]), int(r["x"])
            assert float(r["re_gf"]) == pytest.approx((0.7 + 0.3 * math.exp(lam)) ** x, rel=1e-12)
    # 17 significant digits
    assert any(len(r["re_gf"].replace(".", "").lstrip("0")) >= 16 for r in rows)


def test_gf_parity_mirror(capsys):
    _, a = run(capsys, ["gf", "--x", "1,3", "--t", "1.5", "--lambda=0.4", "--rho-minus", "0.7",
                        "--rho-plus", "0.2"])
    _, b = run(capsys, ["gf", "--x=-3,-1", "--t", "1.5", "--lambda=-0.4", "--rho-minus", "0.2",
                        "--rho-plus", "0.7"])
    ga = {int(r["x"]): float(r["re_gf"]) for r in table(a)}
    gb = {-int(r["x"]): float(r["re_gf"]) for r in table(b)}
    for x in ga:
        assert ga[x] == pytest.approx(gb[x], abs=1e-8)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"rho_minus": 0.5, "rho_plus": 0.5, "x": "2", "t": "0", "lam": "1"}))
    _, out = run(capsys, ["gf", "--config", str(cfg), "--rho-plus", "0.25"])
    r = table(out)[0]
    assert float(r["re_gf"]) == pytest.approx((0.75 + 0.25 * math.e) ** 2)


def test_moments_and_cumulants(capsys):
    rc, out = run(capsys, ["moments", "--x", "2", "--t", "0", "--rho-plus", "0.5"])
    assert rc == 0
    m = {int(r["n"]): float(r["moment"]) for r in table(out)}
    assert m[1] == pytest.approx(1.0) and m[2] == pytest.approx(1.5)
    rc, out = run(capsys, ["cumulants", "--x", "2", "--t", "0", "--rho-plus", "0.5", "--n-max", "2"])
    c = {int(r["n"]): float(r["cumulant"]) for r in table(out)}
    assert c[2] == pytest.approx(0.5)


def test_rate_fn_and_xi0(tmp_path, capsys):
    rc, out = run(capsys, ["xi0", "--rho-minus", "0.3", "--rho-plus", "0.7"])
    x0 = float(table(out)[0]["xi0"])
    assert x0 == pytest.approx(0.23837975431571118, abs=1e-12)
    base = tmp_path / "rate.csv"
    rc = main(["rate-fn", f"--xi=-1,{x0!r},1", "--s=-0.2,0,0.2", "--out", str(base)])
    assert rc == 0
    phi = table((tmp_path / "rate_phi.csv").read_text())
    assert all(float(r["ft_residual"]) < 1e-6 for r in phi)
    at0 = [r for r in phi if abs(float(r["xi"]) - x0) < 1e-12][0]
    assert abs(float(at0["phi"])) < 1e-6
    cs = table((tmp_path / "rate_C.csv").read_text())
    assert len(cs) == 3


def test_rate_fn_variance_equilibrium(capsys):
    _, out = run(capsys, ["rate-fn", "--rho-minus", "0.5", "--rho-plus", "0.5", "--xi", "0",
                          "--s=-0.1,-0.05,0,0.05,0.1"])
    parts = out.split("# schema:")
    c_rows = table("# schema:" + parts[2])
    C = {float(r["s"]): float(r["C"]) for r in c_rows}
    h = 0.05
    c2 = (-C[-2 * h] + 16 * C[-h] - 30 * C[0] + 16 * C[h] - C[2 * h]) / (12 * h * h)
    assert -c2 / 2 == pytest.approx(1 / math.sqrt(math.pi), rel=1e-3)


def test_rate_fn_out_of_range(capsys):
    rc = main(["rate-fn", "--rho-minus", "0.3", "--rho-plus", "0.7", "--xi", "0", "--s=-0.5"])
    assert rc != 0
    assert "admissible range" in capsys.readouterr().err


def test_tagged_dist(capsys):
    rc, out = run(capsys, ["tagged-dist", "--x=-1,0,1", "--t", "5"])
    cdf = [float(r["cdf"]) for r in table(out)]
    assert rc == 0 and cdf == sorted(cdf)


def test_duality_check(capsys):
    rc, out = run(capsys, ["duality-check", "--x", "1", "--t", "2"])
    rows = table(out)
    assert rc == 0 and len(rows) == 2
    assert all(float(r["evolution_residual"]) < 1e-5 for r in rows)


def test_simulate_replay(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"rho_minus": 0.7, "rho_plus": 0.3, "t": 2, "samples": 2000,
                               "sites": "2", "lam": "0.5", "seed": 3}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    samples = tmp_path / "samples.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(a), "--samples-csv", str(samples)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["height"]["2"]["n"] == 2000 and "stderr" in rep["height"]["2"]
    assert rep["gf_cross_check"][0]["z"] < 4
    assert rep["identities"]["total"] == 0
    assert len(table(samples.read_text())) == 2000


def test_validate_quick(tmp_path, capsys):
    out = tmp_path / "m.json"
    rc = main(["validate", "--quick", "--only", "3,9,13", "--out", str(out)])
    m = json.loads(out.read_text())
    assert rc == 0 and m["passed"] and m["mode"] == "quick"
    assert [c["id"] for c in m["criteria"]] == [3, 9, 13]
    for c in m["criteria"]:
        assert {"measured", "target", "tolerance", "passed", "quick"} <= set(c)


def test_validate_tightened(tmp_path):
    out = tmp_path / "m.json"
    rc = main(["validate", "--quick", "--only", "9", "--tol-scale", "1e-12", "--out", str(out)])
    m = json.loads(out.read_text())
    assert rc == 1 and not m["passed"]
    c = m["criteria"][0]
    assert c["measured"] > c["tolerance"]


def test_validate_records_errors(monkeypatch, tmp_path):
    from septracer import validate as val

    def boom(opt):
        raise RuntimeError("disk on fire")

    monkeypatch.setitem(val.CRITERIA, 9, boom)
    out = tmp_path / "m.json"
    rc = main(["validate", "--only", "9", "--out", str(out)])
    c = json.loads(out.read_text())["criteria"][0]
    assert rc == 1 and c["error"].startswith("RuntimeError") and not c["passed"]


def test_bad_arguments(capsys):
    assert main(["gf", "--rho-minus", "1.5"]) == 1
    with pytest.raises(SystemExit):
        main(["moments", "--n-max", "9"])
