import hashlib
import json

import numpy as np
import pytest

from sandstone import cli, lattice


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, dict(line.split(",", 1) for line in out.strip().splitlines() if "," in line)


def test_sandpile_four_chips(tmp_path, capsys):
    code, rep = run(capsys, "sandpile", "--chips", 4, "--out", tmp_path / "a.pgm", "--odometer", tmp_path / "o.csv")
    assert code == 0 and rep["sum"] == "4" and rep["topplings"] == "1" and rep["max_height"] == "1"
    img = lattice.read_pgm(tmp_path / "a.pgm")
    assert img.tolist() == [[0, 85, 0], [85, 0, 85], [0, 85, 0]]
    assert (tmp_path / "o.csv").read_text().splitlines() == ["x,y,v", "0,0,1"]


def test_sandpile_overflow_exit(tmp_path, capsys):
    code, _ = run(capsys, "sandpile", "--chips", 1000, "--window", 3, "--out", tmp_path / "a.pgm")
    assert code == cli.EXIT_OVERFLOW


def test_sandpile_deterministic_bytes(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "sandpile", "--chips", 5000, "--out", tmp_path / f"{name}.pgm",
            "--odometer", tmp_path / f"{name}.bin", "--figure", tmp_path / f"{name}.png")
    for ext in ("pgm", "bin", "png"):
        assert (tmp_path / f"a.{ext}").read_bytes() == (tmp_path / f"b.{ext}").read_bytes()


def test_gamma_corners(tmp_path, capsys):
    code, rep = run(capsys, "gamma", "--rect", 0, 2, 0, 2, "--grid", 2, 2, "--precision", "1/64",
                    "--out", tmp_path / "g.pgm", "--csv", tmp_path / "g.csv")
    assert code == 0 and rep["uncertified"] == "0"
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "a,b,lo,hi,certified"
    for r in rows[1:]:
        a, b, lo, hi, cert = r.split(",")
        assert float(lo) == 2 and float(hi) <= 2 + 1 / 64 and cert == "1"


def test_gamma_threads_byte_identical(tmp_path, capsys, monkeypatch):
    outs = []
    for t in (1, 4):
        monkeypatch.setenv("SANDSTONE_THREADS", str(t))
        run(capsys, "gamma", "--rect", 0, 1, 0, 1, "--grid", 3, 3, "--precision", "1/16",
            "--out", tmp_path / f"g{t}.png", "--csv", tmp_path / f"g{t}.csv")
        outs.append(((tmp_path / f"g{t}.png").read_bytes(), (tmp_path / f"g{t}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_gamma_cap_exit(tmp_path, capsys):
    code, rep = run(capsys, "gamma", "--rect", 0, 1, 0, 1, "--grid", 2, 2, "--precision", "1/1024",
                    "--cap", 64, "--out", tmp_path / "g.pgm", "--csv", tmp_path / "g.csv")
    assert code == cli.EXIT_PRECISION
    assert (tmp_path / "g.pgm").exists() and int(rep["uncertified"]) > 0


def test_bad_precision_rejected(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gamma", "--rect", "0", "1", "0", "1", "--grid", "2", "2", "--precision", "1/3",
                  "--out", str(tmp_path / "g.pgm")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        cli.main(["packing", "--levels", "-1", "--out", str(tmp_path / "p.json")])


def test_packing_ford(tmp_path, capsys):
    code, rep = run(capsys, "packing", "--levels", 4, "--frame", "ford", "--out", tmp_path / "p.json")
    assert code == 0 and rep["angle_violations"] == "0"
    doc = json.loads((tmp_path / "p.json").read_text())
    centres = {(round(c["center"][0], 9), round(c["center"][1], 9)) for c in doc["circles"] if c["kind"] == "proper"}
    for p, q in [(0, 1), (1, 1), (1, 2), (1, 3), (2, 3), (1, 4), (3, 4)]:
        assert (round(2 * p / q, 9), round(1 / q**2, 9)) in centres


def test_packing_bad_generators(tmp_path, capsys):
    doc = json.dumps([{"center": [0, 0], "radius": 1}, {"center": [5, 0], "radius": 1}, {"center": [0, 5], "radius": 1}])
    code, _ = run(capsys, "packing", "--generators", doc, "--out", tmp_path / "p.json")
    assert code == cli.EXIT_GEOMETRY


def test_packing_generators_from_file(tmp_path, capsys):
    doc = [{"center": [0, 0], "radius": 1}, {"center": [2, 0], "radius": 1},
            {"center": [1, 3 ** 0.5], "radius": 1}]
    (tmp_path / "g.json").write_text(json.dumps(doc))
    code, rep = run(capsys, "packing", "--generators", tmp_path / "g.json", "--levels", 3,
                    "--out", tmp_path / "p.svg")
    assert code == 0 and rep["circles"] == str(3 + 1 + 3 + 9)
    assert (tmp_path / "p.svg").read_text().startswith("<svg")


def test_fractal_congruent(tmp_path, capsys):
    doc = json.dumps([[0, 0, 3], [2, 0, 3], [1, 3 ** 0.5, 3]])
    code, rep = run(capsys, "fractal", "--matrices", doc, "--levels", 3, "--depth", 10,
                    "--out", tmp_path / "f.svg", "--figure", tmp_path / "f.png")
    assert code == 0 and rep["proper_triangles"] == "13" and rep["hessians_off_packing"] == "0"
    assert (tmp_path / "f.png").stat().st_size > 0


def test_fractal_rational_input(tmp_path, capsys):
    doc = json.dumps([[1, 0, 3], [1, 2, 3], ["1/4", 1, "9/4"]])
    code, rep = run(capsys, "fractal", "--matrices", doc, "--levels", 2, "--depth", 8,
                    "--out", tmp_path / "f.json")
    assert code == 0
    doc = json.loads((tmp_path / "f.json").read_text())
    assert len(doc["nodes"]) == 4


def test_fractal_bad_matrices(tmp_path, capsys):
    code, _ = run(capsys, "fractal", "--matrices", "[[0,0,3],[5,0,3],[0,5,3]]", "--out", tmp_path / "f.svg")
    assert code == cli.EXIT_GEOMETRY


def test_verify_suites(capsys):
    code = cli.main(["verify", "--suite", "geometry"])
    out = capsys.readouterr().out
    assert code == 0 and "FAIL" not in out and out.startswith("suite,check,result")


def test_report(tmp_path, capsys):
    code = cli.main(["report", "--dir", str(tmp_path), "--chips", "2000", "--grid", "5", "--levels", "3"])
    assert code == 0
    names = {p.name for p in tmp_path.iterdir()}
    for f in ("sandpile.png", "gamma.png", "packing.png", "triangulation.png", "odometer.png",
              "gamma.csv", "sandpile.csv", "triangulation.csv"):
        assert f in names
    rows = (tmp_path / "sandpile.csv").read_text().splitlines()
    assert rows[0] == "height,sites" and len(rows) == 5
