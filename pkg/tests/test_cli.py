import json

import pytest

from dopasym.cli import run


def out_lines(capsys):
    return capsys.readouterr().out.splitlines()


def test_count(capsys):
    assert run(["hexagon", "count", "--a", "2", "--b", "2", "--c", "2"]) == 0
    assert capsys.readouterr().out.strip() == "20"


def test_poly_symmetric_krawtchouk(capsys):
    assert run(["poly", "--family", "krawtchouk", "--p", "0.5", "--q", "0.5", "--N", "40", "--kmax", "39"]) == 0
    lines = out_lines(capsys)
    assert lines[0].startswith("# dopasym")
    assert lines[1] == "k,a_k,b_k,gamma_k"
    col = [float(l.split(",")[1]) for l in lines[2:]]
    assert len(col) == 40 and all(abs(a - 0.5) < 1e-28 for a in col)


def test_poly_zeros(capsys):
    assert run(["poly", "--family", "hahn", "--A", "1", "--B", "1", "--N", "10", "--zeros", "3"]) == 0
    lines = out_lines(capsys)
    assert len(lines) == 2 + 3


def test_equilibrium_file_and_report(tmp_path):
    out, rep = tmp_path / "m.csv", tmp_path / "r.json"
    code = run(["equilibrium", "--family", "hahn", "--A", "3", "--B", "7", "--c", "0.5",
                "--out", str(out), "--report", str(rep)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# dopasym")
    assert lines[1] == "x,density,constraint_lo,constraint_hi,region_tag"
    tags = {l.rsplit(",", 1)[1] for l in lines[2:]}
    assert tags == {"saturated", "band", "void"}
    report = json.loads(rep.read_text())
    assert report["configuration"] == "SBV" and report["ok"] is True


def test_equilibrium_qp(capsys):
    assert run(["equilibrium", "--family", "krawtchouk", "--p", "0.3", "--q", "0.7", "--c", "0.5",
                "--method", "qp", "--M", "128"]) == 0
    assert out_lines(capsys)[1].startswith("x,density")


def test_kernel_and_tw(capsys):
    assert run(["kernel", "--family", "hahn", "--A", "3", "--B", "7", "--N", "40", "--k", "20",
                "--sine", "0.5"]) == 0
    text = capsys.readouterr().out
    assert "trace" in text
    assert run(["tw", "--s-min", "-1", "--s-max", "1", "--step", "0.5", "--quad-points", "30"]) == 0
    assert len(out_lines(capsys)) == 2 + 5


def test_asymptotics(capsys):
    assert run(["asymptotics", "--family", "krawtchouk", "--p", "0.1", "--q", "0.9", "--c", "0.5",
                "--Ns", "20", "40"]) == 0
    assert out_lines(capsys)[1] == "theorem,N,test_point,exact,approx,scaled_error"


def test_hexagon_outputs(capsys):
    assert run(["hexagon", "enumerate", "--a", "1", "--b", "1", "--c", "1"]) == 0
    assert len(out_lines(capsys)) == 2 + 2
    assert run(["hexagon", "enumerate", "--a", "2", "--b", "1", "--c", "1", "--format", "svg", "--index", "1"]) == 0
    assert capsys.readouterr().out.startswith("<svg")
    assert run(["hexagon", "arctic", "--shape", "1", "1", "1", "--taus", "4"]) == 0
    assert len(out_lines(capsys)) == 2 + 4
    assert run(["hexagon", "sample", "--a", "3", "--b", "3", "--c", "3", "--m", "2", "--samples", "5"]) == 0
    lines = out_lines(capsys)
    assert lines[0].startswith("# dopasym") and len(lines) == 6


def test_determinism(tmp_path):
    args = ["hexagon", "sample", "--a", "3", "--b", "2", "--c", "2", "--m", "2", "--samples", "20", "--seed", "4"]
    p1, p2 = tmp_path / "1.txt", tmp_path / "2.txt"
    assert run(args + ["--out", str(p1)]) == 0
    assert run(args + ["--out", str(p2)]) == 0
    assert p1.read_bytes() == p2.read_bytes()


def test_config_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 1, "b": 1, "c": 1}))
    assert run(["hexagon", "count", "--a", "5", "--b", "5", "--c", "5", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.strip() == "2"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(["hexagon", "count", "--config", str(cfg)]) == 2


def test_exit_codes(capsys):
    assert run(["hexagon", "count", "--a", "0", "--b", "1", "--c", "1"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("dopasym:") and err.count("\n") == 1
    assert run(["nonsense"]) == 2
    assert run(["equilibrium", "--family", "hahn", "--A", "3", "--B", "7", "--c", "1.5"]) == 2
    assert run(["poly", "--family", "hahn", "--A", "1", "--B", "1", "--N", "5", "--precision-bits", "10"]) == 2


def test_numerical_failure_exit(capsys, monkeypatch):
    from dopasym import cli
    from dopasym.errors import PrecisionExhausted

    def boom(o):
        raise PrecisionExhausted("forced")

    monkeypatch.setitem(cli.COMMANDS, "tw", boom)
    assert run(["tw"]) == 3


def test_numpy_scalars_format_as_plain_floats():
    import numpy as np

    from dopasym._io import fmt

    assert fmt(np.float64(0.1)) == "0.1"
    assert fmt(np.float64(1.0) / 3) == repr(1 / 3)
