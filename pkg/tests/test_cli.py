import json
import sys
import textwrap

import pytest

from hamming_sdp.cli import SOLVER_ENV, main
from hamming_sdp.report import REPORT_KEYS


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    return code, json.loads(out.splitlines()[0]), err


def test_codebound_sdp_plus(capsys):
    code, rep, _ = run_json(capsys, "codebound", "--q", "3", "--n", "7", "--d", "5", "--method", "sdp+")
    assert code == 0
    assert rep["integer_bound"] == 13
    assert rep["status"] == "certified"
    assert list(rep)[: len(REPORT_KEYS)] == list(REPORT_KEYS)


def test_codebound_delsarte(capsys):
    code, rep, _ = run_json(capsys, "codebound", "--q", "3", "--n", "6", "--d", "3", "--method", "delsarte")
    assert code == 0 and rep["integer_bound"] == 48


def test_codebound_text_format(capsys):
    code, out, _ = run(capsys, "codebound", "--q", "3", "--n", "4", "--d", "3", "--format", "text")
    assert code == 0
    assert any(line.split()[:2] == ["integer_bound", "9"] for line in out.splitlines())


def test_missing_required_argument_is_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["codebound", "--q", "3", "--n", "6"])
    assert info.value.code == 1
    assert "--d" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["codebound", "--q", "3", "--n", "6", "--d", "3", "--method", "nonesuch"],
        ["codebound", "--q", "1", "--n", "6", "--d", "3"],
        ["coverbound", "--q", "4", "--n", "5", "--r", "1", "--ineq", "vanwee"],
        ["coverbound", "--q", "2", "--n", "5", "--r", "1", "--ineq", "pair"],
        ["coverbound", "--q", "2", "--n", "5", "--r", "1", "--ineq", "nonesuch"],
        ["codebound", "--q", "3", "--n", "4", "--d", "3", "--backend", "external", "--solver-cmd", "solver"],
    ],
)
def test_bad_input_exits_one(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_coverbound_lin_is_exact(capsys):
    code, rep, _ = run_json(capsys, "coverbound", "--q", "4", "--n", "7", "--r", "1", "--method", "lin")
    assert code == 0
    assert rep["integer_bound"] == 745
    assert rep["exact_value"] == "8192/11"


def test_coverbound_sdp1(capsys):
    code, rep, _ = run_json(capsys, "coverbound", "--q", "4", "--n", "11", "--r", "1", "--method", "sdp1")
    assert code == 0 and rep["integer_bound"] == 123846 and rep["direction"] == "lower"


def test_coverbound_inequality_file(capsys, tmp_path):
    path = tmp_path / "sphere.txt"
    path.write_text("4 7 1\n0 1\n1 1\n")
    _, a, _ = run_json(capsys, "coverbound", "--q", "4", "--n", "7", "--r", "1", "--method", "sdp1",
                       "--ineq", f"file:{path}")
    _, b, _ = run_json(capsys, "coverbound", "--q", "4", "--n", "7", "--r", "1", "--method", "sdp1")
    assert a["integer_bound"] == b["integer_bound"]
    code, _, err = run(capsys, "coverbound", "--q", "3", "--n", "7", "--r", "1", "--ineq", f"file:{path}")
    assert code == 1 and "q=4" in err


def test_affinecap(capsys):
    code, rep, _ = run_json(capsys, "affinecap", "--n", "4")
    assert code == 0 and rep["integer_bound"] == 41


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert out.strip() and all(line.startswith("PASS") for line in out.splitlines())


def test_emit_and_certify_round_trip(capsys, tmp_path):
    prob, box, sol, cert = (tmp_path / n for n in ("p.dat-s", "box.json", "p.sol", "cert.json"))
    code, out, _ = run(capsys, "emit-sdpa", "--family", "code", "--q", "3", "--n", "6", "--d", "3",
                       "--method", "delsarte", "--out", str(prob), "--box-out", str(box), "--solution", str(sol))
    assert code == 0 and prob.exists() and sol.exists()
    code, out, _ = run(capsys, "certify", "--problem", str(prob), "--dual", str(sol), "--box", str(box),
                       "--out", str(cert))
    assert code == 0
    res = json.loads(out)
    assert res["status"] == "certified"
    # the program minimises the negated size, so -48.6 is a lower bound on it
    assert res["certified_lower_bound"] == pytest.approx(-48.6, abs=1e-4)
    assert json.loads(cert.read_text())


def test_certify_rejects_bad_dual(capsys, tmp_path):
    prob = tmp_path / "p.dat-s"
    prob.write_text("1\n1\n-1\n1.0\n0 1 1 1 1.0\n1 1 1 1 1.0\n")
    dual = tmp_path / "d.sol"
    dual.write_text("1.0\n2 1 1 1 -1.0\n")
    code, out, err = run(capsys, "certify", "--problem", str(prob), "--dual", str(dual))
    assert code == 2
    assert json.loads(out)["status"] == "certificate_failed"
    assert "rejected" in err


def test_certify_bad_problem_file(capsys, tmp_path):
    prob = tmp_path / "p.dat-s"
    prob.write_text("1\n1\n-1\n1.0\n0 1 1\n")
    code, _, err = run(capsys, "certify", "--problem", str(prob), "--dual", str(prob))
    assert code == 1 and "line 5" in err


def _suite(tmp_path, lines):
    path = tmp_path / "suite.jsonl"
    path.write_text("# test suite\n" + "\n".join(json.dumps(e) for e in lines) + "\n")
    return str(path)


SMALL = [
    {"family": "code", "q": 3, "n": 5, "d": 3, "method": "sdp+", "known": 18},
    {"family": "code", "q": 2, "n": 7, "d": 3, "method": "delsarte", "known": 16},
    {"family": "cover", "q": 3, "n": 4, "r": 1, "method": "sdp2", "known": 9},
]


def test_table_parallel_matches_serial(capsys, tmp_path):
    suite = _suite(tmp_path, SMALL)
    code1, out1, _ = run(capsys, "table", "--suite", suite, "--format", "json", "--jobs", "1")
    code2, out2, _ = run(capsys, "table", "--suite", suite, "--format", "json", "--jobs", "2")
    assert code1 == code2 == 0
    rows1 = [json.loads(s) for s in out1.splitlines()]
    rows2 = [json.loads(s) for s in out2.splitlines()]
    assert [r["bound"] for r in rows1] == [r["bound"] for r in rows2]
    assert [r["certified_value"] for r in rows1] == [r["certified_value"] for r in rows2]
    assert [(r["family"], r["q"], r["n"], r["param"]) for r in rows1] == [("code", 3, 5, 3), ("code", 2, 7, 3), ("cover", 3, 4, 1)]
    assert list(rows1[0]) == ["family", "q", "n", "param", "method", "known", "bound", "previous",
                              "reference", "status", "certified_value", "expected"]
    assert rows1[2]["bound"] == 9
    assert rows1[2]["reference"] == 9


def test_table_text(capsys, tmp_path):
    code, out, _ = run(capsys, "table", "--suite", _suite(tmp_path, SMALL[:1]))
    assert code == 0
    head = out.splitlines()[0].split()
    assert head[:3] == ["q", "n", "d"]


def test_table_reports_bad_line(capsys, tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('# c\n{"family": "code", "q": 3, "n": 5, "d": 3}\n{not json\n')
    code, _, err = run(capsys, "table", "--suite", str(path))
    assert code == 1 and f"{path}:3" in err


def _fake_solver(tmp_path, name, marker):
    script = tmp_path / f"{name}.py"
    script.write_text(textwrap.dedent(f"""
        import sys
        from hamming_sdp.sdp import read_sdpa, solve, write_sdpa_solution
        open({str(marker)!r}, "a").write("x")
        p = read_sdpa(sys.argv[1])
        with open(sys.argv[2], "w") as fh:
            write_sdpa_solution(solve(p), p, fh)
    """))
    return f"{sys.executable} {script} {{in}} {{out}}"


def test_solver_command_precedence(capsys, tmp_path, monkeypatch):
    env_marker, flag_marker = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv(SOLVER_ENV, _fake_solver(tmp_path, "env_solver", env_marker))
    argv = ["codebound", "--q", "3", "--n", "4", "--d", "3", "--method", "delsarte"]

    code, rep, _ = run_json(capsys, *argv)
    assert code == 0 and rep["integer_bound"] == 9
    assert env_marker.exists() and not flag_marker.exists()

    env_marker.unlink()
    code, rep, _ = run_json(capsys, *argv, "--solver-cmd", _fake_solver(tmp_path, "flag_solver", flag_marker))
    assert code == 0 and rep["integer_bound"] == 9
    assert flag_marker.exists() and not env_marker.exists()

    flag_marker.unlink()
    code, rep, _ = run_json(capsys, *argv, "--backend", "builtin")
    assert code == 0 and not env_marker.exists() and not flag_marker.exists()
