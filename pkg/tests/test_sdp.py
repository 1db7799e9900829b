import io
import sys
import textwrap

import numpy as np
import pytest
from scipy.optimize import linprog

from hamming_sdp.bounds_code import CodeBoundSpec, build_code_program
from hamming_sdp.combinatorics import krawtchouk
from hamming_sdp.sdp import (
    DimensionMismatchError,
    SdpaParseError,
    SdpProblem,
    SolverOptions,
    block_min_eigenvalues,
    r_operator,
    read_sdpa,
    read_sdpa_solution,
    sdpa_bytes,
    solve,
    write_sdpa,
    write_sdpa_solution,
)
from oracles import cvxpy_optimum, known_optimum_problem, slack_min_eig

GOLDEN = b"1\n1\n-1\n1.0\n0 1 1 1 1.0\n1 1 1 1 1.0\n"


def minimal_lp() -> SdpProblem:
    return SdpProblem.from_entries([1.0], [-1], [(0, 0, 0, 0, 1.0), (1, 0, 0, 0, 1.0)])


def random_problem(rng: np.random.Generator) -> SdpProblem:
    m = int(rng.integers(1, 6))
    sizes = [int(s) if rng.random() < 0.6 else -int(s) for s in rng.integers(1, 5, size=rng.integers(1, 4))]
    entries = {}
    for _ in range(int(rng.integers(1, 25))):
        b = int(rng.integers(len(sizes)))
        s = abs(sizes[b])
        r = int(rng.integers(s))
        c = r if sizes[b] < 0 else int(rng.integers(r, s))
        v = float(rng.choice([rng.standard_normal(), rng.integers(-5, 6), 1e-17 * rng.random(), 1 / 3]))
        if v != 0.0:
            entries[(int(rng.integers(m + 1)), b, r, c)] = v
    c = rng.standard_normal(m) * rng.choice([1.0, 1e8, 1e-8])
    return SdpProblem.from_entries(c, sizes, [(*k, v) for k, v in entries.items()])


def test_golden_bytes():
    assert sdpa_bytes(minimal_lp()) == GOLDEN
    buf = io.BytesIO()
    write_sdpa(minimal_lp(), buf)
    assert buf.getvalue() == GOLDEN


def test_empty_f0_has_no_matno_zero_lines():
    p = SdpProblem.from_entries([1.0], [-1], [(1, 0, 0, 0, 1.0)])
    lines = sdpa_bytes(p).decode().splitlines()[4:]
    assert lines == ["1 1 1 1 1.0"]


def test_round_trip_random_problems(tmp_path):
    rng = np.random.default_rng(2024)
    for k in range(50):
        p = random_problem(rng)
        path = tmp_path / f"p{k}.dat-s"
        write_sdpa(p, path)
        q = read_sdpa(path)
        assert q == p
        assert sdpa_bytes(q) == sdpa_bytes(p)


def test_round_trip_delsarte():
    p = build_code_program(CodeBoundSpec(3, 6, 3, "delsarte")).problem
    assert read_sdpa(io.BytesIO(sdpa_bytes(p))) == p


def test_reader_is_liberal():
    text = '"comment"\n* another\n1 =mDIM\n1 =nBLOCK\n(-1)\n{1.0e0}\n0 1 1 1 1\n1 1 1 1 +1.000\n'
    assert read_sdpa(io.StringIO(text)) == minimal_lp()


@pytest.mark.parametrize(
    "text",
    [
        "1\n1\n-1\n",
        "1\n1\n-1\n1.0\n0 1 1\n",
        "x\n1\n-1\n1.0\n",
        "1\n1\n-1\n1.0\n0 1 1 1 abc\n",
        "1\n1\n-1\n1.0\n0 2 1 1 1.0\n",
    ],
)
def test_parse_errors_name_a_line(text):
    with pytest.raises(SdpaParseError) as info:
        read_sdpa(io.StringIO(text))
    assert info.value.line >= 1
    assert f"line {info.value.line}" in str(info.value)


def test_duplicate_entries_rejected_unless_merged():
    ent = [(1, 0, 0, 0, 1.0), (1, 0, 0, 0, 2.0)]
    with pytest.raises(ValueError):
        SdpProblem.from_entries([1.0], [1], ent)
    assert SdpProblem.from_entries([1.0], [1], ent, merge=True).val.tolist() == [3.0]


def test_solution_dimension_checks():
    p = minimal_lp()
    with pytest.raises(DimensionMismatchError):
        read_sdpa_solution(io.StringIO("1.0 2.0\n"), p)
    with pytest.raises(DimensionMismatchError):
        read_sdpa_solution(io.StringIO("1.0\n2 2 1 1 1.0\n"), p)
    with pytest.raises(SdpaParseError):
        read_sdpa_solution(io.StringIO("1.0\n2 1 1\n"), p)


def test_solution_round_trip():
    p = minimal_lp()
    sol = solve(p)
    buf = io.StringIO()
    write_sdpa_solution(sol, p, buf)
    back = read_sdpa_solution(io.StringIO(buf.getvalue()), p)
    assert np.allclose(back.x, sol.x)
    assert back.dual_obj == pytest.approx(sol.dual_obj)


def test_trivial_solve():
    p = SdpProblem.from_entries([1.0], [1], [(0, 0, 0, 0, 1.0), (1, 0, 0, 0, 1.0)])
    sol = solve(p, SolverOptions(gap_tol=1e-9))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0, abs=1e-8)
    assert sol.gap <= 1e-9


def test_infeasible_detected():
    p = SdpProblem.from_entries(
        [1.0], [1, 1], [(0, 0, 0, 0, 1.0), (1, 0, 0, 0, 1.0), (0, 1, 0, 0, 1.0), (1, 1, 0, 0, -1.0)]
    )
    assert solve(p).status == "infeasible"


def test_cost_on_unconstrained_variable_is_unbounded():
    p = SdpProblem.from_entries([1.0, 1.0], [1], [(0, 0, 0, 0, 1.0), (1, 0, 0, 0, 1.0)])
    assert solve(p).status == "unbounded"


def _delsarte_linprog(q, n, d):
    # max sum A_i, A_0 = 1, A_1..A_{d-1} = 0, A >= 0, sum_i A_i K_k(i) >= 0
    idx = [0] + list(range(d, n + 1))
    c = -np.ones(len(idx))
    a_ub = -np.array([[krawtchouk(q, n, k, i) for i in idx] for k in range(n + 1)], dtype=float)
    bounds = [(1, 1)] + [(0, None)] * (len(idx) - 1)
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n + 1), bounds=bounds, method="highs")
    return -res.fun


def test_delsarte_program_against_linprog():
    compiled = build_code_program(CodeBoundSpec(3, 6, 3, "delsarte"))
    sol = solve(compiled.problem)
    assert sol.status == "optimal"
    value = -sol.primal_obj + compiled.offset if compiled.sense == "max" else sol.primal_obj + compiled.offset
    want = _delsarte_linprog(3, 6, 3)
    assert want == pytest.approx(48.6, rel=1e-9)
    assert value == pytest.approx(want, rel=1e-6)


def test_known_optima_and_weak_duality():
    rng = np.random.default_rng(8)
    for _ in range(10):
        p, opt, xs = known_optimum_problem(rng)
        assert slack_min_eig(p, xs) > -1e-9
        sol = solve(p)
        assert sol.status in ("optimal", "near_optimal")
        scale = max(1.0, abs(opt))
        assert sol.primal_obj == pytest.approx(opt, abs=1e-5 * scale)
        assert sol.dual_obj <= sol.primal_obj + 10 * sol.gap * scale + 1e-12


def test_agrees_with_cvxpy():
    pytest.importorskip("cvxpy")
    rng = np.random.default_rng(99)
    for _ in range(5):
        p, opt, _ = known_optimum_problem(rng, m=3, sizes=(4, -2))
        assert solve(p).primal_obj == pytest.approx(cvxpy_optimum(p), rel=1e-5, abs=1e-5)
    for spec in [CodeBoundSpec(3, 5, 3, "sdp_laurent"), CodeBoundSpec(2, 6, 3, "sdp_basic")]:
        p = build_code_program(spec).problem
        assert solve(p).primal_obj == pytest.approx(cvxpy_optimum(p), rel=1e-5)


def test_block_min_eigenvalues():
    got = block_min_eigenvalues([np.array([[2.0, 0.0], [0.0, -1.0]]), np.array([3.0, 0.5])])
    assert got == pytest.approx([-1.0, 0.5])


def _r_case(rng, psd_side: bool):
    n = int(rng.integers(2, 6))
    b = rng.uniform(0, 1, (n, n))
    b = np.triu(b, 1)
    b = b + b.T
    if not psd_side:
        b = b * rng.choice([-1.0, 1.0], size=b.shape)
        b = np.triu(b, 1) + np.triu(b, 1).T
    c = rng.uniform(0.55, 0.95) if psd_side else rng.uniform(0.05, 0.45)
    rows = b.sum(1)
    if (rows <= 0).any():
        return None
    a = b + np.diag(c / (1 - c) * rows)
    assert np.allclose(np.diag(a), c * a.sum(1))
    total = a.sum()
    # scale so that c^2 1^T A 1 lands on either side of 1
    a = a * rng.uniform(0.3, 3.0) / (c * c * total)
    return a


def test_r_operator_property():
    rng = np.random.default_rng(17)
    counts = {True: 0, False: 0}
    checked = 0
    while checked < 100:
        a = _r_case(rng, psd_side=bool(rng.random() < 0.7))
        if a is None:
            continue
        lam_a = np.linalg.eigvalsh(a)[0]
        slack = a.sum() - np.trace(a) ** 2
        lam_r = np.linalg.eigvalsh(r_operator(a))[0]
        if min(abs(lam_a), abs(slack), abs(lam_r)) < 1e-9:
            continue
        want = lam_a > 0 and slack > 0
        assert (lam_r > 0) == want
        counts[want] += 1
        checked += 1
    assert counts[True] > 10 and counts[False] > 10


def _script(tmp_path, body: str) -> str:
    path = tmp_path / "fake_solver.py"
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path} {{in}} {{out}}"


def test_external_backend_round_trip(tmp_path):
    cmd = _script(
        tmp_path,
        """
        import sys
        from hamming_sdp.sdp import read_sdpa, solve, write_sdpa_solution
        p = read_sdpa(sys.argv[1])
        with open(sys.argv[2], "w") as fh:
            write_sdpa_solution(solve(p), p, fh)
        """,
    )
    p = build_code_program(CodeBoundSpec(3, 6, 3, "delsarte")).problem
    ext = solve(p, SolverOptions(backend="external", command=cmd))
    ref = solve(p)
    assert ext.status in ("optimal", "near_optimal")
    assert ext.primal_obj == pytest.approx(ref.primal_obj, rel=1e-5)


def test_external_backend_failures_are_distinct(tmp_path):
    p = minimal_lp()
    bad_exit = solve(p, SolverOptions(backend="external", command=_script(tmp_path, "import sys; sys.exit(3)")))
    assert bad_exit.status == "failed" and "exited with code 3" in bad_exit.message
    garbage = _script(tmp_path, "import sys; open(sys.argv[2], 'w').write('1 2 3\\n')")
    bad_parse = solve(p, SolverOptions(backend="external", command=garbage))
    assert bad_parse.status == "failed" and "parse error" in bad_parse.message
    with pytest.raises(ValueError):
        solve(p, SolverOptions(backend="external", command="solver {in}"))
    with pytest.raises(ValueError):
        solve(p, SolverOptions(backend="nonesuch"))
