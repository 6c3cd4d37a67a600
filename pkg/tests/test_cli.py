import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from logstieltjes.cli import RunConfig, main, parse_config
from logstieltjes.errors import DomainError, RangeError

HEINE = ["--dist", "heine", "--q", "1/2", "--lambda", "2", "--a", "2"]


def run(capsys, *argv):
    status = main(list(argv))
    return status, capsys.readouterr().out


def test_classify_json(capsys):
    status, out = run(capsys, "classify", *HEINE)
    assert status == 0
    assert json.loads(out)["verdict"] == "Exists"


def test_strict_boundary_exit_code(capsys):
    status, out = run(capsys, "classify", *HEINE, "--route", "beta", "--strict")
    assert status == 3
    assert json.loads(out)["verdict"] == "Boundary"
    status, _ = run(capsys, "classify", *HEINE, "--route", "beta")
    assert status == 0


def test_classify_all_routes(capsys):
    status, out = run(capsys, "classify", "--dist", "poisson", "--lambda", "3", "--a", "3", "--route", "all")
    payload = json.loads(out)
    assert status == 0
    assert set(payload["routes"]) == {"family", "w", "beta"}
    assert payload["routes"]["beta"]["verdict"] == "Unknown"


def test_verify_without_distribution(capsys):
    status, out = run(capsys, "verify", "--a", "5/2", "--max-k", "4", "--target", "1e-30")
    payload = json.loads(out)
    assert status == 0
    assert [c["verdict"] for c in payload["certificates"]] == ["VanishesWithin"] * 5


def test_verify_members(capsys):
    status, out = run(capsys, "verify", *HEINE, "--eps", "-1,1/2", "--max-k", "3", "--horizon", "60")
    payload = json.loads(out)
    assert status == 0
    assert [m["epsilon"] for m in payload["members"]] == ["-1", "1/2"]
    assert all(m["passed"] for m in payload["members"])


def test_finite_support_is_rejected(capsys):
    status, out = run(capsys, "emit", "--dist", "table", "--values", "1,1,1", "--a", "2")
    assert status == 1
    assert json.loads(out)["error"]["code"] == "SupportError"


def test_no_decay_certificate_exit_code(capsys, monkeypatch):
    from logstieltjes import stieltjes
    from logstieltjes.errors import NoDecayCertificate

    def refuse(*args, **kwargs):
        raise NoDecayCertificate("no decay")

    monkeypatch.setattr(stieltjes, "build_perturbation", refuse)
    status, out = run(capsys, "emit", *HEINE)
    assert status == 2
    assert json.loads(out)["error"]["code"] == "NoDecayCertificate"


def test_emit_csv_columns(capsys):
    status, out = run(capsys, "emit", *HEINE, "--eps", "-1", "--eps", "1", "--horizon", "5", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert status == 0
    assert rows[0] == ["j", "p_j", "h_j", "g_j(-1)", "g_j(1)", "bound"]
    assert len(rows) == 7
    # h alternates between +1 and -1, so one member vanishes at every index
    assert rows[1][3] == "0" and rows[2][4] == "0"


def test_emit_json_exact_values_round_trip(capsys):
    status, out = run(capsys, "perturb", "--dist", "poisson", "--lambda", "3", "--a", "5/2", "--horizon", "3")
    rows = json.loads(out)["rows"]
    assert [Fraction(r["h_j"]) for r in rows] == [1, Fraction(-5, 9), Fraction(100, 567), Fraction(-2000, 66339)]


def test_moments_command(capsys):
    status, out = run(capsys, "moments", "--dist", "poisson", "--lambda", "1", "--a", "2", "--max-k", "1")
    moments = json.loads(out)["moments"]
    assert moments[0]["moment"] == "1"
    assert moments[1]["moment"].startswith("[2.71828182845904523")


def test_output_file_and_determinism(capsys, tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for path in (first, second):
        assert main(["emit", *HEINE, "--horizon", "8", "--output", str(path)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert capsys.readouterr().out == ""


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"dist": {"kind": "heine", "q": "1/2", "lambda": "1"}, "a": "2"}))
    status, out = run(capsys, "classify", "--config", str(cfg))
    assert status == 0 and json.loads(out)["verdict"] == "NotExists"


def test_inline_json_distribution(capsys):
    spec = '{"kind": "table", "values": ["1", "1/2"], "tail": {"type": "geometric", "ratio": "1/2"}}'
    status, out = run(capsys, "classify", "--dist", spec, "--a", "2")
    assert status == 0 and json.loads(out)["route"] == "ConditionW"


@pytest.mark.parametrize(
    "argv, code",
    [
        (["bogus"], "UsageError"),
        (["verify", "--a", "1/2"], "DomainError"),
        (["verify", "--a", "x"], "DomainError"),
        (["classify", "--a", "2"], "DomainError"),
        (["emit", *HEINE, "--eps", "2"], "RangeError"),
        (["classify", "--dist", "nope", "--a", "2"], "DomainError"),
    ],
)
def test_errors_are_json(capsys, argv, code):
    status, out = run(capsys, *argv)
    assert status == 1
    assert json.loads(out)["error"]["code"] == code


def test_violated_moment_sum_exit_code(capsys, monkeypatch):
    from logstieltjes import stieltjes

    real = stieltjes.base_moment_sum
    monkeypatch.setattr(stieltjes, "base_moment_sum", lambda a, k, target: real(a, k, target, truncated_at=3))
    status, out = run(capsys, "verify", "--a", "2", "--max-k", "2")
    assert status == 2
    assert "Violated" in out


def test_run_config_validation():
    with pytest.raises(RangeError):
        RunConfig("emit", epsilons=[Fraction(3, 2)])
    with pytest.raises(DomainError):
        RunConfig("emit", target=Fraction(0))
    cfg = parse_config(["verify", "--a", "2", "--eps", "-1", "--target", "1e-20"])
    assert cfg.epsilons == [-1] and cfg.target == Fraction(1, 10**20)


def test_selftest(capsys):
    status, out = run(capsys, "selftest")
    assert status == 0 and json.loads(out)["passed"]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "logstieltjes", "verify", "--a", "3", "--max-k", "1"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["a"] == "3"
