import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nlcomm import bounds
from nlcomm.cli import (
    EXIT_COMPUTE, EXIT_CONFIG, EXIT_INPUT, EXIT_OK, RunConfig, build_parser, config_from_args,
    main, parse_grid,
)
from nlcomm.tasks import build_cs, build_i3322_task, task_from_json


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bounds_cs22_decoder_scan(capsys):
    code, out, _ = run(["bounds", "--task", "cs", "--d", "2", "--k", "2", "--method", "decoder-scan"], capsys)
    assert code == EXIT_OK
    data = json.loads(out)
    assert data["result"]["value"] == "3/4"
    assert data["result"]["method"] == "decoder_scan"
    assert data["config"]["seed"] == 0


def test_reported_bound_is_rederivable(capsys):
    _, out, _ = run(["bounds", "--task", "i3322", "--method", "enumerate"], capsys)
    data = json.loads(out)["result"]
    fn = {"enumeration": bounds.local_bound_enumerate}[data["method"]]
    assert str(fn(build_i3322_task()).value) == data["value"]


def test_bounds_on_i3322_expression(capsys):
    _, out, _ = run(["bounds", "--task", "i3322-expression", "--method", "enumerate"], capsys)
    assert json.loads(out)["result"]["value"] == "0/1"
    _, out, _ = run(["bounds", "--task", "i3322-expression", "--method", "lp"], capsys)
    assert json.loads(out)["result"]["value"] == "1/1"
    assert run(["bounds", "--task", "i3322-expression", "--method", "closed-form"], capsys)[0] == EXIT_CONFIG


def test_sweep_prbox_is_half_plus_half_p(capsys):
    code, out, _ = run(["sweep-isotropic", "--task", "prbox", "--d", "2", "--p-grid", "0:1:0.05"], capsys)
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 21
    for row in rows:
        assert float(row["payoff"]) == pytest.approx(0.5 + 0.5 * float(row["p"]), abs=1e-12)
        assert float(row["threshold"]) == 0.5


def test_demo_signalling_overflows(capsys):
    code, out, _ = run(["demo-signalling"], capsys)
    assert code == EXIT_OK
    res = json.loads(out)["result"]
    assert res["normalized"] is False
    assert res["total_mass_at_x_star"]["value"] == "2/1"


def test_protocol_run_i3322_midpoint(capsys):
    code, out, _ = run(["protocol-run", "--task", "i3322", "--box", "i3322:mid"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["result"]["payoff"]["float"] == 1.0


def test_protocol_run_printed_encoding(capsys):
    _, out, _ = run(["protocol-run", "--task", "i3322", "--protocol", "i3322-printed"], capsys)
    assert json.loads(out)["result"]["payoff"]["value"] == "5/6"


def test_protocol_run_with_noise(capsys):
    _, out, _ = run(["protocol-run", "--task", "cs", "--d", "2", "--k", "2", "--p", "1/2"], capsys)
    assert json.loads(out)["result"]["payoff"]["value"] == "3/4"


def test_task_build_roundtrip_through_file(tmp_path, capsys):
    path = tmp_path / "sub" / "task.json"
    assert main(["task-build", "--task", "cs", "--d", "3", "--k", "2", "--out", str(path)]) == EXIT_OK
    task = task_from_json(json.loads(path.read_text()))
    assert task.sizes == build_cs(3, 2).sizes
    code, out, _ = run(["bounds", "--task-file", str(path)], capsys)
    assert code == EXIT_OK and json.loads(out)["result"]["value"] == "7/8"


def test_bell_export_text_and_npa(tmp_path, capsys):
    code, out, _ = run(["bell-export", "--task", "i3322-expression", "--format", "text"], capsys)
    assert code == EXIT_OK and "<= 0" in out
    dat = tmp_path / "cs22.dat-s"
    assert main(["npa-export", "--task", "cs", "--d", "2", "--k", "2", "--level", "1+AB",
                 "--out", str(dat)]) == EXIT_OK
    assert "* offset" in dat.read_text()


@pytest.mark.parametrize("argv", [
    ["seesaw", "--task", "cs", "--d", "2", "--k", "2", "--restarts", "3", "--seed", "5"],
    ["sweep-isotropic", "--task", "i3322", "--p-grid", "0:1:1/4"],
    ["bounds", "--task", "table1"],
    ["npa-export", "--task", "cs", "--d", "2", "--k", "3", "--level", "2"],
], ids=["seesaw", "sweep", "bounds", "npa"])
def test_outputs_are_byte_identical(argv, tmp_path):
    path = tmp_path / "out"
    assert main(argv + ["--out", str(path)]) == EXIT_OK
    first = path.read_bytes()
    assert main(argv + ["--out", str(path)]) == EXIT_OK
    assert path.read_bytes() == first


def test_seesaw_records_seed(capsys):
    _, out, _ = run(["seesaw", "--task", "cs", "--d", "2", "--k", "2", "--restarts", "2", "--seed", "7"], capsys)
    data = json.loads(out)
    assert data["result"]["seed"] == 7 and data["config"]["seed"] == 7


def test_exit_codes(tmp_path, capsys):
    assert run(["bounds", "--task", "cs", "--d", "2"], capsys)[0] == EXIT_CONFIG
    assert run(["bounds", "--task-file", str(tmp_path / "missing.json")], capsys)[0] == EXIT_INPUT
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["bounds", "--task-file", str(bad)], capsys)[0] == EXIT_INPUT
    assert run(["protocol-run", "--task", "cs", "--d", "2", "--k", "2", "--box", f"file:{bad}"],
               capsys)[0] == EXIT_INPUT
    assert run(["bounds", "--task", "cs", "--d", "3", "--k", "3", "--method", "enumerate",
                "--enumeration-cap", "10"], capsys)[0] == EXIT_COMPUTE
    assert run(["protocol-run", "--task", "cs", "--d", "2", "--k", "2", "--box", "nonsense"],
               capsys)[0] == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "--task", "unknown-family"])
    assert exc.value.code == 2


def test_failed_run_leaves_no_file(tmp_path, capsys):
    out = tmp_path / "res.json"
    assert run(["bounds", "--task", "cs", "--d", "2", "--out", str(out)], capsys)[0] == EXIT_CONFIG
    assert not out.exists()


@given(st.sampled_from(["cs", "prbox", "i3322", "table1"]), st.integers(2, 4), st.integers(0, 99),
       st.integers(1, 50))
def test_run_config_roundtrip(task, d, seed, restarts):
    ns = build_parser().parse_args(["seesaw", "--task", task, "--d", str(d), "--seed", str(seed),
                                    "--restarts", str(restarts)])
    cfg = config_from_args(ns)
    again = RunConfig.from_dict(cfg.normalized())
    assert again == cfg
    assert again.normalized() == cfg.normalized()


def test_parse_grid():
    assert parse_grid("0:1:1/4") == [Fraction(i, 4) for i in range(5)]
    assert len(parse_grid("0:1:0.05")) == 21


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nlcomm.cli", "bounds", "--task", "cs", "--d", "2",
                           "--k", "3"], capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["result"]["value"] == "8/9"
