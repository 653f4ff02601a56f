import json

import pytest

from nearcrit import cli


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.run(["--help"])
    assert exc.value.code == 0
    assert "converge" in capsys.readouterr().out


@pytest.mark.parametrize("text, expected", [
    ("50,100,200", [50.0, 100.0, 200.0]),
    ("64..512", [64.0, 128.0, 256.0, 512.0]),
    ("64..100", [64.0]),
    (100, [100.0]),
    ([1, 2], [1.0, 2.0]),
])
def test_time_scale_lists(text, expected):
    assert cli.parse_T_list(text) == expected


def test_bad_range_rejected():
    with pytest.raises(ValueError):
        cli.parse_T_list("100..50")


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"T": 50, "bogus_option": 1}))
    assert cli.run(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "bogus_option" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"T": 50, "seed": 3, "regime": "+"}))
    args = cli.build_parser().parse_args(["simulate", "--config", str(cfg), "--seed", "9"])
    resolved = cli.resolve_config("simulate", args)
    assert resolved["seed"] == 9 and resolved["T"] == 50.0 and resolved["regime"] == "+"


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("NEARCRIT_SEED", "41")
    args = cli.build_parser().parse_args(["simulate"])
    assert cli.resolve_config("simulate", args)["seed"] == 41
    monkeypatch.delenv("NEARCRIT_SEED")
    assert cli.resolve_config("simulate", args)["seed"] == 0


def test_bad_regime_exits_one(tmp_path, capsys):
    assert cli.run(["simulate", "--regime", "sideways", "--out", str(tmp_path)]) == 1
    assert "regime" in capsys.readouterr().err


def test_bad_driver_exits_one(tmp_path):
    assert cli.run(["limit", "--driver", "neither", "--out", str(tmp_path)]) == 1


def test_csv_has_schema_line_and_round_trips_floats():
    text = cli.csv_text("demo", ["a", "b"], [(0.1, 3)])
    lines = text.splitlines()
    assert lines[0] == "# schema: nearcrit.demo/v1"
    assert float(lines[2].split(",")[0]) == 0.1 and lines[2].split(",")[0] == "0.10000000000000001"


def test_simulate_writes_paths(tmp_path):
    assert cli.run(["simulate", "--T", "30", "--grid", "20", "--seed", "1", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "simulate.csv").read_text().splitlines()
    assert lines[1] == "t,Lambda,H_scaled,martingale_scaled" and len(lines) == 23
    meta = json.loads((tmp_path / "simulate.meta.json").read_text())
    assert "wall_clock_seconds" in meta


def test_resolvent_and_report(tmp_path, capsys):
    code = cli.run(["resolvent", "--T", "64..256", "--n", "512", "--out", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "resolvent.json").read_text())
    assert data["verdicts"]["l2_slope_at_most_-0.45"] is True
    capsys.readouterr()
    assert cli.run(["report", "--out", str(tmp_path)]) == 0
    assert "resolvent,l2_slope_at_most_-0.45,pass" in capsys.readouterr().out


def test_report_on_empty_directory(tmp_path):
    assert cli.run(["report", "--out", str(tmp_path)]) == 1


def test_converge_output_independent_of_threads(tmp_path):
    outs = []
    for threads in (1, 2):
        d = tmp_path / str(threads)
        cli.run(["converge", "--T", "30,40,50", "--reps", "3", "--seed", "4",
                 "--threads", str(threads), "--out", str(d)])
        outs.append(((d / "converge.csv").read_bytes(), (d / "converge.json").read_bytes()))
    assert outs[0] == outs[1]
