import pandas as pd
import pytest

from cli import main
from config.reproduction import REPRODUCTION_TABLES
from config.settings import EXIT_ERROR, EXIT_INFEASIBLE, EXIT_MISMATCH, EXIT_OK


def _clear(tmp_path, *extra):
    return main(["clear", "--scenario", "ed_single_fr.json", "--out", str(tmp_path), *extra])


def _simulate(tmp_path, *extra):
    return main(["simulate", "--scenario", "ed_single_fr.json", "--out", str(tmp_path), *extra])


def test_clear_writes_exports(tmp_path, capsys):
    assert _clear(tmp_path, "--demand", "400") == EXIT_OK
    out = capsys.readouterr().out
    assert "Energy price (GBP/MWh): 18.00" in out
    assert "PFR price (GBP/MW): 1.00" in out
    for name in ("dispatch.csv", "prices.csv", "settlement.csv", "results.csv"):
        assert (tmp_path / name).exists()
    assert not (tmp_path / "nodes.csv").exists()
    dispatch = pd.read_csv(tmp_path / "dispatch.csv")
    assert dispatch["power_mw"].sum() == pytest.approx(400.0, abs=1e-4)


def test_clear_node_log(tmp_path):
    assert _clear(tmp_path, "--node-log", "--verbose") == EXIT_OK
    nodes = pd.read_csv(tmp_path / "nodes.csv")
    assert "incumbent" in set(nodes["decision"])


def test_clear_is_rerun_identically(tmp_path):
    assert _clear(tmp_path / "a", "--demand", "400") == EXIT_OK
    assert _clear(tmp_path / "b", "--demand", "400") == EXIT_OK
    for name in ("dispatch.csv", "prices.csv", "settlement.csv", "results.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_clear_infeasible_demand(tmp_path, capsys):
    assert _clear(tmp_path, "--demand", "1000") == EXIT_INFEASIBLE
    assert "infeasible" in capsys.readouterr().err


def test_clear_missing_scenario(tmp_path, capsys):
    assert main(["clear", "--scenario", "missing.json", "--out", str(tmp_path)]) == EXIT_ERROR
    assert "not found" in capsys.readouterr().err


def test_usage_errors_exit_with_error_code():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == EXIT_ERROR
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--scenario", "ed_single_fr.json", "--fr", "PFR"])
    assert info.value.code == EXIT_ERROR


def test_simulate_secure_state(tmp_path, capsys):
    code = _simulate(tmp_path, "--inertia", "4200", "--loss", "100", "--fr", "PFR=380", "--step", "0.1")
    assert code == EXIT_OK
    assert "Secure: yes" in capsys.readouterr().out
    trajectory = pd.read_csv(tmp_path / "trajectory.csv")
    assert list(trajectory.columns) == ["t_s", "freq_dev_hz", "fr_mw"]
    assert trajectory["t_s"].iloc[1] == pytest.approx(0.1)
    security = pd.read_csv(tmp_path / "security.csv")
    assert security["ok"].all()


def test_simulate_nadir_just_outside_limit(tmp_path):
    # 372 MW is slightly below the 372.02 MW needed at H = 4200 MWs
    assert _simulate(tmp_path, "--inertia", "4200", "--loss", "100", "--fr", "PFR=372") == EXIT_INFEASIBLE
    security = pd.read_csv(tmp_path / "security.csv").set_index("check")
    assert not security.loc["nadir_dev_hz", "ok"]
    assert security.loc["nadir_dev_hz", "value"] == pytest.approx(0.8, abs=1e-3)


def test_simulate_collapse(tmp_path, capsys):
    assert _simulate(tmp_path, "--fr", "PFR=50") == EXIT_INFEASIBLE
    captured = capsys.readouterr()
    assert "frequency collapse" in captured.out
    assert "frequency collapse" in captured.err


def test_simulate_cleared_state(tmp_path):
    assert _simulate(tmp_path, "--demand", "400", "--horizon", "12") == EXIT_OK
    trajectory = pd.read_csv(tmp_path / "trajectory.csv")
    assert trajectory["t_s"].iloc[-1] == pytest.approx(12.0)
    assert trajectory["freq_dev_hz"].max() <= 0.8 + 1e-6


def test_simulate_rejects_bad_input(tmp_path, capsys):
    assert _simulate(tmp_path, "--fr", "FR9=100") == EXIT_ERROR
    assert "unknown FR service" in capsys.readouterr().err
    assert _simulate(tmp_path, "--fr", "PFR=400", "--step", "0") == EXIT_ERROR
    assert _simulate(tmp_path, "--inertia", "0", "--fr", "PFR=400") == EXIT_INFEASIBLE


def test_reproduce_table(tmp_path, capsys):
    assert main(["reproduce", "3", "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.startswith("Table 3")
    report = pd.read_csv(tmp_path / "reproduction_3.csv")
    assert report["passed"].all()


def test_reproduce_unknown_table(capsys):
    assert main(["reproduce", "99"]) == EXIT_ERROR
    assert "unknown table" in capsys.readouterr().err
    assert main(["reproduce", "three"]) == EXIT_ERROR


def test_reproduce_mismatch(monkeypatch, capsys):
    case = dict(REPRODUCTION_TABLES[3], cells=[("energy_price", "", 99.0, 0.01)])
    monkeypatch.setitem(REPRODUCTION_TABLES, 3, case)
    assert main(["reproduce", "3"]) == EXIT_MISMATCH
    assert "out of tolerance" in capsys.readouterr().err


def test_simulate_delayed_clearing_reaches_nadir_limit(tmp_path):
    code = main(["simulate", "--scenario", "ed_delayed_fr.json", "--demand", "400", "--out", str(tmp_path)])
    assert code == EXIT_OK
    security = pd.read_csv(tmp_path / "security.csv").set_index("check")
    assert security.loc["nadir_dev_hz", "value"] == pytest.approx(0.8, abs=1e-4)
    assert 0.0 < security.loc["t_nadir_s", "value"] < 10.0
