import json
import shutil

import numpy as np
import pytest

from olc_sim import cli, olc
from olc_sim.output import csv_header, read_trajectory_csv
from olc_sim.scenario import (
    Scenario,
    ScenarioNetworkError,
    case_dir,
    list_cases,
    load_scenario,
    resolve_case,
    scenario_from_dict,
    synthetic_mesh68,
    write_scenario,
)

BUILTIN = [
    "n1_tree", "zero_disturbance", "n1_clipped", "star4_tree", "star4_random_init",
    "ring3_mesh", "ring3_consistent_init", "ring3_random_init", "mesh68_synthetic",
]


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def n1_dict():
    return json.loads(resolve_case("n1_tree").read_text())


def write_json(tmp_path, data, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


class TestScenario:
    def test_library(self):
        assert sorted(p.stem for p in list_cases()) == sorted(BUILTIN)

    def test_n1_golden(self):
        sc = load_scenario(resolve_case("n1_tree"))
        net = sc.network
        assert net.bus_ids == (1, 2) and net.n_gen == 1
        assert net.M.tolist() == [1.0] and net.D.tolist() == [1.0, 1.0]
        assert net.P_m.tolist() == [1.0, 0.0] and net.B.tolist() == [6.0]
        assert all(c.alpha == 1.0 for c in net.costs)
        assert sc.config.h == 1e-3 and sc.config.T == 20.0 and not sc.config.sampled

    def test_mesh68_matches_generator(self):
        assert json.loads(resolve_case("mesh68_synthetic").read_text()) == json.loads(json.dumps(synthetic_mesh68()))

    def test_mesh68_shape(self):
        sc = load_scenario(resolve_case("mesh68_synthetic"))
        net = sc.network
        assert net.n_bus == 68 and net.n_gen == 16
        assert {c.alpha for c in net.costs} == {100.0}
        assert int(np.sum(net.P_m == -1.0)) == 3
        assert sc.config.sampled and sc.config.sample_interval == pytest.approx(0.25)

    @pytest.mark.parametrize("name", BUILTIN)
    def test_round_trip(self, tmp_path, name):
        sc = load_scenario(resolve_case(name))
        path = tmp_path / "copy.json"
        write_scenario(sc, path)
        again = load_scenario(path)
        assert again.to_dict() == sc.to_dict()
        assert again.config == sc.config
        for attr in ("M", "D", "P_m", "B", "incidence", "src", "dst"):
            assert np.array_equal(getattr(again.network, attr), getattr(sc.network, attr))
        assert again.network.bus_ids == sc.network.bus_ids
        assert np.array_equal(again.P0, sc.P0) and np.array_equal(again.omega_G0, sc.omega_G0)

    def test_flow_consistency_flag(self):
        assert load_scenario(resolve_case("ring3_consistent_init")).flows_consistent
        random_init = load_scenario(resolve_case("ring3_random_init"))
        assert not random_init.flows_consistent and random_init.notes
        assert load_scenario(resolve_case("star4_random_init")).flows_consistent

    def test_unknown_field_rejected(self):
        data = n1_dict()
        data["buses"][0]["inertia"] = 3.0
        with pytest.raises(Exception) as info:
            scenario_from_dict(data)
        assert info.value.exit_code == 3 and "buses/0" in str(info.value)

    def test_network_error_names_bus(self):
        data = n1_dict()
        data["buses"][1]["D"] = 0.0
        with pytest.raises(ScenarioNetworkError, match="bus 2"):
            scenario_from_dict(data)

    def test_case_dir_env(self, tmp_path, monkeypatch):
        shutil.copy(resolve_case("n1_tree"), tmp_path / "mine.json")
        monkeypatch.setenv("OLC_SIM_CASE_DIR", str(tmp_path))
        assert case_dir() == tmp_path
        assert [p.name for p in list_cases()] == ["mine.json"]
        assert load_scenario(resolve_case("mine")).network.n_bus == 2


class TestExitCodes:
    def test_parse_error(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert run(capsys, "solve", str(path))[0] == 2

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "solve", str(tmp_path / "nope.json"))[0] == 2

    def test_schema_error(self, capsys, tmp_path):
        data = n1_dict()
        data["version"] = 7
        assert run(capsys, "solve", str(write_json(tmp_path, data)))[0] == 3

    def test_bad_controller(self, capsys):
        assert run(capsys, "check", "n1_tree", "--controller", "sampled:0.1")[0] == 3

    def test_zero_damping(self, capsys, tmp_path):
        data = n1_dict()
        data["buses"][1]["D"] = 0.0
        code, _, err = run(capsys, "solve", str(write_json(tmp_path, data)))
        assert code == 4 and "bus 2" in err

    def test_stiffness_mismatch(self, capsys, tmp_path):
        data = n1_dict()
        data["lines"][0]["B"] = 5.0
        assert run(capsys, "solve", str(write_json(tmp_path, data)))[0] == 4

    def test_disconnected(self, capsys, tmp_path):
        data = n1_dict()
        data["buses"].append({"id": 3, "kind": "load", "D": 1.0, "cost": {"alpha": 1, "d_min": -1, "d_max": 1}})
        assert run(capsys, "solve", str(write_json(tmp_path, data)))[0] == 4

    def test_solver_error(self, capsys, monkeypatch):
        def boom(*args, **kwargs):
            raise olc.SolverError("forced")

        monkeypatch.setattr(olc, "solve_dual", boom)
        assert run(capsys, "solve", "n1_tree")[0] == 5

    def test_divergence(self, capsys, tmp_path):
        out = tmp_path / "x.csv"
        code = run(capsys, "simulate", "n1_tree", "--out", str(out), "--h", "5", "--horizon", "5000")[0]
        assert code == 6

    def test_unwritable(self, capsys, tmp_path):
        code = run(capsys, "simulate", "zero_disturbance", "--out", str(tmp_path / "no" / "dir.csv"),
                   "--horizon", "0.1")[0]
        assert code == 7


class TestSolve:
    def test_n1(self, capsys):
        code, out, _ = run(capsys, "solve", "n1_tree")
        doc = json.loads(out)
        assert code == 0
        assert set(doc) == {"nu_star", "d_star", "d_hat_star", "h_star", "flow_point", "null_basis", "objective"}
        assert doc["nu_star"] == pytest.approx(0.25, abs=1e-15)
        assert doc["flow_point"] == pytest.approx([0.5], abs=1e-15)
        assert doc["null_basis"] == []

    def test_zero(self, capsys):
        doc = json.loads(run(capsys, "solve", "zero_disturbance")[1])
        assert doc["nu_star"] == 0.0 and doc["objective"] == 0.0
        assert not any(doc["d_star"] + doc["d_hat_star"] + doc["h_star"] + doc["flow_point"])

    def test_ring_null_basis(self, capsys):
        doc = json.loads(run(capsys, "solve", "ring3_mesh")[1])
        assert len(doc["null_basis"]) == 1 and len(doc["null_basis"][0]) == 3

    def test_large_deviation_warning(self, capsys, tmp_path):
        data = n1_dict()
        data["warn_threshold"] = 0.1
        code, _, err = run(capsys, "solve", str(write_json(tmp_path, data)))
        assert code == 0 and "exceeds" in err

    def test_input_order(self, capsys, tmp_path):
        data = n1_dict()
        data["buses"].reverse()  # load bus listed first
        data["buses"][0]["P_m"] = 0.2
        doc = json.loads(run(capsys, "solve", str(write_json(tmp_path, data)))[1])
        assert doc["nu_star"] == pytest.approx(0.3)
        assert doc["h_star"] == pytest.approx([0.2 - 0.6, 1.0 - 0.6])


class TestSimulate:
    def test_n1(self, capsys, tmp_path):
        out = tmp_path / "n1.csv"
        code, stdout, _ = run(capsys, "simulate", "n1_tree", "--out", str(out))
        summary = json.loads(stdout)
        assert code == 0
        assert abs(summary["final"]["omega"][0] - 0.25) <= 1e-6
        assert summary["max_frequency_error"] <= 1e-6 and summary["lyapunov_monotone"] is True
        header, data = read_trajectory_csv(out)
        assert header == ["t", "omega_1", "omega_2", "P_1-2", "d_1", "d_2", "dhat_1", "dhat_2",
                          "U", "kkt_stationarity", "kkt_sync"]
        assert data.shape == (20001, len(header))

    def test_zero(self, capsys, tmp_path):
        out = tmp_path / "z.csv"
        assert run(capsys, "simulate", "zero_disturbance", "--out", str(out))[0] == 0
        _, data = read_trajectory_csv(out)
        assert not data[:, 1:].any()

    def test_ring_consistent(self, capsys, tmp_path):
        summary = json.loads(run(capsys, "simulate", "ring3_consistent_init", "--out", str(tmp_path / "r.csv"))[1])
        assert summary["projection_error"] <= 1e-6

    def test_csv_bit_exact(self, capsys, tmp_path):
        from olc_sim.dynamics import EquilibriumReference, simulate
        from olc_sim.output import trajectory_table

        out = tmp_path / "s.csv"
        run(capsys, "simulate", "star4_tree", "--out", str(out), "--horizon", "0.5")
        sc = load_scenario(resolve_case("star4_tree"))
        sc.config = sc.config.__class__(h=1e-3, T=0.5)
        sol = olc.solve(sc.network)
        traj = simulate(sc.network, sc.omega_G0, sc.P0, sc.config, EquilibriumReference.from_solution(sc.network, sol))
        header, data = read_trajectory_csv(out)
        assert header == csv_header(sc.network)
        assert np.array_equal(data, trajectory_table(traj))

    def test_overrides(self, capsys, tmp_path):
        out = tmp_path / "o.csv"
        code, stdout, _ = run(capsys, "simulate", "n1_tree", "--out", str(out), "--h", "0.01", "--horizon", "2",
                              "--decimation", "10", "--controller", "sampled:250")
        summary = json.loads(stdout)
        assert code == 0 and summary["samples"] == 21 and summary["controller"] == "sampled"
        assert summary["lyapunov_monotone"] is None

    def test_csv_columns_every_case(self, capsys, tmp_path):
        for name in BUILTIN:
            out = tmp_path / f"{name}.csv"
            assert run(capsys, "simulate", name, "--out", str(out), "--horizon", "0.1", "--h", "0.005",
                       "--decimation", "1", "--controller", "continuous")[0] == 0
            header, data = read_trajectory_csv(out)
            assert header == csv_header(load_scenario(resolve_case(name)).network)
            assert data.shape == (21, len(header))


class TestCheck:
    def test_n1_all_pass(self, capsys):
        code, out, _ = run(capsys, "check", "n1_tree")
        assert code == 0 and "FAIL" not in out

    def test_ring_random_init(self, capsys):
        code, out, _ = run(capsys, "check", "ring3_random_init")
        lines = {l.split("  ")[1].strip(): l for l in out.splitlines()[1:]}
        assert code == 0
        assert "pass" in lines["mesh limit in Z*_P"]
        assert "n/a" in lines["matches projection"]

    def test_tree_random_init(self, capsys):
        code, out, _ = run(capsys, "check", "star4_random_init")
        assert code == 0
        assert any("tree limit unique" in l and "pass" in l for l in out.splitlines())

    def test_failure_exit(self, capsys):
        # a horizon too short to converge must fail the limit checks
        code, out, _ = run(capsys, "check", "n1_tree", "--horizon", "0.5")
        assert code == 1 and "FAIL" in out

    @pytest.mark.slow
    def test_all(self, capsys):
        code, out, _ = run(capsys, "check", "--all")
        assert code == 0 and out.count("== ") == len(BUILTIN)
