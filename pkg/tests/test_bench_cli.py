import csv

import numpy as np
import pytest

from twostep_sls import bench
from twostep_sls.bench import DEFAULT_CONFIG, ExperimentConfig, build_chain_system
from twostep_sls.cli import main
from twostep_sls.lti import spectral_radius
from twostep_sls.sparsity import MaskError, SparsityMask
from twostep_sls.textio import load_implementation, save_mask


SMALL = """\
[system]
n = 4
actuators = 1, 4
[synthesis]
T = 6
tc_list = 2-4
table1_tc = T, 2
[run]
out = out
"""


def test_chain_system_examples():
    sys = build_chain_system()
    assert spectral_radius(sys.A) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_array_equal(build_chain_system(2, [1]).A, [[0.6, 0.4], [0.4, 0.6]])
    assert (sys.B.sum(axis=0) == 1).all()
    assert list(np.flatnonzero(sys.B.sum(axis=1)) + 1) == [3, 6, 10]
    with pytest.raises(ValueError):
        build_chain_system(1, [1])
    with pytest.raises(ValueError):
        build_chain_system(4, [5])


def test_default_config_mirrors_benchmark():
    cfg = ExperimentConfig.from_text(DEFAULT_CONFIG)
    assert (cfg.n, cfg.T, cfg.actuators) == (10, 20, (3, 6, 10))
    assert cfg.tc_list == tuple(range(2, 26))
    assert cfg.orders_table1() == [20, 2]
    assert cfg == ExperimentConfig()


def test_config_overrides_and_validation():
    cfg = ExperimentConfig.from_text(SMALL)
    cfg.apply({"synthesis.lam": "0.5", "mask.enabled": "no"})
    assert cfg.lam == 0.5 and not cfg.mask_enabled
    for bad in ({"synthesis.t": "0"}, {"system.actuators": "11"}, {"mask.comm_speed": "0"},
                {"synthesis.lambda_factor": "1"}, {"nope.key": "1"}):
        with pytest.raises(ValueError):
            ExperimentConfig.from_text(SMALL).apply(bad)


def test_config_rejects_mask_without_identity(tmp_path):
    pr = np.ones((2, 4, 4), bool)
    pr[0, 2, 2] = False
    save_mask(tmp_path / "bad.txt", SparsityMask(pr, np.ones((2, 2, 4), bool)))
    (tmp_path / "cfg.ini").write_text(SMALL + "[mask]\nfile = bad.txt\n")
    with pytest.raises(MaskError):
        ExperimentConfig.from_file(tmp_path / "cfg.ini")


def test_fig2_small_and_deterministic(tmp_path):
    cfg = ExperimentConfig.from_text(SMALL, str(tmp_path))
    rows = bench.run_fig2_sweep(cfg, tmp_path / "a.csv")
    assert [r["controller"] for r in rows] == ["original", "two-step", "two-step", "two-step"]
    assert all(r["spectral_radius"] < 1 for r in rows)
    bench.run_fig2_sweep(cfg.apply({"run.workers": "3"}), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    pytest.importorskip("matplotlib")
    bench.plot_fig2(tmp_path / "a.csv", tmp_path / "fig.svg")
    assert (tmp_path / "fig.svg").read_text().lstrip().startswith("<?xml")


def test_cli_table1_exit_codes(tmp_path, capsys):
    (tmp_path / "cfg.ini").write_text(SMALL)
    cfg = str(tmp_path / "cfg.ini")
    code = main(["bench", "table1", "--config", cfg])
    table = list(csv.DictReader(open(tmp_path / "out" / "table1.csv")))
    assert [r["controller"] for r in table][:3] == ["FIR centralized", "Constrained CL map",
                                                    "Virtually local"]
    infeasible = table[1]["status"] == "Infeasible"
    assert code == (2 if infeasible else 0)
    if infeasible:
        assert main(["bench", "table1", "--config", cfg,
                     "--set", "run.expect_infeasible=false"]) == 1
    first = (tmp_path / "out" / "table1.csv").read_bytes()
    main(["bench", "table1", "--config", cfg])
    assert (tmp_path / "out" / "table1.csv").read_bytes() == first


def test_cli_pipeline(tmp_path, capsys):
    (tmp_path / "cfg.ini").write_text(SMALL)
    cfg = ["--config", str(tmp_path / "cfg.ini")]
    assert main(["synth-cl", *cfg]) == 0
    out = tmp_path / "out"
    assert "achievability_residual" in capsys.readouterr().out
    assert main(["synth-impl", *cfg, "--clmaps", str(out / "clmaps.txt"), "--Tc", "3"]) == 0
    impl = load_implementation(out / "impl.txt")
    assert impl.T_c == 3
    assert "eq_residual" in (out / "diagnostics.txt").read_text()
    assert main(["check-stability", *cfg, "--impl", str(out / "impl.txt"),
                 "--processors", "2"]) == 0
    assert (out / "stability_trace.csv").read_text().startswith("k,global_norm,verdict_so_far")
    assert main(["simulate", *cfg, "--impl", str(out / "impl.txt"), "--horizon", "20"]) == 0
    assert len((out / "trajectory.csv").read_text().splitlines()) == 21
    assert main(["synth-cl", *cfg, "--set", "bogus"]) == 1
    assert main(["check-stability", *cfg, "--impl", str(tmp_path / "missing.txt")]) == 1


def test_cli_constrained_infeasible_on_chain(tmp_path):
    assert main(["synth-cl", "--constrained", "--out", str(tmp_path)]) == 2
