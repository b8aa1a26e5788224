import json
import subprocess
import sys

import pytest

from subspace_ucb.cli import build_parser, main, verify_suite


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_list_problems(capsys):
    assert main(["list-problems"]) == 0
    out = capsys.readouterr().out
    assert "rosenbrock" in out and "scalable" in out and "small-suite" in out


def _config(tmp_path, **kw):
    cfg = dict(problems=["sphere"], dims=[10], seeds=[0], horizon=10, sketch_fraction=0.2,
               taus=[0.1])
    cfg.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_outputs_and_figures(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["run", str(_config(tmp_path)), "--out", str(out), "--quiet"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["ratios"]["cells"] == 1
    assert (out / "ratios.csv").exists() and (out / "runs.json").exists()
    assert (out / "figures" / "ratios.png").stat().st_size > 0
    assert (out / "figures" / "profile_tau=0.1.png").exists()


def test_run_without_plots(tmp_path, capsys):
    out = tmp_path / "res"
    main(["run", str(_config(tmp_path)), "--out", str(out), "--quiet", "--no-plots"])
    assert not (out / "figures").exists()


def test_run_rejects_unknown_key(tmp_path):
    with pytest.raises(ValueError):
        main(["run", str(_config(tmp_path, colour="blue")), "--out", str(tmp_path / "x")])


def test_profile_rebuilds_csv(tmp_path, capsys):
    out = tmp_path / "res"
    main(["run", str(_config(tmp_path)), "--out", str(out), "--quiet", "--no-plots"])
    original = (out / "profile_tau=0.1.csv").read_text()
    (out / "profile_tau=0.1.csv").unlink()
    assert main(["profile", str(out), "--tau", "0.1", "--no-plots"]) == 0
    assert (out / "profile_tau=0.1.csv").read_text() == original


def test_profile_empty_directory(tmp_path, capsys):
    (tmp_path / "runs.json").write_text("[]")
    assert main(["profile", str(tmp_path), "--no-plots"]) == 1


def test_verify_report_structure():
    report = verify_suite(seeds=3, quick=True)
    assert report["gradient_error"]["violations"] == 0
    assert report["inverse_update"]["max_error"] <= 1e-8
    by_lam = report["potential"]["min_slack_by_lambda"]
    assert by_lam["lam=1"] >= 0
    assert report["ok"] == (report["potential"]["min_slack"] >= -1e-9)


def test_verify_exit_code_matches_report(tmp_path):
    out = tmp_path / "verify.json"
    code = main(["verify", "--quick", "--seeds", "2", "--out", str(out)])
    report = json.loads(out.read_text())
    assert code == (0 if report["ok"] else 1)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "subspace_ucb", "list-problems"],
                         capture_output=True, text=True, check=True)
    assert "sphere" in res.stdout
