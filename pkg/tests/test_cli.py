import numpy as np
import pytest

from nvcpt.cli import main
from nvcpt.io import read_fit_dips, read_spectrum
from nvcpt.spectrum import find_dips


def test_dips_resonant_example(capsys):
    assert main(["dips", "--set", "fields.mw_rabi=4", "--set", "fields.mw_detuning=0"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()[1:]
    assert len(rows) == 6
    center = sorted(float(r.split(",")[2]) for r in rows if r.startswith("+0"))
    assert center[1] - center[0] == pytest.approx(4.0)


def test_unknown_subcommand_exit_1(capsys):
    assert main(["bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_no_subcommand_exit_1(capsys):
    assert main([]) == 1


def test_validation_error_exit_1(capsys):
    assert main(["cpt", "--set", "model.leak_branch=1.5"]) == 1
    assert "leak_branch" in capsys.readouterr().err


def test_missing_config_exit_1(tmp_path, capsys):
    assert main(["cpt", "--config", str(tmp_path / "none.conf")]) == 1


def test_config_file_errors_carry_line(tmp_path, capsys):
    path = tmp_path / "bad.conf"
    path.write_text("[model]\n\nleak_branch = 2\n")
    assert main(["cpt", "--config", str(path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_numerical_failure_exit_2(capsys):
    # no leak, no repump: the m_s = 0 population is decoupled and the
    # stationary state is not unique
    code = main(["cpt", "--set", "model.leak_branch=0", "--set", "fields.repump_rabi=0",
                 "--set", "scan.start=29", "--set", "scan.stop=31", "--set", "scan.step=1"])
    assert code == 2
    assert "numerical failure" in capsys.readouterr().err


def test_cpt_fig2c_end_to_end(tmp_path):
    out = tmp_path / "f2c.csv"
    assert main(["cpt", "--config", "fig2c.conf", "--out", str(out)]) == 0
    spec = read_spectrum(str(out))
    assert spec.metadata["model.hyperfine_a"] == "-2.2"
    dips = find_dips(spec, 3)
    assert np.diff([d.center for d in dips]) == pytest.approx([4.4, 4.4], abs=0.2)
    fit_out = tmp_path / "fit.txt"
    assert main(["fit", str(out), "--config", "fig2c.conf", "--out", str(fit_out)]) == 0
    with open(fit_out) as fh:
        records = read_fit_dips(fh)
    assert [r["center"] for r in records] == pytest.approx([25.6, 30.0, 34.4])
    assert main(["fit", str(out), "--centers", "25.6,30,34.4", "--set", "fit.profile=true",
                 "--out", str(fit_out)]) == 0
    assert main(["fit", str(out), "--centers", "a,b"]) == 1


def test_deterministic_output(tmp_path):
    args = ["cpt", "--set", "scan.start=28", "--set", "scan.stop=32", "--set", "scan.step=0.5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--set", "scan.workers=2", "--out", str(b)]) == 0
    assert a.read_bytes().replace(b"scan.workers = 2", b"scan.workers = 1") == b.read_bytes() \
        .replace(b"scan.workers = 2", b"scan.workers = 1")
    c = tmp_path / "c.csv"
    main(args + ["--out", str(c)])
    assert a.read_bytes() == c.read_bytes()


def test_stark_indexed_files(tmp_path):
    out = tmp_path / "stark.csv"
    code = main(["stark", "--config", "fig3a.conf", "--set", "scan.step=0.5", "--out", str(out)])
    assert code == 0
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["stark_0.csv", "stark_1.csv", "stark_2.csv"]
    assert read_spectrum(str(tmp_path / "stark_1.csv")).metadata["dressing_rabi"] == "4.0"


def test_mode_flag_and_stdout(capsys):
    assert main(["cpt", "--mode", "time", "--set", "fields.repump_rabi=0",
                 "--set", "scan.start=29", "--set", "scan.stop=31", "--set", "scan.step=1"]) == 0
    out = capsys.readouterr().out
    assert "# scan.mode = time" in out
    assert out.strip().splitlines()[-3:][0].startswith("29,")


def test_rabi_and_ple_subcommands(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["rabi", "--config", "fig1b.conf", "--readout", "Ey", "--set", "scan.stop=0.05",
                 "--out", str(out)]) == 0
    assert read_spectrum(str(out)).unit == "us"
    assert main(["ple", "--config", "fig1c.conf", "--spin", "-1", "--set", "scan.step=100",
                 "--out", str(out)]) == 0
    assert read_spectrum(str(out)).metadata["ple_spin"] == "-1"
