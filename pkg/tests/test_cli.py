"""Command-line behaviour: exit codes, outputs, determinism, round trip."""

import csv
import json

import numpy as np
import pytest

from pqwave.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from pqwave.filters import load_pair
from pqwave.synth import ScenarioSpec, Tone, save_scenario


def short_scenario(snr=None):
    tones = [
        Tone("v_h1", "v", 100.0, 0.0, order=1),
        Tone("v_h3", "v", 5.0, 20.0, order=3),
        Tone("v_ih73", "v", 2.0, 0.0, freq=73.0),
        Tone("i_h1", "i", 10.0, -30.0, order=1),
        Tone("i_h3", "i", 1.0, 40.0, order=3),
    ]
    return ScenarioSpec("short", 1, 1600.0, 1.6, 50.0, tones, (), snr, 3)


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "short.json"
    save_scenario(short_scenario(), path)
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return head, data


def read_csv_rows(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_design_paper_pair(tmp_path, capsys):
    out = tmp_path / "paper.json"
    assert main(["design", "--paper", "--N", "99", "--wp", "0.47", "--out", str(out)]) == EXIT_OK
    assert load_pair(out).n_fb == 50
    assert "50 taps" in capsys.readouterr().out


def test_design_daubechies(tmp_path):
    out = tmp_path / "db40.json"
    assert main(["design", "--db", "40", "--out", str(out)]) == EXIT_OK
    assert load_pair(out).n_fb == 80


@pytest.mark.parametrize(
    "argv",
    [
        ["design", "--paper", "--N", "98"],
        ["design", "--paper", "--N", "95"],
        ["design", "--paper", "--db", "4"],
        ["design", "--paper", "--wp", "0.6"],
    ],
)
def test_design_usage_errors(tmp_path, argv):
    assert main([*argv, "--out", str(tmp_path / "x.json")]) == EXIT_USAGE


def test_synth_requires_out():
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--scenario", "two-tone-56hz"])
    assert exc.value.code == EXIT_USAGE


def test_unknown_scenario(tmp_path):
    assert main(["synth", "--scenario", "nope", "--out", str(tmp_path)]) == EXIT_USAGE


def test_unreadable_scenario_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["synth", "--scenario-file", str(bad), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_synth_outputs_and_determinism(tmp_path, scenario_file):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["synth", "--scenario-file", str(scenario_file), "--snr", "40", "--out", str(d)]) == EXIT_OK
    for name in ("wave.csv", "scenario.json", "oracle.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    head, data = read_csv(a / "wave.csv")
    assert head == ["time_s", "v", "i"]
    assert data.shape == (2560, 3)
    assert json.loads((a / "scenario.json").read_text())["snr_db"] == 40.0


def test_seed_changes_noise(tmp_path, scenario_file):
    for seed in ("1", "2"):
        main(["synth", "--scenario-file", str(scenario_file), "--snr", "30", "--seed", seed,
              "--out", str(tmp_path / seed)])
    assert (tmp_path / "1" / "wave.csv").read_bytes() != (tmp_path / "2" / "wave.csv").read_bytes()


def test_analyze_rejects_unsupported_rate(tmp_path):
    t = np.arange(1000) / 5000
    lines = ["time_s,v,i"] + [f"{x!r},{np.sin(100 * np.pi * x)!r},0.0" for x in t]
    path = tmp_path / "w.csv"
    path.write_text("\n".join(lines) + "\n")
    assert main(["analyze", "--in", str(path), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_analyze_rejects_malformed_csv(tmp_path, capsys):
    path = tmp_path / "w.csv"
    path.write_text("time_s,v,i\n0.0,1.0,2.0\n0.000625,oops,1.0\n")
    assert main(["analyze", "--in", str(path), "--out", str(tmp_path / "o")]) == EXIT_DATA
    assert ":3:" in capsys.readouterr().err


def test_analyze_rejects_unknown_channels(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("time_s,x\n" + "".join(f"{k / 1600!r},0.0\n" for k in range(3200)))
    assert main(["analyze", "--in", str(path), "--out", str(tmp_path / "o")]) == EXIT_DATA


@pytest.fixture
def clean_run(tmp_path, scenario_file):
    d = tmp_path / "syn"
    assert main(["synth", "--scenario-file", str(scenario_file), "--snr", "none", "--out", str(d)]) == EXIT_OK
    return d


def test_stft_gives_one_row_per_window(tmp_path, clean_run):
    out = tmp_path / "stft"
    assert main(["analyze", "--in", str(clean_run / "wave.csv"), "--method", "stft", "--out", str(out)]) == EXIT_OK
    _, data = read_csv(out / "pqi.csv")
    assert np.allclose(data[:, 0], np.arange(8) * 0.2)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rows"] == 8 and summary["method"] == "stft"


def test_noiseless_round_trip_matches_oracle(tmp_path, clean_run):
    out = tmp_path / "prop"
    assert main(["analyze", "--in", str(clean_run / "wave.csv"), "--out", str(out)]) == EXIT_OK
    head, est = read_csv(out / "pqi.csv")
    ohead, truth = read_csv(clean_run / "oracle.csv")
    assert head == ohead
    assert est[0, 0] == pytest.approx(0.1) and est[-1, 0] < 1.5
    idx = np.rint(est[:, 0] * 1600).astype(int)
    for col in ("U_RMS", "I_RMS", "THD_U", "THD_I", "P1", "Q1"):
        k = head.index(col)
        e, t = est[:, k].mean(), truth[idx, k].mean()
        assert abs(e - t) <= 0.005 * abs(t), col


def test_filter_files_are_used(tmp_path, clean_run):
    flt = tmp_path / "db40.json"
    main(["design", "--db", "40", "--out", str(flt)])
    out = tmp_path / "o"
    argv = ["analyze", "--in", str(clean_run / "wave.csv"), "--stage2-filter", str(flt), "--out", str(out)]
    assert main(argv) == EXIT_OK
    missing = ["analyze", "--in", str(clean_run / "wave.csv"), "--stage1-filter", str(tmp_path / "none.json"),
               "--out", str(out)]
    assert main(missing) == EXIT_DATA


def test_bench_writes_tables(tmp_path, scenario_file, capsys):
    out = tmp_path / "bench"
    argv = ["bench", "--scenario-file", str(scenario_file), "--stages", "0.3:0.5,0.9:1.1", "--repeats", "1",
            "--snr", "none", "--out", str(out)]
    assert main(argv) == EXIT_OK
    text = capsys.readouterr().out
    assert "proposal better in" in text
    report = json.loads((out / "report.json").read_text())
    assert report["stages"] == [[0.3, 0.5], [0.9, 1.1]]
    assert set(report["errors"]) == {"proposal", "stft", "fs-dwt"}
    head, _ = read_csv_rows(out / "errors.csv")
    assert head == ["method", "pqi", "stage_start_s", "stage_end_s", "error", "unit"]


@pytest.mark.parametrize("stages", ["0.5:0.3", "abc"])
def test_bench_bad_stages(tmp_path, scenario_file, stages):
    argv = ["bench", "--scenario-file", str(scenario_file), "--stages", stages, "--repeats", "1"]
    assert main(argv) == EXIT_USAGE


def test_bench_unknown_method(scenario_file):
    assert main(["bench", "--scenario-file", str(scenario_file), "--methods", "fft"]) == EXIT_USAGE
