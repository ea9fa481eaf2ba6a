import csv
import io
import json
import subprocess
import sys

import pytest

from qampnc.cli import run


def test_sfs_count_only(capsys):
    assert run(["sfs", "--qam", "16", "--count-only"]) == 0
    assert capsys.readouterr().out.strip() == "enumerated=388 formula=388"


def test_sfs_json_and_csv(tmp_path, capsys):
    out = tmp_path / "sfs.json"
    assert run(["sfs", "--pam", "4", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["count"] == doc["formula"] == 14
    assert {s["state"] for s in doc["states"]} >= {"1+0i/1+0i", "3+0i/1+0i"}
    assert run(["sfs", "--psk", "4", "--format", "csv"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 12 and set(rows[0]) == {"id", "state", "re", "im", "class"}


def test_latin_bank_roundtrip(tmp_path, capsys):
    bank = tmp_path / "bank.json"
    assert run(["latin", "build-bank", "--qam", "4", "--out", str(bank)]) == 0
    assert "entries=12 verified=yes" in capsys.readouterr().out
    assert run(["latin", "verify", str(bank)]) == 0
    assert "verified=yes" in capsys.readouterr().out
    assert run(["latin", "show", str(bank), "--state", "1+1i/1+0i"]) == 0
    shown = capsys.readouterr().out.splitlines()
    assert "t=5" in shown[0] and len(shown) == 5


def test_latin_show_without_bank(capsys):
    assert run(["latin", "show", "--pam", "4", "--state", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1:] == ["0 1 2 3", "1 2 3 0", "2 3 0 1", "3 0 1 2"]


def test_regions_csv_and_svg(tmp_path):
    grid, svg = tmp_path / "grid.csv", tmp_path / "map.svg"
    code = run(["regions", "--qam", "16", "--grid", "40x40", "--range", "-4..4", "--out", str(grid), "--svg", str(svg)])
    assert code == 0
    rows = list(csv.DictReader(grid.open()))
    assert len(rows) == 1600
    assert set(rows[0]) == {"re", "im", "state_id", "state", "ci_flag"}
    assert {r["ci_flag"] for r in rows} == {"1", "0", "-1"}
    text = svg.read_text()
    assert text.startswith("<svg") and "<polyline" in text and "<ellipse" in text


def test_simulate_flags_and_toml(tmp_path, capsys):
    assert run(["simulate", "--qam", "16", "--scheme", "FixedXOR", "--snr", "10,20", "--trials", "200"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert [r["snr_db"] for r in rows] == ["10.0", "20.0"]
    assert set(rows[0]) == {"scheme", "constellation", "channel", "snr_db", "trials", "ber", "ci_halfwidth"}
    cfg = tmp_path / "sim.toml"
    cfg.write_text('constellation = "4-QAM"\nchannel = "rician"\nk_db = 5\nsnr_db = [10]\ntrials = 100\n'
                   '[[run]]\nscheme = "AdaptiveLS"\n[[run]]\nscheme = "FixedXOR"\n')
    out = tmp_path / "ber.csv"
    assert run(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["scheme"] for r in rows] == ["AdaptiveLS", "FixedXOR"]
    assert rows[0]["channel"] == "rician(K=5dB)"


@pytest.mark.parametrize(
    "argv, code",
    [
        (["sfs", "--qam", "8", "--count-only"], 1),
        (["latin", "build-bank", "--qam", "4", "--out", "/nonexistent/dir/bank.json"], 1),
        (["sfs"], 2),
        (["sfs", "--qam", "16", "--bogus"], 2),
        (["regions", "--qam", "16", "--grid", "10by10"], 2),
        (["latin", "verify"], 2),
        (["simulate", "--qam", "16", "--snr", "ten"], 2),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert run(argv) == code
    assert capsys.readouterr().err


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "qampnc.cli", "sfs", "--pam", "8", "--count-only"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "enumerated=70 formula=70"
