import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from spinqec.cli import main, read_config
from spinqec.disorder import DEFAULT_SEED
from spinqec.protocols import fidelity_vs_length


def run(tmp_path, *args):
    return main(["--out", str(tmp_path), *args])


def read_rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_transfer_two_sites(tmp_path):
    assert run(tmp_path, "transfer", "--n", "2", "--t-max", "6") == 0
    rows = read_rows(tmp_path / "transfer.csv")
    assert rows[0] == ["t", "re_f", "im_f", "abs_f", "p", "fmin_noqec"]
    data = np.array(rows[1:], dtype=float)
    assert np.all(np.diff(data[:, 0]) > 0)
    assert np.allclose(data[:, 3], np.abs(np.sin(data[:, 0])), atol=1e-12)
    summary = json.loads((tmp_path / "transfer.json").read_text())
    assert summary["seed"] == DEFAULT_SEED
    assert summary["command"] == "transfer"
    assert "wall_time" in summary


def test_fig2_matches_protocols(tmp_path):
    assert run(tmp_path, "fig2", "--n-min", "2", "--n-max", "6", "--t-max", "100") == 0
    rows = read_rows(tmp_path / "fig2.csv")
    assert rows[0] == ["N", "t_star", "f_sq", "fmin_4q", "fmin_5q"]
    data = np.array(rows[1:], dtype=float)
    assert np.all(np.diff(data[:, 0]) > 0)
    ref = {r.n: r for r in fidelity_vs_length([3, 4, 6], t_max=100.0)}
    for row in data:
        if int(row[0]) in ref:
            r = ref[int(row[0])]
            assert row[1] == r.t_star and row[2] == r.f_sq and row[3] == r.extra["fmin_four"]
        if 1 - row[2] < 4 / 7:
            assert row[3] >= row[2] - 1e-12


def test_fig3(tmp_path):
    assert run(tmp_path, "fig3", "--lengths", "8,16", "--t-max", "100") == 0
    rows = read_rows(tmp_path / "fig3.csv")
    header = rows[0]
    assert "fmin_closed_form" in header
    data = {int(r[0]): dict(zip(header, r)) for r in rows[1:]}
    assert float(data[8]["fmin_repeated_qec"]) == pytest.approx(float(data[8]["fmin_single_shot_qec"]), abs=1e-12)
    for row in data.values():
        assert float(row["fmin_repeated_qec"]) >= float(row["fmin_repeated_noqec"])


def test_dist(tmp_path):
    assert run(tmp_path, "dist", "--samples", "5000", "--bins", "30") == 0
    hist = np.array([r[1:] for r in read_rows(tmp_path / "dist_hist.csv")[1:]], dtype=float)
    comps = [r[0] for r in read_rows(tmp_path / "dist_hist.csv")[1:]]
    for comp in ("re", "im"):
        sel = hist[np.array(comps) == comp]
        assert np.sum(sel[:, 2] * (sel[:, 1] - sel[:, 0])) == pytest.approx(1)
    summary = json.loads((tmp_path / "dist.json").read_text())["results"]
    assert summary["re"]["ks_perturbative"] <= 0.02
    assert read_rows(tmp_path / "dist_density.csv")[0] == ["component", "x", "density"]


def test_dist_strong_disorder_spreads(tmp_path):
    weak = tmp_path / "weak"
    strong = tmp_path / "strong"
    assert main(["--out", str(weak), "dist", "--delta", "0.001", "--samples", "2000"]) == 0
    assert main(["--out", str(strong), "dist", "--delta", "1", "--samples", "2000"]) == 0
    w = json.loads((weak / "dist.json").read_text())["results"]
    s = json.loads((strong / "dist.json").read_text())["results"]
    hw = np.array([r[1:3] for r in read_rows(weak / "dist_hist.csv")[1:]], dtype=float)
    hs = np.array([r[1:3] for r in read_rows(strong / "dist_hist.csv")[1:]], dtype=float)
    assert np.ptp(hs) > 50 * np.ptp(hw)
    for comp in ("re", "im"):
        assert abs(s[comp]["mean_exact"]) < abs(w[comp]["mean_exact"])


def test_fig5_zero_delta(tmp_path):
    assert run(tmp_path, "fig5", "--deltas", "0,0.01", "--samples", "30") == 0
    rows = read_rows(tmp_path / "fig5.csv")
    assert rows[0][:3] == ["delta", "fmin_mean", "fmin_stderr"]
    zero = dict(zip(rows[0], rows[1]))
    # identical samples; only rounding in the mean survives
    assert float(zero["fmin_stderr"]) < 1e-15
    assert float(dict(zip(rows[0], rows[2]))["fmin_mean"]) >= 0.8


def test_localization(tmp_path):
    assert run(tmp_path, "localization", "--deltas", "0,0.03,0.1", "--samples", "200") == 0
    rows = read_rows(tmp_path / "localization.csv")
    assert rows[0] == ["delta", "n", "mean_prob", "stderr", "fit_prob", "loc_length"]
    data = np.array(rows[1:], dtype=float)
    assert data[data[:, 0] == 0, 2].sum() == pytest.approx(1)
    end = data[data[:, 1] == 8, 2]
    assert np.all(np.diff(end) < 0)


@pytest.mark.parametrize("args", [
    ["transfer", "--n", "0"],
    ["transfer", "--s", "9"],
    ["fig5", "--deltas", "a,b"],
    ["fig3", "--lengths", "4"],
    ["dist", "--delta", "0"],
    ["--seed", "-1", "transfer"],
    ["--seed", str(2**64), "transfer"],
    ["selftest", "--criteria", "13"],
    ["nosuchcommand"],
])
def test_invalid_flags_exit_2(tmp_path, args):
    with pytest.raises(SystemExit) as exc:
        main(["--out", str(tmp_path), *args])
    assert exc.value.code == 2


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nn = 2\nt-max = 3\nseed = 0x10\n")
    assert read_config(cfg) == {"n": "2", "t_max": "3", "seed": "0x10"}
    out = tmp_path / "a"
    assert main(["--config", str(cfg), "--out", str(out), "transfer", "--t-max", "1"]) == 0
    summary = json.loads((out / "transfer.json").read_text())
    assert summary["seed"] == 16
    assert summary["parameters"]["n"] == 2
    assert summary["parameters"]["t_max"] == 1.0


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("bogus = 1\n")
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "--out", str(tmp_path), "transfer"])
    assert exc.value.code == 2


def test_config_bad_value(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("samples = -3\n")
    with pytest.raises(SystemExit) as exc:
        main(["--config", str(cfg), "--out", str(tmp_path), "fig5"])
    assert exc.value.code == 2


def test_runtime_failure_exit_1(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    # the output path exists as a regular file, so nothing can be written
    assert main(["--out", str(blocker), "transfer"]) == 1


def test_byte_identical_reruns(tmp_path):
    for name in ("a", "b"):
        assert main(["--seed", "7", "--out", str(tmp_path / name), "fig5", "--deltas", "0.02", "--samples", "20"]) == 0
    assert (tmp_path / "a" / "fig5.csv").read_bytes() == (tmp_path / "b" / "fig5.csv").read_bytes()


def test_threads_do_not_change_output(tmp_path):
    for name, threads in (("a", "1"), ("b", "3")):
        assert main(["--threads", threads, "--out", str(tmp_path / name), "fig5", "--deltas", "0.02", "--samples", "20"]) == 0
    assert (tmp_path / "a" / "fig5.csv").read_bytes() == (tmp_path / "b" / "fig5.csv").read_bytes()


def test_selftest_subset_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        proc = subprocess.run(
            [sys.executable, "-m", "spinqec.cli", "--out", str(tmp_path / name), "selftest", "--criteria", "1,5"],
            capture_output=True, text=True, check=False,
        )
        assert proc.returncode == 0, proc.stderr
        assert "[PASS] criterion  1" in proc.stdout
        outs.append(tmp_path / name)
    names = sorted(p.name for p in outs[0].glob("*.csv"))
    assert "acceptance.csv" in names and "fig5.csv" in names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
