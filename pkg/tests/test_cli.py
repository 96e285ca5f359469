import csv
from pathlib import Path

import numpy as np
import pytest

from cmslab.cli import (
    EXIT_CONFIG,
    EXIT_HYPOTHESIS,
    EXIT_NONCONVERGED,
    EXIT_OK,
    histogram,
    main,
    write_pgm,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def read_pgm(path):
    data = Path(path).read_bytes()
    magic, dims, maxval, rest = data.split(b"\n", 3)
    w, h = map(int, dims.split())
    assert magic == b"P5" and maxval == b"255"
    return np.frombuffer(rest, dtype=np.uint8).reshape(h, w)


@pytest.mark.parametrize("name, rate", [("two_vertex_planar", "0.99523"), ("barnsley_elton", "0.875")])
def test_validate_builtin(capsys, tmp_path, name, rate):
    code, out, _ = run(capsys, "validate", "--system", name, "--seed", 0, "--pairs", 20000, "--out", tmp_path / "v.csv")
    assert code == EXIT_OK
    assert f"contraction_rate_estimate: {rate}" in out
    rows = {r["field"]: r["value"] for r in read_csv(tmp_path / "v.csv")}
    assert rows["failures"] == ""


def test_validate_broken(capsys):
    code, _, err = run(capsys, "validate", "--config", CONFIGS / "broken_normalization.yaml", "--seed", 0, "--pairs", 2000)
    assert code == EXIT_HYPOTHESIS and "normalization" in err


def test_invariant_decimal_ks(capsys, tmp_path):
    code, out, _ = run(
        capsys, "invariant", "--system", "decimal", "--seed", 1, "--particles", 100000, "--out", tmp_path / "mu.csv"
    )
    assert code == EXIT_OK
    ks = float(next(l for l in out.splitlines() if l.startswith("ks_vs_uniform")).split(": ")[1])
    assert ks < 0.02
    assert len(read_csv(tmp_path / "mu.csv")) > 0


def test_invariant_cantor_moments(capsys):
    code, out, _ = run(capsys, "invariant", "--system", "cantor", "--seed", 1, "--particles", 10000)
    lines = dict(l.split(": ", 1) for l in out.splitlines() if ": " in l)
    assert code == EXIT_OK
    assert abs(float(lines["mean"]) - 0.5) <= 0.01 and abs(float(lines["variance"]) - 0.125) <= 0.01


def test_invariant_nonconvergence(capsys, tmp_path):
    code, _, _ = run(
        capsys, "invariant", "--system", "barnsley_elton", "--seed", 1, "--iters", 3, "--tol", 1e-15,
        "--particles", 500, "--history", tmp_path / "h.csv",
    )
    assert code == EXIT_NONCONVERGED
    assert len(read_csv(tmp_path / "h.csv")) == 3


def test_code_exit_codes(capsys, tmp_path):
    code, _, _ = run(capsys, "code", "--system", "cantor", "--seed", 2, "--trials", 10, "--out", tmp_path / "c.csv")
    assert code == EXIT_OK and len(read_csv(tmp_path / "c.csv")) == 10
    code, _, _ = run(capsys, "code", "--system", "barnsley_elton", "--seed", 2, "--trials", 10, "--steps", 50)
    assert code == EXIT_NONCONVERGED


def test_entropy_both_signs(capsys):
    code, out, _ = run(capsys, "entropy", "--system", "cantor", "--seed", 0, "--particles", 100)
    assert code == EXIT_OK
    assert "entropy_nats (-sum int p log p dmu): 0.6931471805599453" in out
    assert "signed_integral (sum int p log p dmu): -0.6931471805599453" in out


def test_cylinder_outputs(capsys, tmp_path):
    code, out, _ = run(
        capsys, "cylinder", "--system", "barnsley_elton", "--seed", 0, "--particles", 2000, "--tol", 0.05, "--word-length", 3,
        "--out", tmp_path / "c.csv", "--shift-out", tmp_path / "s.csv",
    )
    rows = {r["word"]: r for r in read_csv(tmp_path / "c.csv")}
    assert code == EXIT_OK and float(rows["0-0-1"]["estimate"]) == 9 / 64 and rows["0-0-1"]["exact"] == "1"
    assert len(read_csv(tmp_path / "s.csv")) == 2 + 4 + 8


def test_render_cantor_coded(capsys, tmp_path):
    code, _, _ = run(
        capsys, "render", "--system", "cantor", "--source", "coded", "--seed", 3, "--points", 100000,
        "--width", 243, "--height", 4, "--out", tmp_path / "c.pgm", "--hist-out", tmp_path / "h.csv",
    )
    assert code == EXIT_OK
    for r in read_csv(tmp_path / "h.csv"):
        digits = np.base_repr(int(r["bin"]), 3).zfill(5)
        assert (float(r["mass"]) > 0) == ("1" not in digits)
    img = read_pgm(tmp_path / "c.pgm")
    assert img.shape == (4, 243) and img.max() == 255


def test_render_decimal_uniform(capsys, tmp_path):
    code, _, _ = run(
        capsys, "render", "--system", "decimal", "--seed", 1, "--particles", 100000, "--width", 1000,
        "--height", 2, "--out", tmp_path / "d.pgm", "--hist-out", tmp_path / "h.csv",
    )
    m = np.array([float(r["mass"]) for r in read_csv(tmp_path / "h.csv")])
    assert code == EXIT_OK and m.min() > 0 and m.max() / m.min() < 1.3


def test_render_planar_bands(capsys, tmp_path):
    code, _, _ = run(
        capsys, "render", "--system", "two_vertex_planar", "--seed", 1, "--particles", 20000, "--width", 512,
        "--height", 512, "--out", tmp_path / "p.pgm", "--hist-out", tmp_path / "h.csv",
    )
    assert code == EXIT_OK
    img = read_pgm(tmp_path / "p.pgm")
    assert img.shape == (512, 512) and img.max() == 255
    rows = read_csv(tmp_path / "h.csv")
    # cell centres in y, box is [-8, 8]
    ys = np.array([-8 + (int(r["row_from_bottom"]) + 0.5) * 16 / 512 for r in rows])
    assert np.all((ys >= 0.5 - 1 / 32) | (ys <= -0.5 + 1 / 32))
    assert np.any(ys > 0) and np.any(ys < 0)


def test_render_empty_cloud(capsys):
    code, _, err = run(capsys, "render", "--system", "cantor", "--seed", 0, "--bbox=5,6", "--particles", 100)
    assert code == EXIT_CONFIG and "empty" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["validate", "--system", "cantor"],  # seed is required
        ["validate", "--system", "nope", "--seed", "1"],
        ["invariant", "--system", "cantor", "--seed", "1", "--out", "/no/such/dir/x.csv"],
        ["validate", "--config", "/no/such/file.yaml", "--seed", "1"],
        ["validate", "--system", "decimal", "--probs", "0.5,x", "--seed", "1"],
        ["render", "--system", "cantor", "--seed", "1", "--bbox", "0,1,2"],
    ],
)
def test_config_errors(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:  # argparse rejections
        code = exc.code
    assert code == EXIT_CONFIG
    assert capsys.readouterr().err


def test_config_parse_error_message(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text((CONFIGS / "broken_normalization.yaml").read_text().replace("value: 0.4", "value: lots"))
    code, _, err = run(capsys, "validate", "--config", bad, "--seed", 0)
    assert code == EXIT_CONFIG and "probabilities[1].value" in err and "line 14" in err


def test_anchor_and_trajectory(capsys, tmp_path):
    code, _, _ = run(capsys, "anchor", "--system", "barnsley_elton", "--seed", 0, "--alt=1", "--trials", 200)
    assert code == EXIT_OK
    code, _, _ = run(
        capsys, "trajectory", "--system", "barnsley_elton", "--seed", 0, "--start", 1, "--trials", 200,
        "--out", tmp_path / "t.csv",
    )
    assert code == EXIT_OK and len(read_csv(tmp_path / "t.csv")) == 100


def test_histogram_and_pgm(tmp_path):
    pts = np.array([[0.1, 0.1], [0.9, 0.9], [0.9, 0.95], [2.0, 0.0]])
    h = histogram(pts, np.full(4, 0.25), np.zeros(2), np.ones(2), (2, 2))
    np.testing.assert_array_equal(h, [[0.25, 0], [0, 0.5]])
    write_pgm(tmp_path / "x.pgm", h.T[::-1])
    img = read_pgm(tmp_path / "x.pgm")
    np.testing.assert_array_equal(img, [[0, 255], [128, 0]])
