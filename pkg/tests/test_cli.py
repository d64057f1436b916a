import csv
import re

import numpy as np
import pytest

from compql.cli import main
from compql.dataio import RunConfig, arctic_lake, parse_csv, write_dataset_csv
from compql.errors import ConfigError, DataError
from compql.model import CompositionalDataset, logit_probabilities


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


CFG = RunConfig(parts=("a", "b", "c"), covariates=("x",))


def test_percentages_and_zero_rows(tmp_path):
    f = write(tmp_path / "d.csv", "a,b,c,x\n20,30,50,1\n10,0,30,2\n")
    d = parse_csv(f, CFG)
    np.testing.assert_allclose(d.compositions, [[0.2, 0.3, 0.5], [0.25, 0, 0.75]])
    assert d.part_names == ("a", "b", "c") and d.covariate_names == ("x",)


@pytest.mark.parametrize(
    "body, exc, pattern",
    [
        ("a,b,c,x\n1,2,3,1\n10,-1,30,2\n", DataError, "line 3"),
        ("a,b,c,x\n0,0,0,1\n", DataError, "line 2"),
        ("a,b,c,x\n1,2,zz,1\n", DataError, "line 2"),
        ("a,b,x\n1,2,1\n", ConfigError, "c"),
        ("", DataError, "empty"),
        ("a,b,c,x\n", DataError, "no data"),
    ],
)
def test_parse_errors(tmp_path, body, exc, pattern):
    with pytest.raises(exc, match=pattern):
        parse_csv(write(tmp_path / "d.csv", body), CFG)


def test_log_transform(tmp_path):
    f = write(tmp_path / "d.csv", "a,b,c,x\n1,2,3,10\n")
    d = parse_csv(f, RunConfig(parts=("a", "b", "c"), covariates=("x",), transforms={"x": "log"}))
    assert d.covariates[0, 0] == pytest.approx(np.log(10))
    assert d.covariate_names == ("log(x)",)
    with pytest.raises(DataError, match="line 2"):
        parse_csv(write(tmp_path / "e.csv", "a,b,c,x\n1,2,3,0\n"),
                  RunConfig(parts=("a", "b", "c"), covariates=("x",), transforms={"x": "log"}))


def test_round_trip(tmp_path, rng):
    d = CompositionalDataset(rng.uniform(0, 10, size=(20, 3)), rng.normal(size=(20, 2)),
                             part_names=("a", "b", "c"), covariate_names=("u", "v"))
    write_dataset_csv(d, tmp_path / "d.csv")
    back = parse_csv(str(tmp_path / "d.csv"), RunConfig(parts=("a", "b", "c"), covariates=("u", "v")))
    assert np.array_equal(back.raw, d.raw) and np.array_equal(back.covariates, d.covariates)


def test_arctic_lake_bundled():
    d = arctic_lake()
    assert d.N == 39 and d.D == 3 and d.covariate_names == ("log(depth)",)


def test_fit_exact_data_via_cli(tmp_path, rng):
    B = np.array([[0.4, -1.0], [0.1, 0.5], [-0.5, 0.5]])
    x = rng.normal(size=(30, 1))
    P = logit_probabilities(B, x) * 100
    body = "a,b,c,x\n" + "".join(",".join(repr(float(v)) for v in (*r, v)) + "\n" for r, v in zip(P, x[:, 0]))
    f = write(tmp_path / "d.csv", body)
    out = tmp_path / "out"
    assert main(["fit", f, "--parts", "a,b,c", "--covariates", "x", "--method", "both", "--out", str(out)]) == 0
    rows = read_csv(out / "coefficients.csv")
    assert list(rows[0]) == ["part", "covariate", "estimate", "se_model", "se_sandwich", "z_model"]
    est = np.array([float(r["estimate"]) for r in rows]).reshape(3, 2)
    np.testing.assert_allclose(est, B, atol=1e-6)
    for name in ("dispersion.csv", "residuals.csv", "convergence.log"):
        assert (out / name).exists()
    assert "converged: True" in (out / "convergence.log").read_text()


def test_fit_reference_constraint(tmp_path):
    out = tmp_path / "o"
    rc = main(["fit", "@arctic-lake", "--parts", "sand,silt,clay", "--covariates", "depth", "--log", "depth",
               "--constraint", "ref:clay", "--out", str(out)])
    assert rc == 0
    rows = [r for r in read_csv(out / "coefficients.csv") if r["part"] == "clay"]
    assert all(float(r["estimate"]) == 0 for r in rows)


def test_fit_arctic_with_plot(tmp_path):
    out = tmp_path / "o"
    rc = main(["fit", "@arctic-lake", "--parts", "sand,silt,clay", "--covariates", "depth", "--log", "depth",
               "--plot", "--out", str(out)])
    assert rc == 0
    svg = (out / "ternary.svg").read_text()
    assert svg.count('class="data-point"') == 39
    assert 'class="curve-solid"' in svg and 'class="curve-dashed"' in svg
    pts = re.search(r'class="curve-solid" points="([^"]+)"', svg).group(1).split()
    assert len(pts) >= 200


def test_plot_points_only(tmp_path):
    f = write(tmp_path / "d.csv", "a,b,c,x\n1,2,3,1\n3,2,1,2\n1,1,1,3\n")
    out = tmp_path / "o"
    assert main(["plot", f, "--parts", "a,b,c", "--covariates", "x", "--no-models", "--out", str(out)]) == 0
    svg = (out / "ternary.svg").read_text()
    assert svg.count('class="data-point"') == 3
    assert "polyline" not in svg


def test_plot_with_zeros_omits_dashed(tmp_path, rng):
    x = np.linspace(0, 1, 25)
    P = logit_probabilities(np.array([[0.0, 1.0], [0.0, 0.0], [0.0, -1.0]]), x[:, None])
    P = P * np.exp(rng.normal(scale=0.2, size=P.shape))
    P[3, 1] = 0
    body = "a,b,c,x\n" + "".join(f"{r[0]},{r[1]},{r[2]},{v}\n" for r, v in zip(P, x))
    out = tmp_path / "o"
    assert main(["plot", write(tmp_path / "d.csv", body), "--parts", "a,b,c", "--covariates", "x",
                 "--out", str(out)]) == 0
    svg = (out / "ternary.svg").read_text()
    assert 'class="curve-solid"' in svg and 'class="curve-dashed"' not in svg
    assert "zero parts" in svg


def test_svg_deterministic_via_cli(tmp_path):
    args = ["plot", "@arctic-lake", "--parts", "sand,silt,clay", "--covariates", "depth", "--log", "depth"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "ternary.svg").read_bytes() == (tmp_path / "b" / "ternary.svg").read_bytes()


def test_plot_needs_three_parts(tmp_path):
    f = write(tmp_path / "d.csv", "a,b,x\n1,2,1\n")
    assert main(["plot", f, "--parts", "a,b", "--out", str(tmp_path)]) == 1


def test_logratio_and_distances(tmp_path):
    out = tmp_path / "o"
    base = ["@arctic-lake", "--parts", "sand,silt,clay", "--out", str(out)]
    assert main(["logratio"] + base + ["--covariates", "depth", "--log", "depth", "--ref", "clay"]) == 0
    rows = read_csv(out / "logratio_coefficients.csv")
    assert rows[0]["logratio"] == "log(sand/clay)" and len(rows) == 4
    for kind in ("identity", "mahalanobis", "aitchison"):
        assert main(["distances"] + base + ["--kind", kind]) == 0
        with open(out / "distances.csv") as fh:
            assert len(fh.readlines()) == 40


def test_logratio_zeros_exit_code(tmp_path):
    f = write(tmp_path / "d.csv", "a,b,c,x\n10,0,30,1\n1,2,3,2\n3,2,1,3\n2,2,2,4\n")
    base = ["logratio", f, "--parts", "a,b,c", "--covariates", "x", "--out", str(tmp_path / "o")]
    assert main(base) == 2
    assert main(base + ["--zero-adjust", "0.5"]) == 0


@pytest.mark.parametrize(
    "argv, code",
    [
        ([], 1),
        (["fit"], 1),
        (["fit", "missing.csv", "--parts", "a,b"], 1),
        (["fit", "@arctic-lake", "--parts", "sand,silt,nope"], 1),
        (["fit", "@arctic-lake", "--parts", "sand,silt,clay", "--constraint", "ref:mud"], 1),
        (["fit", "@arctic-lake", "--parts", "sand,silt,clay", "--method", "newton"], 1),
    ],
)
def test_usage_exit_codes(argv, code, tmp_path, capsys):
    assert main(argv + (["--out", str(tmp_path)] if len(argv) > 1 else [])) == code


def test_data_and_numerical_exit_codes(tmp_path):
    empty = write(tmp_path / "e.csv", "")
    assert main(["fit", empty, "--parts", "a,b", "--out", str(tmp_path)]) == 2
    bad = write(tmp_path / "b.csv", "a,b,x\n1,2,1\n2,1,1\n1,1,1\n")
    assert main(["fit", bad, "--parts", "a,b", "--covariates", "x", "--out", str(tmp_path)]) == 3


SCENARIO = """N = 60
true_B = 0.5, 1; 0, -0.5; -0.5, -0.5
error_law = lognormal
sigma_diag = 0.02, 0.02, 0.02
seed = 3
replicates = 4
"""


def test_simulate_byte_identical(tmp_path):
    sc = write(tmp_path / "s.txt", SCENARIO)
    assert main(["simulate", sc, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", sc, "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("results.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(["simulate", sc, "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() != (tmp_path / "c" / "results.csv").read_bytes()
    assert len(read_csv(tmp_path / "a" / "results.csv")) == 4


def test_simulate_noiseless_recovers_truth(tmp_path):
    sc = write(tmp_path / "s.txt", SCENARIO.replace("0.02, 0.02, 0.02", "0, 0, 0"))
    assert main(["simulate", sc, "--out", str(tmp_path)]) == 0
    truth = np.array([[0.5, 1], [0, -0.5], [-0.5, -0.5]])
    truth = (truth - truth.mean(axis=0)).ravel()
    for row in read_csv(tmp_path / "results.csv"):
        est = np.array([float(v) for k, v in row.items() if k.startswith("est[")])
        np.testing.assert_allclose(est, truth, atol=1e-6)


def test_simulate_bad_scenario(tmp_path, capsys):
    sc = write(tmp_path / "s.txt", SCENARIO.replace("N = 60", "N = sixty"))
    assert main(["simulate", sc, "--out", str(tmp_path)]) == 1
    assert "'N'" in capsys.readouterr().err
