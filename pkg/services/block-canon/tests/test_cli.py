"""Tests for the command-line surface: each subcommand through main(argv)."""

import io
import json
import time

import numpy as np
import pandas as pd
import pytest

from block_canon.cli import main
from block_canon.formats import read_matrix
from block_canon.panel import GroupMap, ReturnsPanel


def equicorrelation(n: int, rho: float) -> np.ndarray:
    return (1.0 - rho) * np.eye(n) + rho * np.ones((n, n))


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def write_panel(directory, X, labels: dict[str, str]):
    X = np.asarray(X, dtype=float)
    returns, groups = directory / "returns.csv", directory / "groups.csv"
    ReturnsPanel(tuple(labels), tuple(f"d{t:04d}" for t in range(X.shape[0])), X).to_csv(returns)
    GroupMap(labels).to_csv(groups)
    return returns, groups


@pytest.fixture
def sim_dir(tmp_path):
    out = tmp_path / "sim"
    code = main(
        ["simulate", "--branching", "2,2", "--leaf-size", "3", "--weights", "0.2,0.3", "--N", "300",
         "--seed", "4", "--out-dir", str(out)]
    )
    assert code == 0
    return out


# ── simulate / estimate / select ─────────────────────────────


class TestSimulate:
    def test_writes_files(self, sim_dir):
        assert {p.name for p in sim_dir.iterdir()} == {"returns.csv", "groups.csv", "truth.json"}
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert truth["sizes"] == [6, 6]
        assert truth["level"] == 1
        assert ReturnsPanel.from_csv(sim_dir / "returns.csv").X.shape == (300, 12)

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BLOCK_CANON_SEED", "9")
        args = ["simulate", "--branching", "2", "--leaf-size", "2", "--N", "5"]
        assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
        assert main(args + ["--seed", "9", "--out-dir", str(tmp_path / "b")]) == 0
        assert (tmp_path / "a" / "returns.csv").read_text() == (tmp_path / "b" / "returns.csv").read_text()


class TestEstimate:
    def test_json_record(self, sim_dir, tmp_path, capsys):
        heatmap = tmp_path / "heat.csv"
        code = main(
            ["estimate", "--returns", str(sim_dir / "returns.csv"), "--groups", str(sim_dir / "groups.csv"),
             "--level", "1", "--emit-heatmap", str(heatmap)]
        )
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["K"] == 2
        assert record["sizes"] == [6, 6]
        assert record["block_labels"] == ["01", "02"]
        assert record["validity"]["status"] == "valid"
        assert record["invalid_estimate"] is False
        assert np.isfinite(record["neg2_loglik_per_obs"])
        frame = pd.read_csv(heatmap, index_col=0)
        assert frame.shape == (12, 12)
        np.testing.assert_allclose(np.diag(frame.to_numpy()), 1.0)

    def test_unmapped_asset(self, sim_dir, tmp_path):
        groups = tmp_path / "groups.csv"
        GroupMap({"A00000": "01"}).to_csv(groups)
        code = main(["estimate", "--returns", str(sim_dir / "returns.csv"), "--groups", str(groups)])
        assert code == 2

    def test_zero_variance(self, tmp_path):
        returns = tmp_path / "returns.csv"
        ReturnsPanel(("A", "B"), ("d1", "d2", "d3"), [[0.1, 0.0], [0.2, 0.0], [-0.1, 0.0]]).to_csv(returns)
        groups = tmp_path / "groups.csv"
        GroupMap({"A": "1", "B": "1"}).to_csv(groups)
        assert main(["estimate", "--returns", str(returns), "--groups", str(groups)]) == 3

    def test_missing_returns(self, tmp_path):
        groups = tmp_path / "groups.csv"
        GroupMap({"A": "1"}).to_csv(groups)
        assert main(["estimate", "--returns", str(tmp_path / "none.csv"), "--groups", str(groups)]) == 2

    def test_single_asset(self, tmp_path, capsys):
        X = np.random.default_rng(2).normal(0.0, 0.02, size=(50, 1))
        returns, groups = write_panel(tmp_path, X, {"A": "1"})
        assert main(["estimate", "--returns", str(returns), "--groups", str(groups)]) == 0
        record = json.loads(capsys.readouterr().out)
        assert record["K"] == 1
        assert record["sizes"] == [1]
        assert record["rho"] == [[0.0]]
        assert record["lambda_tilde"] == [None]
        assert record["variances"] == [pytest.approx(np.mean(X**2))]
        assert record["invalid_estimate"] is False

    def test_one_group_is_average_pairwise_correlation(self, sim_dir, capsys):
        code = main(["estimate", "--returns", str(sim_dir / "returns.csv"), "--groups", str(sim_dir / "groups.csv"),
                     "--level", "0"])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record["K"] == 1
        X = ReturnsPanel.from_csv(sim_dir / "returns.csv").X
        Z = X / np.sqrt(np.mean(X**2, axis=0))
        R = Z.T @ Z / X.shape[0]
        n = X.shape[1]
        pairwise = R[np.triu_indices(n, 1)].mean()
        assert record["rho"][0][0] == pytest.approx(pairwise, abs=1e-12)
        assert record["rho"][0][0] == pytest.approx((record["a_tilde"][0][0] - 1.0) / (n - 1), abs=1e-12)

    def test_output_is_reproducible(self, sim_dir, tmp_path):
        first, second = tmp_path / "first.json", tmp_path / "second.json"
        for out in (first, second):
            assert main(["estimate", "--returns", str(sim_dir / "returns.csv"),
                         "--groups", str(sim_dir / "groups.csv"), "--out", str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()

    @pytest.mark.slow
    def test_thousands_of_assets(self, tmp_path):
        rng = np.random.default_rng(14)
        n, K, N = 3958, 151, 253
        blocks = np.array_split(np.arange(n), K)
        labels = {f"A{i:04d}": f"{k:03d}" for k, block in enumerate(blocks) for i in block}
        X = 0.01 * (rng.standard_normal((N, n)) + 0.5 * rng.standard_normal((N, 1)))
        returns, groups = write_panel(tmp_path, X, labels)
        out = tmp_path / "estimate.json"

        start = time.perf_counter()
        code = main(["estimate", "--returns", str(returns), "--groups", str(groups), "--out", str(out)])
        elapsed = time.perf_counter() - start
        assert code == 0
        assert elapsed < 10.0
        record = json.loads(out.read_text())
        assert record["K"] == K
        assert len(record["asset_order"]) == n
        assert record["invalid_estimate"] is (record["validity"]["status"] != "valid")


class TestSelect:
    def test_csv_table(self, sim_dir, capsys):
        code = main(["select", "--returns", str(sim_dir / "returns.csv"), "--groups", str(sim_dir / "groups.csv"),
                     "--with-aic"])
        assert code == 0
        table = pd.read_csv(io.StringIO(capsys.readouterr().out), index_col=0)
        assert [label.rstrip("*") for label in table.index] == ["level 0", "level 1", "level 2"]
        assert sum(label.endswith("*") for label in table.index) == 1
        assert "AIC/(nN)" in table.columns
        assert list(table["K"]) == [1, 2, 4]

    def test_json_format(self, sim_dir, tmp_path):
        out = tmp_path / "select.json"
        code = main(["select", "--returns", str(sim_dir / "returns.csv"), "--groups", str(sim_dir / "groups.csv"),
                     "--levels", "0,1", "--format", "json", "--unweighted", "--out", str(out)])
        assert code == 0
        rows = json.loads(out.read_text())
        assert [row["K"] for row in rows] == [1, 2]
        assert rows[0]["model"].startswith("level 0")

    def test_one_level_rejected(self, sim_dir):
        code = main(["select", "--returns", str(sim_dir / "returns.csv"), "--groups", str(sim_dir / "groups.csv"),
                     "--levels", "1"])
        assert code == 2

    def test_aic_picks_at_least_as_many_blocks(self, sim_dir, capsys):
        code = main(["select", "--returns", str(sim_dir / "returns.csv"), "--groups", str(sim_dir / "groups.csv"),
                     "--with-aic"])
        assert code == 0
        table = pd.read_csv(io.StringIO(capsys.readouterr().out), index_col=0)
        starred = next(label for label in table.index if label.endswith("*"))
        assert table.loc[table["AIC/(nN)"].idxmin(), "K"] >= table.loc[starred, "K"]

    def test_more_blocks_than_dates(self, tmp_path, capsys):
        X = np.random.default_rng(5).normal(0.0, 0.02, size=(5, 8))
        returns, groups = write_panel(tmp_path, X, {f"A{i}": str(i) for i in range(8)})
        assert main(["select", "--returns", str(returns), "--groups", str(groups)]) == 0
        table = pd.read_csv(io.StringIO(capsys.readouterr().out), index_col=0)
        assert table.index[0] == "level 0*"
        assert table.index[1].startswith("level 1 (")
        assert np.isnan(table.loc[table.index[1], "BIC/(nN)"])
        assert list(table["K"]) == [1, 8]

    def test_duplicated_series_flagged_in_json(self, tmp_path):
        rng = np.random.default_rng(8)
        X = 0.01 * (0.5 * rng.standard_normal((400, 1)) + rng.standard_normal((400, 6)))
        X[:, 1] = X[:, 0]
        labels = {"a": "1.1", "b": "1.1", "c": "1.2", "d": "1.2", "e": "2.1", "f": "2.1"}
        returns, groups = write_panel(tmp_path, X, labels)
        out = tmp_path / "select.json"
        code = main(["select", "--returns", str(returns), "--groups", str(groups), "--format", "json",
                     "--out", str(out)])
        assert code == 0
        rows = json.loads(out.read_text())
        assert rows[2]["model"] == "level 2 (semidefinite_boundary)"
        assert rows[2]["BIC/(nN)"] is None
        assert rows[2]["−2ℓ/(nN)"] is None
        assert sum("*" in row["model"] for row in rows) == 1

    def test_output_is_reproducible(self, sim_dir, tmp_path):
        outputs = []
        for name in ("first.csv", "second.csv"):
            out = tmp_path / name
            assert main(["select", "--returns", str(sim_dir / "returns.csv"),
                         "--groups", str(sim_dir / "groups.csv"), "--with-aic", "--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


# ── transform ────────────────────────────────────────────────


class TestTransform:
    def test_det_of_equicorrelation(self, tmp_path, capsys):
        path = tmp_path / "m.csv"
        np.savetxt(path, equicorrelation(3, 0.5), delimiter=",")
        assert main(["transform", str(path), "--op", "det"]) == 0
        result = json.loads(capsys.readouterr().out)
        assert result["det"] == pytest.approx(0.5)
        assert result["sign"] == 1

    def test_log_of_identity(self, tmp_path, capsys):
        path = tmp_path / "m.csv"
        np.savetxt(path, np.eye(4), delimiter=",")
        assert main(["transform", str(path), "--op", "log", "--sizes", "2,2"]) == 0
        out = np.loadtxt(io.StringIO(capsys.readouterr().out), delimiter=",")
        np.testing.assert_allclose(out, np.zeros((4, 4)), atol=1e-14)

    def test_inverse_twice(self, tmp_path):
        src = write_json(tmp_path / "b.json", {"sizes": [3, 2], "d": [2.0, 3.0], "b": [[0.4, -0.2], [-0.2, 0.9]]})
        once, twice = tmp_path / "inv.json", tmp_path / "inv2.json"
        assert main(["transform", str(src), "--op", "inv", "--out", str(once)]) == 0
        assert main(["transform", str(once), "--op", "inv", "--out", str(twice)]) == 0
        back = json.loads(twice.read_text())
        np.testing.assert_allclose(back["d"], [2.0, 3.0], atol=1e-12)
        np.testing.assert_allclose(back["b"], [[0.4, -0.2], [-0.2, 0.9]], atol=1e-12)

    def test_power_to_binary(self, tmp_path):
        src = tmp_path / "m.csv"
        np.savetxt(src, equicorrelation(4, 0.25), delimiter=",")
        out = tmp_path / "m2.bin"
        assert main(["transform", str(src), "--op", "pow:2", "--out", str(out)]) == 0
        M = equicorrelation(4, 0.25)
        np.testing.assert_allclose(read_matrix(out), M @ M, atol=1e-12)

    def test_singular_inverse(self, tmp_path):
        src = write_json(tmp_path / "b.json", {"sizes": [2], "d": [1.0], "b": [[1.0]]})
        assert main(["transform", str(src), "--op", "inv"]) == 5

    def test_log_not_positive_definite(self, tmp_path):
        src = write_json(tmp_path / "b.json", {"sizes": [2], "d": [1.0], "b": [[2.0]]})
        assert main(["transform", str(src), "--op", "log"]) == 6

    def test_not_block_structured(self, tmp_path):
        path = tmp_path / "m.csv"
        np.savetxt(path, [[1.0, 0.2, 0.3], [0.2, 1.0, 0.1], [0.3, 0.1, 1.0]], delimiter=",")
        assert main(["transform", str(path), "--op", "inv", "--sizes", "3"]) == 4

    def test_unknown_op(self, tmp_path):
        src = write_json(tmp_path / "b.json", {"sizes": [2], "d": [1.0], "b": [[0.0]]})
        assert main(["transform", str(src), "--op", "sqrt"]) == 2


# ── validate ─────────────────────────────────────────────────


class TestValidate:
    def test_valid(self, tmp_path, capsys):
        src = write_json(tmp_path / "c.json", {"sizes": [3, 2], "rho": [[0.5, 0.2], [0.2, 0.3]]})
        assert main(["validate", str(src)]) == 0
        assert json.loads(capsys.readouterr().out)["status"] == "valid"

    def test_boundary(self, tmp_path, capsys):
        src = write_json(tmp_path / "c.json", {"sizes": [3], "rho": [[-0.5]]})
        assert main(["validate", str(src)]) == 1
        assert json.loads(capsys.readouterr().out)["status"] == "semidefinite_boundary"

    def test_invalid(self, tmp_path, capsys):
        rho = np.full((3, 3), 0.9)
        np.fill_diagonal(rho, 0.1)
        src = write_json(tmp_path / "c.json", {"sizes": [2, 2, 2], "rho": rho.tolist()})
        assert main(["validate", str(src)]) == 4
        report = json.loads(capsys.readouterr().out)
        assert report["status"] == "invalid"
        assert report["min_eig_A"] == pytest.approx(-0.7)

    def test_not_a_correlation(self, tmp_path):
        src = write_json(tmp_path / "c.json", {"sizes": [2], "d": [2.0], "b": [[0.5]]})
        assert main(["validate", str(src)]) == 4


class TestParser:
    def test_bad_list_argument(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            main(["simulate", "--branching", "a,b", "--out-dir", str(tmp_path)])
        assert info.value.code == 2

    def test_bench_csv(self, capsys):
        assert main(["bench", "--n", "8", "--K", "2", "--reps", "1"]) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(frame["op"]) == ["det", "inv", "loglik"]

    def test_bench_all_singletons_no_advantage(self, capsys):
        assert main(["bench", "--n", "300", "--K", "300", "--reps", "3"]) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        ratio = frame["dense_s"] / frame["canonical_s"]
        assert ratio.between(0.1, 10.0).all(), frame.to_string()
