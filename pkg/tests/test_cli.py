"""End-to-end checks of the command line surface and file formats."""

import json
from pathlib import Path

import numpy as np
import pytest

from clbm.cli import (ParseError, RunConfig, VOTING_MAPPING, ingest, main,
                      parse_mapping, read_labels, read_trace, write_matrix,
                      write_labels)
from clbm.model import DataMatrix


class TestMapping:
    def test_parse_mapping(self):
        assert parse_mapping("y=1,n=0,?=0") == {"y": 1.0, "n": 0.0, "?": 0.0}

    def test_parse_mapping_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_mapping("yn0")
        with pytest.raises(ValueError):
            parse_mapping("")


class TestIngest:
    def test_voting_tokens(self, tmp_path):
        p = tmp_path / "votes.csv"
        p.write_text("y,n,y\nn,?,absent\n")
        data = ingest(p, "bernoulli", dict(VOTING_MAPPING))
        assert data.values.tolist() == [[1, 0, 1], [0, 0, 0]]

    def test_continuous_values_parse_unchanged(self, tmp_path):
        p = tmp_path / "expr.csv"
        p.write_text("# header comment\n-6.0,7.0\n0.25,-1.5\n")
        data = ingest(p, "gaussian")
        assert data.values.tolist() == [[-6.0, 7.0], [0.25, -1.5]]

    def test_tab_and_whitespace_sniffing(self, tmp_path):
        p = tmp_path / "m.tsv"
        p.write_text("1\t0\n0\t1\n")
        assert ingest(p, "bernoulli").values.tolist() == [[1, 0], [0, 1]]
        q = tmp_path / "m.txt"
        q.write_text("1 0\n0 1\n")
        assert ingest(q, "bernoulli").values.tolist() == [[1, 0], [0, 1]]

    def test_empty_file_is_an_error(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("# only a comment\n")
        with pytest.raises(ParseError):
            ingest(p, "bernoulli")

    def test_ragged_row_reports_coordinates(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("1,0,1\n1,0\n")
        with pytest.raises(ParseError) as exc:
            ingest(p, "bernoulli")
        assert exc.value.row == 2

    def test_unmapped_token_reports_coordinates(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("y,n\ny,maybe\n")
        with pytest.raises(ParseError) as exc:
            ingest(p, "bernoulli", dict(VOTING_MAPPING))
        assert (exc.value.row, exc.value.col) == (2, 2)

    def test_non_numeric_continuous_cell(self, tmp_path):
        p = tmp_path / "bad2.csv"
        p.write_text("1.5,2.5\n1.0,abc\n")
        with pytest.raises(ParseError) as exc:
            ingest(p, "gaussian")
        assert (exc.value.row, exc.value.col) == (2, 2)

    def test_binary_cell_out_of_range(self, tmp_path):
        p = tmp_path / "bad3.csv"
        p.write_text("1,0\n1,2\n")
        with pytest.raises(ParseError) as exc:
            ingest(p, "bernoulli")
        assert (exc.value.row, exc.value.col) == (2, 2)


class TestRunConfig:
    def test_round_trip(self):
        cfg = RunConfig(input_path="a.csv", variant="bernoulli", out_dir="o",
                        mapping={"y": 1.0}, iterations=100, burn_in=10, seed=3)
        assert RunConfig.from_dict(cfg.to_dict()) == cfg
        assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_digest_changes_with_config(self):
        a = RunConfig(input_path="a", variant="bernoulli", out_dir="o", seed=1)
        b = RunConfig(input_path="a", variant="bernoulli", out_dir="o", seed=2)
        assert a.digest() != b.digest()
        assert a.digest() == RunConfig.from_dict(a.to_dict()).digest()


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    main(["simulate", "--rows", "24", "--cols", "16", "--row-clusters", "2",
          "--col-clusters", "2", "--seed", "5", "--out", str(out)])
    return out


class TestSimulateCommand:
    def test_artifacts_exist(self, sim_dir):
        for name in ("matrix.csv", "truth_rows.txt", "truth_cols.txt",
                     "theta.csv", "simspec.json"):
            assert (sim_dir / name).exists()

    def test_matrix_reingests(self, sim_dir):
        data = ingest(sim_dir / "matrix.csv", "bernoulli")
        assert (data.n, data.m) == (24, 16)

    def test_deterministic(self, tmp_path, sim_dir):
        out2 = tmp_path / "sim2"
        main(["simulate", "--rows", "24", "--cols", "16", "--row-clusters", "2",
              "--col-clusters", "2", "--seed", "5", "--out", str(out2)])
        assert (out2 / "matrix.csv").read_bytes() == (sim_dir / "matrix.csv").read_bytes()


@pytest.fixture(scope="module")
def run_dir(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    main(["run", "--input", str(sim_dir / "matrix.csv"), "--variant", "bernoulli",
          "--iterations", "400", "--burn-in", "100", "--thin", "2", "--seed", "9",
          "--out", str(out)])
    return out


class TestRunCommand:
    def test_artifact_set(self, run_dir):
        for name in ("config.json", "trace.csv", "pmp.csv", "pmp_nonempty.csv",
                     "iat.txt", "modal_rows.csv", "modal_cols.csv", "map.csv",
                     "acceptance.csv"):
            assert (run_dir / name).exists(), name

    def test_trace_round_trip_and_verification(self, sim_dir, run_dir):
        data = ingest(sim_dir / "matrix.csv", "bernoulli")
        trace = read_trace(run_dir / "trace.csv", data=data)
        assert trace.n_samples == 150
        assert trace.n == 24 and trace.m == 16

    def test_trace_verification_catches_corruption(self, sim_dir, run_dir, tmp_path):
        text = (run_dir / "trace.csv").read_text().splitlines()
        body = [i for i, line in enumerate(text) if not line.startswith("#")]
        parts = text[body[0]].split(",")
        parts[6] = repr(float(parts[6]) + 5.0)
        text[body[0]] = ",".join(parts)
        bad = tmp_path / "bad_trace.csv"
        bad.write_text("\n".join(text) + "\n")
        data = ingest(sim_dir / "matrix.csv", "bernoulli")
        with pytest.raises(ParseError):
            read_trace(bad, data=data)

    def test_rerun_with_same_flags_is_byte_identical(self, sim_dir, run_dir, tmp_path):
        out2 = tmp_path / "rerun"
        main(["run", "--input", str(sim_dir / "matrix.csv"), "--variant", "bernoulli",
              "--iterations", "400", "--burn-in", "100", "--thin", "2", "--seed", "9",
              "--out", str(out2)])
        for name in ("trace.csv", "pmp.csv", "modal_rows.csv", "map.csv"):
            assert (out2 / name).read_bytes() == (run_dir / name).read_bytes(), name

    def test_rerun_from_emitted_config_is_byte_identical(self, run_dir, tmp_path):
        out2 = tmp_path / "from_config"
        main(["run", "--config", str(run_dir / "config.json"), "--out", str(out2)])
        assert (out2 / "trace.csv").read_bytes() == (run_dir / "trace.csv").read_bytes()

    def test_out_dir_from_environment(self, sim_dir, tmp_path, monkeypatch):
        envout = tmp_path / "envout"
        monkeypatch.setenv("CLBM_OUT_DIR", str(envout))
        main(["run", "--input", str(sim_dir / "matrix.csv"), "--variant", "bernoulli",
              "--iterations", "60", "--burn-in", "10", "--seed", "1"])
        assert (envout / "trace.csv").exists()


class TestEvaluateCommand:
    def test_recovers_noiseless_partition(self, tmp_path, capsys):
        # hand-built noiseless blocks; a modest run must nail the partition
        y = np.zeros((20, 12))
        y[:10, :6] = 1.0
        y[10:, 6:] = 1.0
        rng = np.random.default_rng(2)
        rp, cp = rng.permutation(20), rng.permutation(12)
        data = DataMatrix(y[np.ix_(rp, cp)], "bernoulli")
        write_matrix(tmp_path / "matrix.csv", data)
        truth_rows = (np.arange(20) >= 10).astype(int)[rp]
        truth_cols = (np.arange(12) >= 6).astype(int)[cp]
        write_labels(tmp_path / "truth_rows.txt", truth_rows)
        write_labels(tmp_path / "truth_cols.txt", truth_cols)
        out = tmp_path / "run"
        main(["run", "--input", str(tmp_path / "matrix.csv"), "--variant", "bernoulli",
              "--iterations", "600", "--burn-in", "200", "--seed", "4",
              "--out", str(out)])
        capsys.readouterr()
        # modal hard assignments are embedded in modal_rows.csv; extract them
        hard = []
        for line in (out / "modal_rows.csv").read_text().splitlines():
            if line.startswith("#"):
                continue
            hard.append(int(line.split(",")[-1]))
        write_labels(tmp_path / "pred_rows.txt", np.asarray(hard) - 1)
        main(["evaluate", "--true-rows", str(tmp_path / "truth_rows.txt"),
              "--pred-rows", str(tmp_path / "pred_rows.txt")])
        printed = capsys.readouterr().out
        assert "ari_rows=1.000000" in printed


class TestBem2Command:
    def test_fit_and_report(self, sim_dir, tmp_path, capsys):
        out = tmp_path / "bem2"
        main(["bem2", "--input", str(sim_dir / "matrix.csv"), "--variant", "bernoulli",
              "--k", "2", "--g", "2", "--seed", "0", "--restarts", "3",
              "--out", str(out)])
        assert (out / "bem2_rows.txt").exists()
        report = (out / "bem2_report.txt").read_text()
        assert "aic3," in report and "criterion," in report
        labels = read_labels(out / "bem2_rows.txt")
        assert labels.shape == (24,)


class TestSummarizeCommand:
    def test_single_trace(self, run_dir, tmp_path):
        out = tmp_path / "sum"
        main(["summarize", "--trace", str(run_dir / "trace.csv"), "--out", str(out)])
        assert (out / "pmp.csv").exists()
        assert (out / "map.csv").read_bytes() == (run_dir / "map.csv").read_bytes()

    def test_pooled_traces(self, sim_dir, run_dir, tmp_path):
        out2 = tmp_path / "chain2"
        main(["run", "--input", str(sim_dir / "matrix.csv"), "--variant", "bernoulli",
              "--iterations", "400", "--burn-in", "100", "--thin", "2", "--seed", "10",
              "--out", str(out2)])
        pooled = tmp_path / "pooled"
        main(["summarize", "--trace", str(run_dir / "trace.csv"),
              str(out2 / "trace.csv"), "--out", str(pooled)])
        assert (pooled / "pmp.csv").exists()
        assert (pooled / "iat_per_chain.txt").exists()


class TestMultiSeedRun:
    def test_seed_subdirectories(self, sim_dir, tmp_path):
        out = tmp_path / "multi"
        main(["run", "--input", str(sim_dir / "matrix.csv"), "--variant", "bernoulli",
              "--iterations", "120", "--burn-in", "20", "--seed", "0",
              "--seeds", "3,4", "--out", str(out)])
        assert (out / "chain-3" / "trace.csv").exists()
        assert (out / "chain-4" / "trace.csv").exists()
        t3 = read_trace(out / "chain-3" / "trace.csv")
        assert t3.config.seed == 3


class TestPartialOutputManifest:
    def test_write_failure_leaves_manifest(self, sim_dir, tmp_path, monkeypatch):
        import clbm.cli as cli_mod

        def boom(*args, **kwargs):
            raise OSError("disk full")

        monkeypatch.setattr(cli_mod, "write_map", boom)
        out = tmp_path / "failing"
        with pytest.raises(OSError):
            main(["run", "--input", str(sim_dir / "matrix.csv"), "--variant",
                  "bernoulli", "--iterations", "80", "--burn-in", "20",
                  "--seed", "1", "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert "disk full" in manifest["error"]
        assert "trace.csv" in manifest["written"]
        assert "map.csv" not in manifest["written"]


class TestVotingSplitter:
    def test_script_splits_party_column(self, tmp_path):
        import importlib.util
        script = Path(__file__).resolve().parent.parent / "scripts" / "voting_study.py"
        spec = importlib.util.spec_from_file_location("voting_study", script)
        mod = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(mod)
        raw = tmp_path / "raw.data"
        raw.write_text("democrat,y,n,?\nrepublican,n,y,y\n")
        matrix, ann = mod.split_raw_file(raw, tmp_path)
        data = ingest(matrix, "bernoulli", dict(VOTING_MAPPING))
        assert data.values.tolist() == [[1, 0, 0], [0, 1, 1]]
        assert ann.read_text().splitlines() == ["democrat", "republican"]


class TestCrosstab:
    def test_party_style_crosstab(self, tmp_path):
        rng = np.random.default_rng(6)
        y = np.zeros((16, 10))
        y[:8] = 1.0
        data = DataMatrix(y, "bernoulli")
        write_matrix(tmp_path / "matrix.csv", data)
        ann = ["left"] * 8 + ["right"] * 8
        (tmp_path / "ann.txt").write_text("\n".join(ann) + "\n")
        out = tmp_path / "run"
        main(["run", "--input", str(tmp_path / "matrix.csv"), "--variant", "bernoulli",
              "--iterations", "300", "--burn-in", "100", "--seed", "2",
              "--annotations", str(tmp_path / "ann.txt"), "--out", str(out)])
        lines = [l for l in (out / "crosstab.csv").read_text().splitlines()
                 if not l.startswith("#")]
        # two pure clusters of eight
        counts = sorted(tuple(int(x) for x in l.split(",")[2:]) for l in lines)
        assert (0, 8) in counts and (8, 0) in counts
