import json
import os
import subprocess
import sys

import numpy as np
import pytest

import edmd
from edmd import benchmarks, io
from edmd.cli import main
from edmd.core import EigenpairReference, SnapshotSet
from edmd.dictionaries import from_descriptor, hermite_dictionary, state_dictionary


def small_decomposition(seed=0, m=300, order=2):
    s = benchmarks.lti_generate(m, seed)
    d = hermite_dictionary(2, order)
    k = edmd.koopman_matrix(edmd.accumulate_gram(s, d))
    b = edmd.full_state_weights(d)
    dec = edmd.decompose(k, b, delta_t=None, descriptor=d.descriptor, m_count=m)
    return s, d, dec


class TestSnapshotCsv:
    def test_round_trip_is_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 40))
        x[0, 0] = 0.1
        x[1, 1] = 1e-300
        s = SnapshotSet(x, rng.standard_normal((3, 40)))
        path = tmp_path / "pairs.csv"
        io.write_snapshots(s, path)
        back = io.read_snapshots(path)
        assert np.array_equal(back.x, s.x)
        assert np.array_equal(back.y, s.y)

    def test_delta_t_passes_through(self, tmp_path):
        s = SnapshotSet(np.zeros((1, 2)), np.zeros((1, 2)))
        path = tmp_path / "p.csv"
        io.write_snapshots(s, path)
        assert io.read_snapshots(path, delta_t=0.5).delta_t == 0.5
        assert io.read_snapshots(path).delta_t is None

    def test_ragged_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,y1\n1.0,2.0\n3.0\n")
        with pytest.raises(ValueError, match="line 3"):
            io.read_snapshots(path)

    def test_non_numeric_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,y1\n1.0,2.0\n1.0,oops\n4.0,5.0\n")
        with pytest.raises(ValueError, match="line 3"):
            io.read_snapshots(path)

    def test_odd_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,x2,y1\n1,2,3\n")
        with pytest.raises(ValueError, match="header"):
            io.read_snapshots(path)

    def test_empty_and_headerless(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            io.read_snapshots(path)
        path.write_text("x1,y1\n")
        with pytest.raises(ValueError, match="no data"):
            io.read_snapshots(path)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = io.ExperimentConfig(
            system="double-well",
            system_params={"sigma": "0.5"},
            dictionary={"family": "spectral_element", "order": "9", "max_depth": "2"},
            rtol=1e-8,
            seed=11,
            m_count=250,
            delta_t=0.1,
            output_dir=str(tmp_path),
            archive_name="a.json",
            report_name="r.csv",
        )
        path = tmp_path / "exp.config"
        io.write_config(cfg, path)
        back = io.read_config(path)
        assert back == cfg

    def test_defaults(self, tmp_path):
        path = tmp_path / "min.config"
        path.write_text("[system]\nname = lti\n\n[dictionary]\nfamily = state\n")
        cfg = io.read_config(path)
        assert cfg.seed == 0
        assert cfg.m_count == 10000
        assert cfg.rtol == pytest.approx(1e-10)
        assert cfg.archive_name == "archive.json"

    def test_errors(self, tmp_path):
        with pytest.raises(ValueError, match="not readable"):
            io.read_config(tmp_path / "missing.config")
        p = tmp_path / "bad1.config"
        p.write_text("[dictionary]\nfamily = state\n")
        with pytest.raises(ValueError, match="system"):
            io.read_config(p)
        p.write_text("[system]\nname = pendulum\n[dictionary]\nfamily = state\n")
        with pytest.raises(ValueError, match="unknown system"):
            io.read_config(p)
        p.write_text("[system]\nname = lti\n[dictionary]\nfamily = wavelets\n")
        with pytest.raises(ValueError, match="family"):
            io.read_config(p)

    def test_packaged_examples_parse(self):
        base = os.path.join(os.path.dirname(io.__file__), "configs")
        for name in os.listdir(base):
            cfg = io.read_config(os.path.join(base, name))
            assert cfg.system in io.SYSTEMS


class TestArchive:
    def test_round_trip_preserves_decomposition(self, tmp_path):
        _, d, dec = small_decomposition()
        arch = io.DecompositionArchive(decomposition=dec, seed=0, system="lti")
        path = tmp_path / "arch.json"
        io.write_archive(arch, path)
        back = io.load_archive(path)
        bdec = back.decomposition
        assert np.array_equal(bdec.mu, dec.mu)
        assert np.array_equal(bdec.xi, dec.xi)
        assert np.array_equal(bdec.w, dec.w)
        assert np.array_equal(bdec.modes, dec.modes)
        assert np.array_equal(bdec.defective, dec.defective)
        assert bdec.rtol == dec.rtol
        assert bdec.m_count == dec.m_count

    def test_reloaded_eigenfunctions_match(self, tmp_path):
        s, d, dec = small_decomposition()
        path = tmp_path / "arch.json"
        io.write_archive(io.DecompositionArchive(decomposition=dec), path)
        back = io.load_archive(path).decomposition
        d2 = from_descriptor(back.descriptor)
        pts = s.x.T[:50]
        a = edmd.evaluate_eigenfunctions(dec, d, pts)
        b = edmd.evaluate_eigenfunctions(back, d2, pts)
        assert np.abs(a - b).max() <= 1e-12

    def test_schema_version_guard(self, tmp_path):
        _, _, dec = small_decomposition()
        path = tmp_path / "arch.json"
        io.write_archive(io.DecompositionArchive(decomposition=dec), path)
        doc = json.loads(path.read_text())
        doc["schema_version"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="schema_version"):
            io.load_archive(path)


class TestRunExperiment:
    def config(self, tmp_path, **over):
        cfg = io.ExperimentConfig(
            system="lti",
            dictionary={"family": "hermite", "dim": "2", "max_order": "3"},
            rtol=1e-10,
            seed=3,
            m_count=400,
            output_dir=str(tmp_path),
        )
        for k, v in over.items():
            setattr(cfg, k, v)
        return cfg

    def test_writes_archive_and_report(self, tmp_path):
        cfg = self.config(tmp_path)
        arch = io.run_experiment(cfg)
        assert (tmp_path / "archive.json").exists()
        assert (tmp_path / "report.csv").exists()
        assert arch.system == "lti"
        assert arch.config_hash
        lines = (tmp_path / "report.csv").read_text().strip().split("\n")
        assert lines[0].startswith("index,abs_mu")
        assert len(lines) == 1 + arch.decomposition.mu.size
        first = lines[1].split(",")
        assert float(first[1]) == pytest.approx(abs(arch.decomposition.mu[0]))

    def test_output_dir_env_override(self, tmp_path, monkeypatch):
        target = tmp_path / "elsewhere"
        monkeypatch.setenv("EDMD_OUTPUT_DIR", str(target))
        io.run_experiment(self.config(tmp_path))
        assert (target / "archive.json").exists()
        assert not (tmp_path / "archive.json").exists()

    def test_config_hash_is_stable(self, tmp_path):
        a = io.run_experiment(self.config(tmp_path))
        b = io.run_experiment(self.config(tmp_path))
        assert a.config_hash == b.config_hash
        assert np.array_equal(a.decomposition.mu, b.decomposition.mu)

    def test_external_file_system(self, tmp_path):
        s = benchmarks.lti_generate(200, seed=5)
        data = tmp_path / "ext.csv"
        io.write_snapshots(s, data)
        cfg = self.config(
            tmp_path,
            system="external-file",
            system_params={"path": str(data)},
            dictionary={"family": "state", "n": "2"},
        )
        arch = io.run_experiment(cfg)
        mu = arch.decomposition.mu
        assert np.allclose(np.sort_complex(mu), [0.8, 0.9], atol=1e-10)


class TestCorrelationModulus:
    def test_constants(self):
        assert io.correlation_modulus(np.ones(5), 2 * np.ones(5)) == 1.0
        assert io.correlation_modulus(np.ones(5), np.arange(5.0)) == 0.0

    def test_phase_and_scale_invariant(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        b = rng.standard_normal(50)
        base = io.correlation_modulus(a, b)
        assert io.correlation_modulus(3j * a, b) == pytest.approx(base, abs=1e-12)
        assert io.correlation_modulus(a * np.exp(0.7j), -2 * b) == pytest.approx(
            base, abs=1e-12
        )

    def test_perfect_correlation(self):
        v = np.linspace(0, 1, 20)
        assert io.correlation_modulus(v, 5 - 2 * v) == pytest.approx(1.0)


class TestCompareToOracle:
    def test_matches_known_eigenpairs(self, tmp_path):
        _, d, dec = small_decomposition(m=2000)
        refs = []
        for i, j in ((1, 0), (0, 1)):
            mu, phi = benchmarks.lti_true_eigen(i, j)
            pts = np.random.default_rng(2).uniform(-2, 2, size=(200, 2))
            refs.append(EigenpairReference(mu, phi, pts, continuous=False))
        out = tmp_path / "cmp.csv"
        rows = io.compare_to_oracle(dec, refs, d, out_path=out)
        for row in rows:
            assert row.rel_err <= 1e-8
            assert row.corr_modulus >= 1 - 1e-10
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 3
        assert lines[0].startswith("ref_re")

    def test_continuous_reference_needs_delta_t(self):
        _, d, dec = small_decomposition()
        ref = EigenpairReference(
            -1.0 + 0j, lambda p: p[:, 0], np.zeros((4, 2)), continuous=True
        )
        with pytest.raises(ValueError, match="delta_t"):
            io.compare_to_oracle(dec, [ref], d)

    def test_uses_archive_descriptor(self, tmp_path):
        _, _, dec = small_decomposition()
        arch = io.DecompositionArchive(decomposition=dec)
        mu, phi = benchmarks.lti_true_eigen(1, 0)
        pts = np.random.default_rng(3).uniform(-2, 2, size=(100, 2))
        rows = io.compare_to_oracle(
            arch, [EigenpairReference(mu, phi, pts, continuous=False)]
        )
        assert rows[0].rel_err <= 1e-8


class TestEvalGrid:
    def test_values_and_csv(self, tmp_path):
        s, d, dec = small_decomposition()
        pts = s.x.T[:30]
        out = tmp_path / "grid.csv"
        vals = io.eval_grid(dec, d, pts, [0, 2], out_path=out)
        assert vals.shape == (30, 2)
        assert np.abs(vals).max() <= 1.0 + 1e-12
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "x1,x2,phi0_re,phi0_im,phi2_re,phi2_im"
        assert len(lines) == 31
        row = [float(t) for t in lines[1].split(",")]
        assert row[2] == pytest.approx(vals[0, 0].real)


def run_cli(argv):
    return main([str(a) for a in argv])


class TestCliGen:
    def test_lti(self, tmp_path, capsys):
        out = tmp_path / "lti.csv"
        assert run_cli(["gen", "--system", "lti", "--m", "50", "--out", out]) == 0
        s = io.read_snapshots(out)
        assert s.m == 50 and s.n == 2
        assert "wrote" in capsys.readouterr().out

    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run_cli(["gen", "--system", "lti", "--m", "30", "--seed", "9", "--out", a])
        run_cli(["gen", "--system", "lti", "--m", "30", "--seed", "9", "--out", b])
        assert a.read_bytes() == b.read_bytes()

    def test_double_well_requires_sigma(self, tmp_path, capsys):
        code = run_cli(
            ["gen", "--system", "double-well", "--m", "10", "--out", tmp_path / "x.csv"]
        )
        assert code == 2
        assert "sigma" in capsys.readouterr().err

    def test_swiss_roll_writes_both(self, tmp_path):
        out = tmp_path / "roll.csv"
        out_true = tmp_path / "true.csv"
        code = run_cli(
            ["gen", "--system", "swiss-roll", "--m", "40",
             "--out", out, "--out-true", out_true]
        )
        assert code == 0
        s3d = io.read_snapshots(out)
        s_true = io.read_snapshots(out_true)
        assert s3d.n == 3 and s_true.n == 2
        assert np.array_equal(s3d.x[1], s_true.x[1])


class TestCliFitEvalModes:
    @pytest.fixture()
    def fitted(self, tmp_path):
        cfg = io.ExperimentConfig(
            system="lti",
            dictionary={"family": "hermite", "dim": "2", "max_order": "3"},
            seed=1,
            m_count=300,
            output_dir=str(tmp_path),
        )
        path = tmp_path / "exp.config"
        io.write_config(cfg, path)
        assert run_cli(["fit", "--config", path]) == 0
        return tmp_path

    def test_fit_outputs(self, fitted, capsys):
        assert (fitted / "archive.json").exists()
        assert (fitted / "report.csv").exists()

    def test_eval_grid_from_archive(self, fitted):
        out = fitted / "phi.csv"
        code = run_cli(
            ["eval", "--archive", fitted / "archive.json",
             "--grid=-2:2:5,-2:2:5", "--indices", "0,1", "--out", out]
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 26
        assert lines[0] == "x1,x2,phi0_re,phi0_im,phi1_re,phi1_im"

    def test_eval_rejects_bad_index(self, fitted, capsys):
        code = run_cli(
            ["eval", "--archive", fitted / "archive.json",
             "--grid", "0:1:2", "--indices", "99", "--out", fitted / "no.csv"]
        )
        assert code == 2
        assert "out of range" in capsys.readouterr().err

    def test_modes_dump(self, fitted):
        out = fitted / "modes.csv"
        assert run_cli(["modes", "--archive", fitted / "archive.json", "--out", out]) == 0
        lines = out.read_text().strip().split("\n")
        arch = io.load_archive(fitted / "archive.json")
        assert len(lines) == 1 + arch.decomposition.mu.size

    def test_compare_lti(self, fitted, capsys):
        out = fitted / "cmp.csv"
        code = run_cli(
            ["compare", "--archive", fitted / "archive.json", "--oracle", "lti",
             "--indices", "1,0;0,1", "--out", out]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "rel_err" in text
        assert out.exists()


class TestCliDmd:
    def test_dmd_on_csv(self, tmp_path):
        s = benchmarks.lti_generate(200, seed=2)
        data = tmp_path / "pairs.csv"
        io.write_snapshots(s, data)
        out = tmp_path / "dmd.csv"
        code = run_cli(["dmd", "--data", data, "--delta-t", "0.5", "--out", out])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0].split(",")[:5] == ["index", "mu_re", "mu_im",
                                           "lambda_re", "lambda_im"]
        assert len(lines) == 3
        mus = sorted(float(l.split(",")[1]) for l in lines[1:])
        assert mus == pytest.approx([0.8, 0.9], abs=1e-10)

    def test_degenerate_data_is_numerical_failure(self, tmp_path, capsys):
        data = tmp_path / "zeros.csv"
        data.write_text("x1,y1\n0,0\n0,0\n")
        code = run_cli(["dmd", "--data", data, "--out", tmp_path / "out.csv"])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestCliConverge:
    def test_small_study(self, tmp_path, capsys):
        out = tmp_path / "conv.csv"
        code = run_cli(
            ["converge", "--sigma", "1.0", "--m-values", "250,1000,4000",
             "--seeds", "0", "--order", "3", "--fd-n", "128", "--out", out]
        )
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "m,eigenvalue_error,eigenfunction_error"
        assert len(lines) == 4
        assert "slope" in capsys.readouterr().out


class TestCliAppendixCheck:
    def test_stdout_table(self, capsys):
        assert run_cli(["appendix-check"]) == 0
        text = capsys.readouterr().out
        assert "rank_g,15" in text
        assert "matrix_size,65" in text
        assert "eigenvalue_0," in text

    def test_written_table(self, tmp_path):
        out = tmp_path / "appendix.csv"
        assert run_cli(["appendix-check", "--k-param", "8", "--out", out]) == 0
        text = out.read_text()
        assert "rank_g,15" in text
        assert "index_span_rank,16" in text


class TestCliEntryPoint:
    def test_console_script_runs(self, tmp_path):
        res = subprocess.run(
            ["edmd", "gen", "--system", "lti", "--m", "10",
             "--out", str(tmp_path / "x.csv")],
            capture_output=True,
            text=True,
        )
        assert res.returncode == 0, res.stderr

    def test_missing_subcommand_exits_2(self):
        res = subprocess.run(["edmd"], capture_output=True, text=True)
        assert res.returncode == 2


class TestBackendParity:
    def test_fit_agrees_without_numba(self, tmp_path):
        cfg = io.ExperimentConfig(
            system="duffing",
            system_params={"n_traj": "100", "samples_per_traj": "3"},
            dictionary={"family": "thin_plate_rbf", "kmeans_k": "15"},
            seed=4,
            delta_t=0.25,
            output_dir=str(tmp_path),
        )
        io.write_config(cfg, tmp_path / "exp.config")
        mus = {}
        for flag in ("0", "1"):
            env = dict(
                os.environ,
                EDMD_NO_NUMBA=flag,
                EDMD_OUTPUT_DIR=str(tmp_path / f"run{flag}"),
            )
            res = subprocess.run(
                [sys.executable, "-m", "edmd.cli", "fit", "--config",
                 str(tmp_path / "exp.config")],
                capture_output=True,
                text=True,
                env=env,
            )
            assert res.returncode == 0, res.stderr
            arch = io.load_archive(tmp_path / f"run{flag}" / "archive.json")
            mus[flag] = arch.decomposition.mu
        assert np.abs(mus["0"] - mus["1"]).max() <= 1e-9
