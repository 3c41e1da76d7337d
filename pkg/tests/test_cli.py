import numpy as np
import pandas as pd
import pytest

from thalaparc.cli import main
from thalaparc.labels import NUCLEI


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    return code


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = main(
        [
            "synth", "--subjects", "6", "--voxels", "80", "--separation", "9",
            "--overlap", "0.05", "--seed", "3", "-o", str(out),
        ]
    )
    assert code == 0
    return out


FAST = ["--epochs", "40", "--deterministic", "--groups", "base,coord,multiti"]


class TestSynth:
    def test_writes_dataset_and_config(self, synth_dir):
        assert (synth_dir / "dataset.tsv").exists()
        assert "seed=3" in (synth_dir / "config.txt").read_text()
        df = pd.read_csv(synth_dir / "dataset.tsv", sep="\t")
        assert len(df) == 480


class TestFitClassifyPlot:
    @pytest.fixture(scope="class")
    def model_dir(self, synth_dir, tmp_path_factory):
        out = tmp_path_factory.mktemp("model")
        code = main(
            ["fit", "--data", str(synth_dir / "dataset.tsv"), "--seed", "5", *FAST, "-o", str(out)]
        )
        assert code == 0
        return out

    def test_fit_artifacts(self, model_dir):
        for name in ("model.tsv", "scaler.tsv", "latent.tsv", "config.txt"):
            assert (model_dir / name).exists()
        latent = pd.read_csv(model_dir / "latent.tsv", sep="\t")
        assert list(latent.columns) == ["subject", "i", "j", "k", "z1", "z2", "labels"]

    def test_classify_labeled_mode(self, synth_dir, model_dir, tmp_path):
        out = tmp_path / "pred"
        code = main(
            [
                "classify", "--model", str(model_dir), "--data", str(synth_dir / "dataset.tsv"),
                *FAST, "-o", str(out),
            ]
        )
        assert code == 0
        pred = pd.read_csv(out / "predictions.tsv", sep="\t")
        assert set(pred["predicted_label"]) <= set(NUCLEI)
        assert pred.columns[4] == "predicted_label"

    def test_classify_whole_mask(self, synth_dir, model_dir, tmp_path):
        out = tmp_path / "pred_all"
        code = main(
            [
                "classify", "--model", str(model_dir), "--data", str(synth_dir / "dataset.tsv"),
                "--all-voxels", *FAST, "-o", str(out),
            ]
        )
        assert code == 0
        pred = pd.read_csv(out / "predictions.tsv", sep="\t")
        assert len(pred) == 480
        assert pred["predicted_label"].notna().all()

    def test_plot_svg(self, model_dir, tmp_path):
        out = tmp_path / "plot"
        code = main(["plot", str(model_dir / "latent.tsv"), "-o", str(out)])
        assert code == 0
        svg = (out / "embedding.svg").read_text()
        assert svg.startswith("<svg")
        assert 'width="1000" height="1000"' in svg
        for code_name in NUCLEI:
            assert f">{code_name}</text>" in svg


class TestCrossval:
    def test_report_artifacts(self, synth_dir, tmp_path):
        out = tmp_path / "cv"
        code = main(
            [
                "crossval", "--data", str(synth_dir / "dataset.tsv"), "--folds", "3",
                "--seed", "2", "--save-models", *FAST, "-o", str(out),
            ]
        )
        assert code == 0
        report = (out / "report.tsv").read_text()
        assert report.splitlines()[0].startswith("Label\tOverall\tAN")
        assert len(report.splitlines()) == 4
        assert (out / "summary.txt").exists()
        for fold in (1, 2, 3):
            assert (out / f"fold{fold}_model.tsv").exists()
            assert (out / f"fold{fold}_scaler.tsv").exists()

    def test_failure_leaves_no_artifacts(self, tmp_path, capsys):
        out = tmp_path / "bad"
        code = main(["crossval", "--data", str(tmp_path / "missing.tsv"), "-o", str(out), *FAST])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert len(err.strip().splitlines()) == 1
        assert not list(out.glob("*")) if out.exists() else True

    def test_invalid_dim_requires_k(self, synth_dir, tmp_path, capsys):
        code = main(
            [
                "crossval", "--data", str(synth_dir / "dataset.tsv"), "--dim", "5",
                *FAST, "-o", str(tmp_path / "x"),
            ]
        )
        assert code == 1
        assert "k explicitly" in capsys.readouterr().err


class TestAblate:
    def test_small_subset_run(self, synth_dir, tmp_path):
        out = tmp_path / "abl"
        code = main(
            [
                "ablate", "--data", str(synth_dir / "dataset.tsv"), "--folds", "3",
                "--subsets", "base|base,coord", "--seed", "1", *FAST, "-o", str(out),
            ]
        )
        assert code == 0
        table = (out / "ablation.tsv").read_text().splitlines()
        assert table[0].startswith("Dim.\tBase")
        assert table[1].startswith("19\tx")
        assert table[2].startswith("22\tx\tx")


class TestFeaturesCommand:
    def test_tensor_table(self, tmp_path):
        rng = np.random.default_rng(0)
        rows = []
        for v in range(27):
            i, j, k = v % 3, (v // 3) % 3, v // 9
            a = rng.normal(size=(3, 3))
            t = a @ a.T  # positive definite
            rows.append(
                {
                    "subject": "s0", "i": i, "j": j, "k": k,
                    "dxx": t[0, 0], "dyy": t[1, 1], "dzz": t[2, 2],
                    "dxy": t[0, 1], "dxz": t[0, 2], "dyz": t[1, 2],
                }
            )
        src = tmp_path / "tensors.tsv"
        pd.DataFrame(rows).to_csv(src, sep="\t", index=False)
        out = tmp_path / "feat"
        assert main(["features", str(src), "-o", str(out)]) == 0
        feat = pd.read_csv(out / "features.tsv", sep="\t")
        assert len(feat) == 27
        assert np.all((feat["fa"] >= 0) & (feat["fa"] <= 1))
        assert np.allclose(feat["westin_cl"] + feat["westin_cp"] + feat["westin_cs"], 1.0)
        knorm = np.sqrt(sum(feat[f"knut{c}"] ** 2 for c in range(1, 6)))
        assert np.allclose(knorm, 2 / np.sqrt(3), atol=1e-9)
        assert np.all(feat["knut_edge"] >= 0)
        assert "mode" in feat.columns

    def test_missing_component_column(self, tmp_path, capsys):
        src = tmp_path / "bad.tsv"
        pd.DataFrame({"subject": ["a"], "i": [0], "j": [0], "k": [0]}).to_csv(src, sep="\t", index=False)
        assert main(["features", str(src), "-o", str(tmp_path / "o")]) == 1
        assert "dxx" in capsys.readouterr().err


class TestConfigPrecedence:
    def test_file_then_flags(self, synth_dir, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("epochs=40\nseed=9\nfolds=3\ndeterministic=true\ngroups=base\n")
        out = tmp_path / "cv"
        code = main(
            [
                "crossval", "--config", str(cfg), "--data", str(synth_dir / "dataset.tsv"),
                "--seed", "4", "-o", str(out),
            ]
        )
        assert code == 0
        text = (out / "config.txt").read_text()
        assert "seed=4" in text  # flag wins
        assert "epochs=40" in text  # file survives
        assert "folds=3" in text
