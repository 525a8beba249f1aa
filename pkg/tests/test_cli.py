import json
from importlib import resources

import pytest

from conftest import FIXTURES
from scene_kge.cli import run
from scene_kge.modelio import load_model

DATA = resources.files("scene_kge") / "data"


@pytest.fixture
def toy_kg(tmp_path):
    out = tmp_path / "toy.tsv"
    assert run(["gen-kg", str(DATA / "toy_scenes.json"), str(DATA / "ontology.json"), "-o", str(out)]) == 0
    return out


def test_stats_on_golden_fixture(capsys, tmp_path):
    out = tmp_path / "stats.json"
    assert run(["stats", str(FIXTURES / "golden.tsv"), "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "triples    5" in text and "entities   5" in text
    assert json.loads(out.read_text())["per_relation_counts"] == {"type": 3, "near": 2}
    assert (tmp_path / "stats.json.manifest.json").exists()


def test_unknown_algorithm_is_usage_error(capsys, toy_kg, tmp_path):
    assert run(["train", str(toy_kg), "--algo", "distmult", "-o", str(tmp_path / "m.bin")]) == 1
    assert "distmult" in capsys.readouterr().err
    assert not (tmp_path / "m.bin").exists()


@pytest.mark.parametrize("argv", [[], ["train"], ["stats", "x.tsv", "--bogus"]])
def test_usage_errors(argv):
    assert run(argv) == 1


def test_malformed_kg_is_data_error(capsys, tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("a\tr\tb\nbroken line\n")
    assert run(["stats", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_schema_error_is_data_error(capsys, tmp_path):
    bad = tmp_path / "scenes.json"
    bad.write_text('{"scenes": [{"id": 3}]}')
    assert run(["gen-kg", str(bad), str(DATA / "ontology.json"), "-o", str(tmp_path / "kg.tsv")]) == 2
    assert "scenes[0]" in capsys.readouterr().err


def test_missing_file_and_bad_model(tmp_path):
    assert run(["stats", str(tmp_path / "missing.tsv")]) == 2
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"not a model")
    assert run(["neighbors", str(junk), "--entity", "x"]) == 2


def test_rescal_report_marks_transitional_unsupported(capsys, toy_kg, tmp_path):
    model = tmp_path / "m.bin"
    assert run(["train", str(toy_kg), "--algo", "rescal", "--dim", "4", "--epochs", "3", "--quiet", "-o", str(model)]) == 0
    report = tmp_path / "r.json"
    assert run(["eval", str(model), str(toy_kg), "--k", "2", "-o", str(report)]) == 0
    assert "unsupported" in capsys.readouterr().out
    assert json.loads(report.read_text())["per_relation_transitional"] == {}


def test_full_pipeline(capsys, tmp_path):
    kg = tmp_path / "kg.tsv"
    assert run(["gen-kg", str(DATA / "clustered_scenes.json"), str(DATA / "clustered_ontology.json"), "-o", str(kg)]) == 0
    model = tmp_path / "model.bin"
    curve = tmp_path / "curve.png"
    assert run(["train", str(kg), "--dim", "8", "--epochs", "5", "--quiet", "--plot", str(curve), "-o", str(model)]) == 0
    assert curve.stat().st_size > 0
    assert (tmp_path / "entities.txt").exists() and (tmp_path / "relations.txt").exists()
    assert load_model(model).config.dim == 8

    figure = tmp_path / "report.svg"
    assert run(["eval", str(model), str(kg), "--k", "5", "--figure", str(figure), "-o", str(tmp_path / "r.json")]) == 0
    assert figure.read_text().lstrip().startswith("<?xml")

    assert run(["similar", str(model), "--scenes", "twin_a,twin_b,scene1_sub00", "--top-k", "2",
                "-o", str(tmp_path / "sim.json")]) == 0
    assert len(json.loads((tmp_path / "sim.json").read_text())["pairs"]) == 2

    assert run(["neighbors", str(model), "--entity", "car_000", "--k", "3", "-o", str(tmp_path / "nn.json")]) == 0
    assert len(json.loads((tmp_path / "nn.json").read_text())["neighbors"]) == 3

    points = tmp_path / "points.csv"
    scatter = tmp_path / "points.svg"
    assert run(["project", str(model), "--method", "pca", "--kg", str(kg), "--svg", str(scatter), "-o", str(points)]) == 0
    rows = points.read_text().splitlines()
    assert rows[0] == "label,x,y,class" and len(rows) == 1 + load_model(model).n_entities
    assert scatter.exists()

    assert run(["similar", str(model), "--scenes", "twin_a,nowhere"]) == 2
    assert run(["similar", str(model), "--scenes", "twin_a"]) == 1


def test_manifest_contents(toy_kg, tmp_path):
    model = tmp_path / "m.bin"
    manifest = tmp_path / "run.json"
    assert run(["train", str(toy_kg), "--dim", "4", "--epochs", "2", "--seed", "5", "--quiet",
                "-o", str(model), "--manifest", str(manifest)]) == 0
    doc = json.loads(manifest.read_text())
    assert doc["subcommand"] == "train" and doc["seed"] == 5
    assert doc["config"]["dim"] == 4 and doc["config"]["algo"] == "transe"
    assert list(doc["inputs"]) == [str(toy_kg)] and len(doc["inputs"][str(toy_kg)]) == 64
    assert {"tool_version", "wall_time"} <= set(doc)


def test_option_precedence(monkeypatch, toy_kg, tmp_path):
    def config_of(*extra):
        manifest = tmp_path / "m.json"
        assert run(["train", str(toy_kg), "--epochs", "1", "--quiet", "-o", str(tmp_path / "m.bin"),
                    "--manifest", str(manifest), *extra]) == 0
        return json.loads(manifest.read_text())["config"]

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dim": 6, "threads": 1, "lr": 0.5}))
    monkeypatch.setenv("SCENE_KGE_THREADS", "2")
    assert config_of()["threads"] == 2
    assert config_of("--config", str(cfg))["threads"] == 1
    got = config_of("--config", str(cfg), "--dim", "3")
    assert (got["dim"], got["lr"], got["epochs"]) == (3, 0.5, 1)


def test_bad_config(tmp_path, toy_kg):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dimension": 6}))
    assert run(["train", str(toy_kg), "--config", str(cfg), "-o", str(tmp_path / "m.bin")]) == 1
    cfg.write_text("{")
    assert run(["train", str(toy_kg), "--config", str(cfg), "-o", str(tmp_path / "m.bin")]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_exit_code(tmp_path, toy_kg):
    # a huge learning rate on unnormalised HolE overflows to inf within a few epochs
    code = run(["train", str(toy_kg), "--algo", "hole", "--dim", "8", "--epochs", "200", "--lr", "1e150",
                "--no-normalize", "--quiet", "-o", str(tmp_path / "m.bin")])
    assert code == 3
