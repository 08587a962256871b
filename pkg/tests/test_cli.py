import json
from pathlib import Path

import numpy as np
import pytest

import lossband as lb
from lossband.cli import load_params_file, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
DOUBLE_WELL = str(CONFIGS / "double_well.json")
TRIPLE_WELL = str(CONFIGS / "triple_well.json")
XOR = str(CONFIGS / "xor_mlp.json")


def run(*argv):
    return main([str(a) for a in argv])


class TestTrain:
    def test_one_double_well_minimum(self, tmp_path, double_well):
        assert run("train", "--config", DOUBLE_WELL, "--out", tmp_path, "--count", 1) == 0
        theta = load_params_file(tmp_path / "minimum_000.json")
        assert double_well.loss(theta) < 1e-6
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["count"] == 1
        assert manifest["minima"][0]["loss"] < 1e-6
        assert "config_sha256" in manifest and "seed" in manifest

    def test_count_zero_writes_empty_manifest(self, tmp_path):
        assert run("train", "--config", DOUBLE_WELL, "--out", tmp_path, "--count", 0) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["minima"] == []

    def test_same_seed_bit_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for out in (out_a, out_b):
            assert run("train", "--config", DOUBLE_WELL, "--out", out, "--count", 2) == 0
        for name in ("minimum_000.json", "minimum_001.json", "manifest.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_seed_override_changes_minima(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run("train", "--config", DOUBLE_WELL, "--out", out_a, "--count", 1) == 0
        assert run("train", "--config", DOUBLE_WELL, "--out", out_b, "--count", 1, "--seed", 9) == 0
        a = load_params_file(out_a / "minimum_000.json")
        b = load_params_file(out_b / "minimum_000.json")
        assert not np.array_equal(a, b)


def _write_minimum(path, values):
    from lossband.params import params_to_hex

    doc = {
        "dim": len(values),
        "values": [float(v) for v in values],
        "values_hex": params_to_hex(np.asarray(values, dtype=np.float64)),
    }
    Path(path).write_text(json.dumps(doc))


class TestConnect:
    def test_double_well_report(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        _write_minimum(a, [-1.0, 1.0])
        _write_minimum(b, [1.0, 1.0])
        out = tmp_path / "out"
        assert run("connect", "--config", DOUBLE_WELL, "--a", a, "--b", b, "--out", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert 1.0 <= report["saddle_loss"] <= 1.02
        assert report["min_loss_a"] == 0.0 and report["min_loss_b"] == 0.0
        assert report["path_length_ratio"] > 1.0  # the curved path beats the chord
        saddle = json.loads((out / "saddle.json").read_text())
        assert saddle["saddle_loss"] == report["saddle_loss"]
        assert saddle["source"] in ("pivot", "dense_point")
        chain = lb.Chain.load(out / "chain.json")
        assert chain.dim == 2
        profile_lines = (out / "profile.csv").read_text().splitlines()
        assert profile_lines[0].startswith("# config_sha256=")
        header_idx = next(i for i, l in enumerate(profile_lines) if not l.startswith("#"))
        assert profile_lines[header_idx] == "cumulative_arc_length,alpha_global,loss,is_pivot"

    def test_identical_minima_degenerate(self, tmp_path, double_well):
        a = tmp_path / "a.json"
        _write_minimum(a, [1.0, 1.0])
        out = tmp_path / "out"
        assert run("connect", "--config", DOUBLE_WELL, "--a", a, "--b", a, "--out", out) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["saddle_loss"] == double_well.loss([1.0, 1.0])
        assert report["path_length_ratio"] == 1.0

    def test_dimension_mismatch_is_usage_error(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        _write_minimum(a, [-1.0, 1.0, 0.0])
        _write_minimum(b, [1.0, 1.0, 0.0])
        code = run("connect", "--config", DOUBLE_WELL, "--a", a, "--b", b, "--out", tmp_path / "o")
        assert code == 1


class TestExplore:
    def test_triple_well_graph(self, tmp_path):
        minima_dir = tmp_path / "minima"
        minima_dir.mkdir()
        surf = lb.analytic_surface("triple_well")
        cfg = lb.TrainConfig(learning_rate=0.02, steps=400, momentum=0.9)
        for i, center in enumerate(surf.metadata["well_centers"]):
            theta = lb.train_minimum(surf, center, cfg)
            _write_minimum(minima_dir / f"minimum_{i:03d}.json", theta)
        out = tmp_path / "graph"
        assert run("explore", "--config", TRIPLE_WELL, "--minima", minima_dir, "--out", out) == 0
        graph = json.loads((out / "graph.json").read_text())
        assert len(graph["nodes"]) == 3
        assert len(graph["mst"]) == 2
        edge_ids = {e["id"] for e in graph["edges"]}
        assert set(graph["mst"]) <= edge_ids
        for edge in graph["edges"]:
            chain = lb.Chain.load(out / edge["chain_file"])
            assert chain.dim == 2

    def test_needs_two_minima(self, tmp_path):
        minima_dir = tmp_path / "minima"
        minima_dir.mkdir()
        _write_minimum(minima_dir / "minimum_000.json", [0.0, 0.9])
        code = run("explore", "--config", TRIPLE_WELL, "--minima", minima_dir, "--out", tmp_path / "g")
        assert code == 1


class TestEvalPath:
    def test_straight_two_pivot_chain(self, tmp_path):
        chain = lb.Chain([[-1.0, 1.0], [1.0, 1.0]])
        chain_file = tmp_path / "chain.json"
        chain.save(chain_file)
        out = tmp_path / "out"
        assert run("eval-path", "--config", DOUBLE_WELL, "--chain", chain_file, "--out", out, "-m", 9) == 0
        lines = [l for l in (out / "path_profile.csv").read_text().splitlines() if not l.startswith("#")]
        assert lines[0] == "curve,cumulative_arc_length,alpha_global,loss,is_pivot"
        chain_rows = [l for l in lines[1:] if l.startswith("chain,")]
        straight_rows = [l for l in lines[1:] if l.startswith("straight,")]
        assert len(chain_rows) == 11 and len(straight_rows) == 11

    def test_curved_chain_beats_chord(self, tmp_path):
        # relaxed path vs straight segment: maxima ~1 vs 3 at the midpoint
        sched = lb.AutoNebSchedule(cycles=((300, 0.05), (300, 0.01)))
        dw = lb.make_double_well()
        result = lb.auto_neb([-1.0, 1.0], [1.0, 1.0], dw, sched)
        chain_file = tmp_path / "chain.json"
        result.chain.save(chain_file)
        out = tmp_path / "out"
        assert run("eval-path", "--config", DOUBLE_WELL, "--chain", chain_file, "--out", out) == 0
        rows = [l.split(",") for l in (out / "path_profile.csv").read_text().splitlines()[3:]]
        chain_max = max(float(r[3]) for r in rows if r[0] == "chain")
        straight_max = max(float(r[3]) for r in rows if r[0] == "straight")
        assert chain_max == pytest.approx(1.0, abs=0.05)
        assert straight_max == pytest.approx(3.0, abs=0.05)

    def test_m_zero_rejected(self, tmp_path):
        chain_file = tmp_path / "chain.json"
        lb.Chain([[-1.0, 1.0], [1.0, 1.0]]).save(chain_file)
        code = run("eval-path", "--config", DOUBLE_WELL, "--chain", chain_file, "--out", tmp_path, "-m", 0)
        assert code == 1

    def test_dimension_mismatch_rejected(self, tmp_path):
        chain_file = tmp_path / "chain.json"
        lb.Chain([[0.0], [1.0]]).save(chain_file)
        code = run("eval-path", "--config", DOUBLE_WELL, "--chain", chain_file, "--out", tmp_path)
        assert code == 1


class TestUsageErrors:
    def test_unknown_command(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert run("train", "--config", tmp_path / "none.json", "--out", tmp_path) == 1

    def test_invalid_json_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run("train", "--config", bad, "--out", tmp_path) == 1

    def test_missing_dataset_csv(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "landscape": {
                "mlp": {"layer_sizes": [2, 2, 1], "loss_kind": "squared_error"},
                "dataset_csv": "nope.csv",
            }
        }))
        assert run("train", "--config", cfg, "--out", tmp_path) == 1


class TestDeterminism:
    def test_connect_bit_identical_across_workers(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        _write_minimum(a, [-1.0, 1.0])
        _write_minimum(b, [1.0, 1.0])
        outputs = []
        for name, workers in (("w1", 1), ("w2", 2), ("w1b", 1)):
            out = tmp_path / name
            code = run(
                "connect", "--config", DOUBLE_WELL, "--a", a, "--b", b,
                "--out", out, "--workers", workers,
            )
            assert code == 0
            outputs.append({
                f.name: f.read_bytes() for f in sorted(out.iterdir()) if f.is_file()
            })
        assert outputs[0] == outputs[1] == outputs[2]
