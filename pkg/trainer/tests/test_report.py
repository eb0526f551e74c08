"""Report-format tests, including the cross-package sweep-table contract."""

import json

import pytest

from looped_trainer.train import AccuracyReport, TrainerConfig, lr_at, spearman


def sample_report():
    return AccuracyReport(
        rows=[(1, 0, 0.5, 0.4), (1, 1, 0.6, 0.42), (4, 0, 0.9, 0.5), (4, 1, 0.92, 0.56)],
        metadata={"command": "looped-trainer", "config": {"steps": 10}},
    )


def test_aggregates():
    agg = sample_report().aggregates()
    assert agg[1]["id_mean"] == pytest.approx(0.55)
    assert agg[4]["ood_mean"] == pytest.approx(0.53)
    assert agg[4]["id_std"] == pytest.approx(0.01)


def test_render_round_trips_through_generator_reader():
    # the cross-component contract: the other package's reader must parse this
    iterlab_report = pytest.importorskip("iterlab.report")
    text = sample_report().render()
    table = iterlab_report.parse_sweep_table(text)
    assert table.columns == ["loop_count", "seed", "id_acc", "ood_acc"]
    assert table.rows[0] == (1, 0, 0.5, 0.4)
    assert table.metadata["command"] == "looped-trainer"
    assert "aggregates" in table.metadata
    assert table.metadata["schema"] == 1


def test_render_metadata_carries_reference_scale():
    rep = sample_report()
    rep.metadata["full_scale_reference"] = {"model_dim": 256}
    header = rep.render().splitlines()[0]
    meta = json.loads(header[1:])
    assert meta["full_scale_reference"]["model_dim"] == 256


def test_accuracies_in_unit_interval():
    for _, _, id_acc, ood_acc in sample_report().rows:
        assert 0.0 <= id_acc <= 1.0 and 0.0 <= ood_acc <= 1.0


def test_lr_schedule_shape():
    cfg = TrainerConfig("x", "y", "z", steps=100, warmup=10, lr=1e-3, lr_min=1e-4)
    assert lr_at(0, cfg) == pytest.approx(1e-4)
    assert lr_at(9, cfg) == pytest.approx(1e-3)
    assert lr_at(99, cfg) == pytest.approx(1e-4, rel=1e-2)
    vals = [lr_at(s, cfg) for s in range(10, 100)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_config_from_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps(
            {
                "train_path": "a",
                "id_val_path": "b",
                "ood_val_path": "c",
                "loop_counts": [1, 2],
                "seeds": [0],
                "steps": 5,
            }
        )
    )
    cfg = TrainerConfig.from_json(path)
    assert cfg.loop_counts == (1, 2) and cfg.seeds == (0,) and cfg.steps == 5
    assert cfg.model_dim == 64  # desk-scale default


def test_spearman_matches_scipy():
    stats = pytest.importorskip("scipy.stats")
    xs = [1, 2, 4, 8, 12]
    ys = [0.1, 0.4, 0.3, 0.3, 0.9]
    assert spearman(xs, ys) == pytest.approx(stats.spearmanr(xs, ys).statistic)


def test_spearman_signs():
    assert spearman([1, 2, 3], [1.0, 2.0, 3.0]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)
