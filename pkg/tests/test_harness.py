import json

import numpy as np
import pytest

from deskrl.harness import (
    ExperimentConfig,
    LearningCurve,
    emit_report,
    read_learning_curve_csv,
    run_experiment,
    steps_to_threshold,
    write_learning_curve_csv,
)

TINY = dict(k=1, strict=True, T_max=400, eval_every=200, eval_episodes=2,
            conv_filters=(4, 4, 4), fc1=16, seeds=[1])


# -- config validation -----------------------------------------------------

def test_variant_matrix_enforced():
    with pytest.raises(ValueError, match="unknown variant"):
        ExperimentConfig(name="x", variant="dqn")
    with pytest.raises(ValueError, match="a3ctb_sil"):
        ExperimentConfig(name="x", variant="a3c", pretrain_mode="sl",
                         transfer="full", demo_archive="a.demo")
    with pytest.raises(ValueError, match="no_fc"):
        ExperimentConfig(name="x", variant="a3ctb_sil", pretrain_mode="ae",
                         transfer="full", demo_archive="a.demo")
    with pytest.raises(ValueError, match="demo_archive"):
        ExperimentConfig(name="x", variant="a3ctb_sil", pretrain_mode="sl",
                         transfer="full")
    with pytest.raises(ValueError, match="strict"):
        ExperimentConfig(name="x", k=4, strict=True)


def test_pong_epsilon_override():
    assert ExperimentConfig(name="x", env_id="minipong").resolved_rmsprop_epsilon() == 1e-4
    assert ExperimentConfig(name="x", env_id="minipacman").resolved_rmsprop_epsilon() == 1e-5
    assert ExperimentConfig(name="x", env_id="minipong",
                            rmsprop_epsilon=3e-5).resolved_rmsprop_epsilon() == 3e-5


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(name="rt", seeds=[4, 5], conv_filters=(4, 4, 4))
    cfg.save(tmp_path / "c.json")
    loaded = ExperimentConfig.load(tmp_path / "c.json")
    assert loaded == cfg
    resolved = json.loads((tmp_path / "c.json").read_text())
    assert "resolved_rmsprop_epsilon" in resolved  # defaults materialized


# -- curve csv ---------------------------------------------------------------

def _curve():
    c = LearningCurve(seeds=[1, 2, 3])
    steps = list(range(0, 100, 10))
    rng = np.random.default_rng(0)
    for s in c.seeds:
        c.add_seed_curve(s, steps, list(rng.uniform(0, 650, len(steps))))
    return c


def test_curve_csv_shape(tmp_path):
    c = _curve()
    write_learning_curve_csv(c, tmp_path / "c.csv")
    header, rows = read_learning_curve_csv(tmp_path / "c.csv")
    assert len(rows) == 10
    assert header == ["step", "mean", "std", "seed1", "seed2", "seed3"]
    assert len(header) >= 5


def test_curve_csv_roundtrip_at_precision(tmp_path):
    c = _curve()
    path = tmp_path / "c.csv"
    write_learning_curve_csv(c, path)
    _, rows = read_learning_curve_csv(path)
    write_learning_curve_csv(_rebuild(rows), tmp_path / "c2.csv")
    assert path.read_text() == (tmp_path / "c2.csv").read_text()


def _rebuild(rows):
    c = LearningCurve(seeds=[1, 2, 3])
    steps = [int(r[0]) for r in rows]
    for i, s in enumerate(c.seeds):
        c.add_seed_curve(s, steps, [r[3 + i] for r in rows])
    return c


def test_mean_std_recomputable(tmp_path):
    c = _curve()
    write_learning_curve_csv(c, tmp_path / "c.csv")
    _, rows = read_learning_curve_csv(tmp_path / "c.csv")
    for r in rows:
        seeds = r[3:]
        # aggregates are computed over the values as written, then rounded
        # once more by the 6-digit formatting
        assert abs(r[1] - float(f"{np.mean(seeds):.6g}")) < 1e-9
        assert abs(r[2] - float(f"{np.std(seeds):.6g}")) < 1e-9


def test_empty_curve_rejected(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        write_learning_curve_csv(LearningCurve(seeds=[1]), tmp_path / "c.csv")


def test_steps_to_threshold():
    assert steps_to_threshold([0, 10, 20], [1.0, 5.0, 9.0], 4.0) == 10
    assert steps_to_threshold([0, 10, 20], [1.0, 2.0, 3.0], 4.0) is None


# -- runner ------------------------------------------------------------------

def test_missing_archive_rejected_before_training(tmp_path):
    cfg = ExperimentConfig(name="x", variant="a3ctb_sil", pretrain_mode="sl",
                           transfer="full", demo_archive=str(tmp_path / "nope.demo"),
                           **TINY)
    with pytest.raises(FileNotFoundError):
        run_experiment(cfg, tmp_path / "runs")


def test_strict_rerun_is_byte_identical(tmp_path):
    texts = []
    for attempt in range(2):
        cfg = ExperimentConfig(name=f"det{attempt}", env_id="minipong",
                               variant="a3ctb_sil", **TINY)
        d = run_experiment(cfg, tmp_path / f"runs{attempt}")
        texts.append((d / "curve.csv").read_text())
        assert (d / "config.json").exists()
        assert (d / "seed1" / "eval.csv").exists()
        assert (d / "seed1" / "final.ckpt").exists()
    assert texts[0] == texts[1]


def test_async_run_completes(tmp_path):
    cfg = ExperimentConfig(name="async", env_id="minipong", variant="a3c_sil",
                           seeds=[1], k=2, T_max=400, eval_every=400,
                           eval_episodes=1, conv_filters=(4, 4, 4), fc1=16)
    d = run_experiment(cfg, tmp_path / "runs")
    header, rows = read_learning_curve_csv(d / "curve.csv")
    assert rows[-1][0] == 400
    log = (d / "seed1" / "log.txt").read_text()
    assert "2 actors + 1 SIL-learner = 3" in log


def test_report_outputs(tmp_path):
    for i, name in enumerate(["runA", "runB"]):
        rd = tmp_path / name
        rd.mkdir(parents=True)
        cfg = ExperimentConfig(name=name, seeds=[1, 2], **{k: v for k, v in TINY.items()
                                                           if k != "seeds"})
        cfg.save(rd / "config.json")
        c = LearningCurve(seeds=[1, 2])
        steps = [0, 100, 200]
        for s in c.seeds:
            c.add_seed_curve(s, steps, [10.0 * i, 20.0 * i, 30.0 * i])
        write_learning_curve_csv(c, rd / "curve.csv")
    svg, summary = emit_report([tmp_path / "runA", tmp_path / "runB"],
                               tmp_path / "out", threshold=1000.0)
    text = summary.read_text()
    assert svg.exists()
    assert "not reached" in text
    assert text.count("final mean") == 2
    body = svg.read_text()
    assert body.count("legend") >= 1
