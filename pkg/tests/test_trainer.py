import json
import math

import numpy as np
import pytest

from hbnn.autodiff import Tensor
from hbnn.datasets import make_blobs
from hbnn.errors import UsageError
from hbnn.trainer import (
    EmbedConfig,
    OptimConfig,
    clip_rows,
    compute_metrics,
    embed,
    embed_config_for,
    evaluate,
    make_head,
    make_optimizer,
    train,
)


class _OneParam:
    decay_exempt = ()

    def __init__(self, value):
        self.w = Tensor(np.array([float(value)]))

    def leaves(self):
        return {"w": self.w}


def _loss_and_step(opt, param):
    out = (param.w * param.w).sum()
    out.backward()
    opt.step(opt.cfg.lr)


# -- optimizers --------------------------------------------------------------


def test_sgd_single_step_worked_example():
    param = _OneParam(1.0)
    cfg = OptimConfig(algorithm="sgd", lr=0.1)
    opt = make_optimizer(cfg, param)
    _loss_and_step(opt, param)
    assert param.w.data[0] == pytest.approx(0.8, abs=1e-15)


def test_sgd_momentum_accumulates():
    param = _OneParam(1.0)
    cfg = OptimConfig(algorithm="sgd", lr=0.1, momentum=0.5)
    opt = make_optimizer(cfg, param)
    _loss_and_step(opt, param)       # w: 1.0 -> 0.8, v = 2.0
    _loss_and_step(opt, param)       # g = 1.6, v = 0.5*2 + 1.6 = 2.6
    assert param.w.data[0] == pytest.approx(0.8 - 0.26, abs=1e-14)


def test_adam_first_step_is_signed_lr():
    param = _OneParam(5.0)
    cfg = OptimConfig(algorithm="adam", lr=0.01)
    opt = make_optimizer(cfg, param)
    _loss_and_step(opt, param)
    # Bias-corrected first step moves by ~lr in the gradient direction.
    assert param.w.data[0] == pytest.approx(5.0 - 0.01, abs=1e-5)


def test_weight_decay_skips_exempt_names():
    class _Two:
        decay_exempt = ("b",)

        def __init__(self):
            self.w = Tensor(np.array([1.0]))
            self.b = Tensor(np.array([1.0]))

        def leaves(self):
            return {"w": self.w, "b": self.b}

    params = _Two()
    cfg = OptimConfig(algorithm="sgd", lr=0.1, weight_decay=1.0, momentum=0.0)
    opt = make_optimizer(cfg, params)
    loss = (params.w + params.b).sum()
    loss.backward()
    opt.step(cfg.lr)
    # Both have gradient 1; only w also feels the decay term (+1).
    assert params.w.data[0] == pytest.approx(1.0 - 0.1 * 2.0)
    assert params.b.data[0] == pytest.approx(1.0 - 0.1 * 1.0)


def test_optimizer_requires_backward_first():
    param = _OneParam(1.0)
    opt = make_optimizer(OptimConfig(algorithm="sgd"), param)
    with pytest.raises(UsageError):
        opt.step(0.1)


def test_optim_config_validation():
    with pytest.raises(UsageError):
        OptimConfig(algorithm="lbfgs")
    with pytest.raises(UsageError):
        OptimConfig(lr=-1.0)
    with pytest.raises(UsageError):
        OptimConfig(milestones=(50, 50))
    with pytest.raises(UsageError):
        OptimConfig(batch_size=0)


# -- feature embedding -------------------------------------------------------


def test_clip_rows_only_shrinks():
    X = np.array([[3.0, 4.0], [0.1, 0.0]])
    out = clip_rows(X, 1.0)
    assert np.linalg.norm(out[0]) == pytest.approx(1.0)
    assert np.array_equal(out[1], X[1])


def test_embed_ball_norm_is_tanh_of_clip():
    cfg = EmbedConfig("poincare", -1.0, clip_r=1.0)
    X = np.array([[10.0, 0.0]])
    out = embed(X, cfg)
    assert np.linalg.norm(out[0]) == pytest.approx(math.tanh(1.0), abs=1e-12)


def test_embed_lorentz_lies_on_sheet():
    cfg = EmbedConfig("lorentz", -0.5, clip_r=2.0)
    X = np.array([[0.3, -1.1], [0.0, 0.0], [5.0, 5.0]])
    out = embed(X, cfg)
    inner = -out[:, 0] ** 2 + np.sum(out[:, 1:] ** 2, axis=1)
    assert float(np.max(np.abs(inner - 1.0 / -0.5))) < 1e-9
    assert out[1, 0] == pytest.approx(math.sqrt(2.0))


def test_embed_preserves_direction():
    cfg = EmbedConfig("poincare", -1.0, clip_r=1.0)
    X = np.array([[0.3, 0.4]])
    out = embed(X, cfg)
    assert np.allclose(out[0] / np.linalg.norm(out[0]), X[0] / np.linalg.norm(X[0]))


# -- metrics -----------------------------------------------------------------


def test_metrics_perfect_binary():
    labels = np.array([0, 0, 1, 1])
    logits = np.array([[2.0, -2.0], [1.0, -1.0], [-2.0, 2.0], [-1.0, 1.0]])
    m = compute_metrics(labels, logits)
    assert m["accuracy"] == 1.0
    assert m["mcc"] == 1.0
    assert m["macro_f1"] == 1.0
    assert m["auc"] == 1.0


def test_metrics_multiclass_has_no_auc():
    labels = np.array([0, 1, 2])
    logits = np.eye(3)
    m = compute_metrics(labels, logits)
    assert m["auc"] is None
    assert m["accuracy"] == 1.0


# -- training loop -----------------------------------------------------------


def _quick_train(head, seed=0, epochs=12):
    X, labels = make_blobs(2, 60, 2, seed=seed)
    params = make_head(head, -1.0, 2, 2, seed=seed)
    ocfg = OptimConfig(epochs=epochs, batch_size=16, seed=seed)
    return params, X, labels, train(params, X, labels, ocfg, embed_config_for(params))


def test_training_reduces_loss():
    _, _, _, result = _quick_train("bmlr_lorentz")
    assert result.history[-1]["loss"] < result.history[0]["loss"]
    assert result.history[-1]["accuracy"] >= 0.9


def test_training_is_deterministic():
    _, _, _, a = _quick_train("bmlr_poincare", seed=3)
    _, _, _, b = _quick_train("bmlr_poincare", seed=3)
    assert json.dumps(a.history, sort_keys=True) == json.dumps(b.history, sort_keys=True)


def test_history_entries_are_json_safe_and_clockless():
    _, _, _, result = _quick_train("euclidean_mlr", epochs=3)
    entry = result.history[0]
    json.dumps(entry)
    assert set(entry) == {"epoch", "loss", "lr", "accuracy", "mcc", "macro_f1", "auc", "saturation"}
    assert len(result.timings) == 3


def test_milestone_schedule_decays_lr():
    X, labels = make_blobs(2, 60, 2, seed=1)
    params = make_head("euclidean_mlr", -1.0, 2, 2, seed=1)
    ocfg = OptimConfig(epochs=6, batch_size=30, lr=0.1, milestones=(2, 4), gamma=0.1, seed=1)
    result = train(params, X, labels, ocfg, None)
    lrs = [e["lr"] for e in result.history]
    assert lrs[0] == pytest.approx(0.1)
    assert lrs[2] == pytest.approx(0.01)
    assert lrs[4] == pytest.approx(0.001)


def test_evaluate_matches_final_history():
    params, X, labels, result = _quick_train("bmlr_lorentz", seed=5)
    report = evaluate(params, X, labels, embed_config_for(params))
    assert report["accuracy"] == result.history[-1]["accuracy"]
    conf = np.array(report["confusion"])
    assert conf.sum() == len(labels)


def test_train_validates_label_range():
    X, _ = make_blobs(2, 60, 2, seed=0)
    bad = np.zeros(60, dtype=np.int64)
    bad[0] = 5
    params = make_head("bmlr_poincare", -1.0, 2, 2, seed=0)
    with pytest.raises(UsageError):
        train(params, X, bad, OptimConfig(epochs=1), embed_config_for(params))


def test_train_validates_feature_width():
    X, labels = make_blobs(2, 60, 3, seed=0)
    params = make_head("bmlr_poincare", -1.0, 2, 2, seed=0)
    with pytest.raises(UsageError):
        train(params, X, labels, OptimConfig(epochs=1), embed_config_for(params))
