import math
import os
import sys

if "D2DPA_MODULE_DIR" in os.environ:
    sys.path.insert(0, os.environ["D2DPA_MODULE_DIR"])

import d2dpa


def test_version():
    assert d2dpa.__version__.startswith("d2dpa")


def test_dataset_generation_is_deterministic():
    ds1 = d2dpa.gen_dataset([4], topologies=3, fades_per_topology=2, seed=9)
    ds2 = d2dpa.gen_dataset([4], topologies=3, fades_per_topology=2, seed=9)
    assert len(ds1) == 6
    assert d2dpa.dataset_hash(ds1) == d2dpa.dataset_hash(ds2)
    inst = ds1.instances[0]
    assert inst.n == 4
    assert len(inst.H) == 16
    assert all(h >= 0 for h in inst.H)


def test_baselines_and_objective():
    ds = d2dpa.gen_dataset([6], topologies=2, fades_per_topology=2, seed=3)
    for inst in ds.instances:
        mp = d2dpa.max_power(inst)
        assert mp == [inst.pmax] * inst.n
        wp = d2dpa.wmmse(inst)
        assert all(0.0 <= p <= inst.pmax + 1e-12 for p in wp)
        # WMMSE should not lose to blasting full power
        assert d2dpa.weighted_sum_rate(inst, wp) >= d2dpa.weighted_sum_rate(inst, mp) - 1e-9
        rates = d2dpa.pair_rates(inst, wp)
        assert len(rates) == inst.n
        assert math.isclose(sum(rates), d2dpa.weighted_sum_rate(inst, wp), rel_tol=1e-12)


def test_homophily_bounds():
    ds = d2dpa.gen_dataset([8], topologies=1, fades_per_topology=1, seed=11)
    inst = ds.instances[0]
    h = d2dpa.homophily(inst, d2dpa.wmmse(inst))
    assert 0.0 <= h <= 1.0


def test_model_forward_and_checkpoint(tmp_path):
    cfg = d2dpa.TgtConfig()
    cfg.d = 8
    cfg.heads = 4
    cfg.layers = 2
    model = d2dpa.Model.create(cfg, seed=5)
    ds = d2dpa.gen_dataset([5], topologies=1, fades_per_topology=1, seed=2)
    p = model.forward(ds.instances[0])
    assert len(p) == 5
    assert all(0.0 < v < cfg.pmax for v in p)

    path = str(tmp_path / "model.ckpt")
    model.save(path)
    again = d2dpa.Model.load(path, cfg)
    assert again.forward(ds.instances[0]) == p


def test_training_loop_runs():
    cfg = d2dpa.TgtConfig()
    cfg.d = 4
    cfg.heads = 2
    cfg.layers = 1
    tc = d2dpa.TrainConfig()
    tc.epochs = 2
    tc.batch_size = 8
    tc.seed = 7
    ds = d2dpa.gen_dataset([4], topologies=10, fades_per_topology=2, seed=7)
    model, history, best_epoch = d2dpa.train(tc, cfg, ds)
    assert len(history) == 2
    assert 0 <= best_epoch < 2
    mean, stddev, per_instance = d2dpa.evaluate(model, ds)
    assert len(per_instance) == len(ds)
    assert mean > 0
