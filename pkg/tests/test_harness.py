import numpy as np
import pytest

from wdrokit.certify import lower_bound_l, enumerate_masks, upper_bound_L
from wdrokit.harness import (ConvergenceSeries, DataSpec, ExperimentConfig,
                             ModelSpec, clean_expected_loss, dump_json,
                             gen_data, gen_model, load_data, remark1_oracle,
                             remark_loss, run_convergence, run_pipeline,
                             save_data)
from wdrokit.linalg import NormKind
from wdrokit.losses import LossKind
from wdrokit.network import ActivationKind


def test_gen_model_deterministic():
    spec = ModelSpec(3, 2, (4, 4), activation=ActivationKind.GELU)
    a = gen_model(spec, 5)
    b = gen_model(spec, 5)
    c = gen_model(spec, 6)
    for (wa, ba), (wb, bb) in zip(a.layers, b.layers):
        assert np.array_equal(wa, wb)
        assert np.array_equal(ba, bb)
    assert any(not np.array_equal(wa, wc)
               for (wa, _), (wc, _) in zip(a.layers, c.layers))


def test_gen_model_monotone():
    net = gen_model(ModelSpec(2, 2, (4,), monotone=True), 0)
    for w, b in net.layers:
        assert np.all(w >= 0) and np.all(b >= 0)


def test_gen_data_balance_and_box():
    data = gen_data(DataSpec(9, 3, 2), 0)
    labels = [z.y for z in data]
    assert labels.count(0) == labels.count(1) == labels.count(2) == 3
    for z in data:
        assert np.all(z.x >= -1.0) and np.all(z.x <= 1.0)
    assert gen_data(DataSpec(9, 3, 2), 0)[4].x == pytest.approx(data[4].x)


def test_data_roundtrip(tmp_path):
    data = gen_data(DataSpec(6, 2, 3), 1)
    path = tmp_path / "d.csv"
    save_data(data, path)
    back = load_data(path)
    assert len(back) == len(data)
    for a, b in zip(data, back):
        assert np.array_equal(a.x, b.x)  # repr round-trips floats exactly
        assert a.y == b.y


def test_load_data_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x0,x1\n0.0,1.0\n")
    with pytest.raises(ValueError):
        load_data(p)


def test_remark_loss_shape():
    assert remark_loss(0.5) == 0.5
    assert remark_loss(-2.0) == 1.5
    assert remark_loss(4.0) == 2.5


def test_remark1_oracle_hand_values():
    # empirical loss at the single atom x=2 is 1.5; the worst-case grows at
    # the tail slope 1/2, not the local modulus 1
    assert remark1_oracle(0.0) == pytest.approx(1.5)
    assert remark1_oracle(1.0) == pytest.approx(2.0, abs=1e-3)
    assert remark1_oracle(0.1) == pytest.approx(1.55, abs=1e-3)
    with pytest.raises(ValueError):
        remark1_oracle(-1.0)


def test_convergence_series_properties():
    net = gen_model(ModelSpec(2, 2, (5,)), 2)
    data = gen_data(DataSpec(6, 2, 2), 3)
    series = run_convergence(net, data, NormKind.LINF, NormKind.L1,
                             probes=16, exhaustive_cap=6, seed=0)
    vals = series.cumulative_l
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    inv = enumerate_masks(net, data, probes=16, exhaustive_cap=6, seed=0)
    assert vals[-1] == pytest.approx(
        lower_bound_l(net, inv, NormKind.LINF).value, abs=1e-9)
    assert series.L_upper == pytest.approx(
        upper_bound_L(net, inv, NormKind.LINF, NormKind.L1).value)
    assert vals[-1] <= series.L_upper + 1e-9
    assert series.exhaustive


def test_convergence_csv(tmp_path):
    series = ConvergenceSeries([1, 2], [0.5, 0.75], ["dataset", "probe"],
                               1.5, 0.6, True)
    path = tmp_path / "conv.csv"
    series.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("mask_count,")
    assert lines[1] == "1,dataset,0.5,1.5,0.6"


def test_dump_json_canonical():
    text = dump_json({"b": 1.5, "a": [1, 2]})
    assert text == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": 1.5\n}\n'
    with pytest.raises(ValueError):
        dump_json({"x": float("nan")})


def test_clean_expected_loss_matches_loop():
    net = gen_model(ModelSpec(2, 3, (4,)), 0)
    data = gen_data(DataSpec(6, 3, 2), 1)
    from wdrokit.losses import loss
    from wdrokit.network import forward
    ref = np.mean([loss(LossKind.CROSS_ENTROPY, forward(net, z.x), z.y)
                   for z in data])
    assert clean_expected_loss(net, data, LossKind.CROSS_ENTROPY) == \
        pytest.approx(float(ref))


def test_pipeline_reruns_byte_identical(tmp_path):
    cfg = ExperimentConfig(seed=4, model=ModelSpec(2, 2, (5,)),
                           data=DataSpec(6, 2, 2), probes=16, exhaustive_cap=6)
    paths_a = run_pipeline(cfg, tmp_path / "a")
    paths_b = run_pipeline(cfg, tmp_path / "b")
    assert set(paths_a) == {"model", "data", "certificate", "per_mask",
                            "attack", "eval", "convergence"}
    for name in paths_a:
        assert paths_a[name].read_bytes() == paths_b[name].read_bytes(), name


def test_pipeline_matches_golden(tmp_path):
    """Frozen-seed regression: the emitted reports must not drift."""
    from pathlib import Path
    golden = Path(__file__).parent / "golden"
    cfg = ExperimentConfig(seed=0, model=ModelSpec(2, 2, (4,)),
                           data=DataSpec(5, 2, 2), probes=8, exhaustive_cap=4,
                           epsilon=0.1)
    paths = run_pipeline(cfg, tmp_path)
    for name, path in paths.items():
        ref = golden / path.name
        assert path.read_text() == ref.read_text(), name
