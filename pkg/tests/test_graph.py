import numpy as np
import pytest

from fovea.blocks import ResidualParams, residual_block
from fovea.builders import _Emit, build_squeeze_hourglass
from fovea.graph import ArchGraph, Node, forward, init_weights


def rand(shape, seed=0):
    return np.random.default_rng(seed).normal(size=shape).astype(np.float32)


def test_identity_stub_graph():
    g = ArchGraph((1, 2, 3, 3))
    g.tap("out", "input")
    x = rand((1, 2, 3, 3), seed=1)
    out = forward(g, x, params={})
    assert np.array_equal(out["out"], x)


def test_unknown_input_rejected():
    g = ArchGraph((1, 1, 4, 4))
    with pytest.raises(ValueError, match="unknown input"):
        g.add(Node(id="a", kind="relu", inputs=["nope"]))


def test_duplicate_id_rejected():
    g = ArchGraph((1, 1, 4, 4))
    g.add(Node(id="a", kind="relu", inputs=["input"]))
    with pytest.raises(ValueError, match="duplicate"):
        g.add(Node(id="a", kind="relu", inputs=["input"]))


def test_shape_error_names_the_node():
    g = ArchGraph((1, 3, 8, 8))
    g.add(Node(id="bad.conv", kind="conv", inputs=["input"], in_channels=4,
               out_channels=2, kernel=(3, 3), stride=1, padding=1, bias=True))
    with pytest.raises(ValueError, match="bad.conv"):
        g.shapes()


def test_forward_shape_error_names_the_node():
    g = ArchGraph((1, 3, 8, 8))
    g.add(Node(id="c1", kind="conv", inputs=["input"], in_channels=3,
               out_channels=2, kernel=(3, 3), stride=1, padding=1, bias=True))
    g.tap("out", "c1")
    init_weights(g)
    g.params["c1"]["w"] = rand((2, 4, 3, 3))  # wrong in-channel count
    with pytest.raises(ValueError, match="'c1'"):
        forward(g, rand((1, 3, 8, 8)))


def test_emitted_residual_matches_block_function():
    # the builder's node expansion and the array-level block must agree exactly
    g = ArchGraph((1, 4, 6, 6))
    e = _Emit(g)
    out = e.residual("res", "input", 4, 6, stride=2)
    g.tap("out", out)
    p = ResidualParams.create(4, 6, stride=2, rng=np.random.default_rng(3))
    g.params = {
        "res.conv1": {"w": p.conv1_w, "b": p.conv1_b},
        "res.conv2": {"w": p.conv2_w, "b": p.conv2_b},
        "res.proj": {"w": p.proj_w, "b": p.proj_b},
    }
    x = rand((1, 4, 6, 6), seed=4)
    assert np.array_equal(forward(g, x)["out"], residual_block(x, p))


def test_forward_is_deterministic():
    g = build_squeeze_hourglass(num_classes=2, input_hw=(127, 127))
    init_weights(g, seed=7)
    x = rand((1, 3, 127, 127), seed=8)
    a = forward(g, x)
    b = forward(g, x)
    assert sorted(a) == sorted(b)
    for name in a:
        assert np.array_equal(a[name], b[name]), name


def test_json_round_trip_preserves_structure_and_shapes():
    g = build_squeeze_hourglass(num_classes=2, input_hw=(127, 127))
    g2 = ArchGraph.from_json(g.to_json())
    assert [n.id for n in g.nodes] == [n.id for n in g2.nodes]
    assert g.taps == g2.taps
    assert g.shapes() == g2.shapes()
    assert [n.to_dict() for n in g.nodes] == [n.to_dict() for n in g2.nodes]


def test_weight_sidecar_round_trip(tmp_path):
    g = build_squeeze_hourglass(num_classes=2, input_hw=(127, 127))
    init_weights(g, seed=9)
    x = rand((1, 3, 127, 127), seed=10)
    want = forward(g, x)

    g.save(tmp_path / "graph.json")
    g.save_weights(tmp_path / "weights")
    g2 = ArchGraph.load(tmp_path / "graph.json")
    g2.load_weights(tmp_path / "weights")
    got = forward(g2, x)
    for name in want:
        assert np.array_equal(got[name], want[name]), name


def test_init_weights_zeros_flag():
    g = build_squeeze_hourglass(num_classes=2, input_hw=(127, 127))
    init_weights(g, zeros=True)
    assert all(np.all(t["w"] == 0) for t in g.params.values())


def test_forward_rejects_wrong_input_dims():
    g = ArchGraph((1, 3, 8, 8))
    g.tap("out", "input")
    with pytest.raises(ValueError, match="declares"):
        forward(g, rand((1, 3, 9, 8)), params={})


def test_forward_is_threadsafe_on_shared_graph():
    from concurrent.futures import ThreadPoolExecutor

    g = build_squeeze_hourglass(num_classes=2, input_hw=(127, 127))
    init_weights(g, seed=11)
    inputs = [rand((1, 3, 127, 127), seed=s) for s in range(4)]
    want = [forward(g, x) for x in inputs]
    with ThreadPoolExecutor(max_workers=4) as pool:
        got = list(pool.map(lambda x: forward(g, x), inputs))
    for a, b in zip(got, want):
        for name in b:
            assert np.array_equal(a[name], b[name])
