"""Smoke test for the compiled module. Run after `maturin develop`."""

import json
import math

import mmv2x_py as m


def test_channel():
    assert math.isclose(m.path_loss(1.0), 68.465, abs_tol=1e-3)
    assert math.isclose(m.path_loss(100.0), 104.865, abs_tol=1e-3)
    assert m.blocking_loss_mean(100.0) == 9.0
    assert m.blocking_loss_mean(1000.0) == 13.0
    assert m.shannon_throughput(104.865) > 0
    try:
        m.path_loss(0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("distance below 1 m must be rejected")


def test_paths():
    edges = [(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 2.0), (0, 3, 5.0)]
    assert m.dijkstra(4, edges, 0, 3) == ([0, 1, 3], 2.0)
    routes = m.yen_k_shortest(4, edges, 0, 3, 3)
    assert [w for _, w in routes] == [2.0, 3.0, 5.0]
    assert m.dijkstra(4, [], 0, 3) is None


def test_run():
    scenario = m.generate_scenario(3, json.dumps({"n_vehicles": 12, "duration": 100}))
    assert len(json.loads(scenario)["vehicles"]) == 12
    summary, heatmap = m.run(scenario, json.dumps({"seed": 2}))
    assert summary.timesteps == 100
    assert 0.0 <= summary.connectivity <= 1.0
    assert heatmap.populated_cells > 0
    again, _ = m.run(scenario, json.dumps({"seed": 2}))
    assert again.connectivity == summary.connectivity
    restored = m.ErrorHeatmap.from_json(heatmap.to_json())
    assert restored.to_json() == heatmap.to_json()


def test_heatmap():
    h = m.ErrorHeatmap((-10.0, -10.0), 5.0, 4, 4, default_epsilon=2.0)
    assert h.lookup(100.0, 100.0) == 2.0
    h.update((0.0, 0.0), (3.0, 4.0))
    assert h.lookup(0.0, 0.0) >= 0.0
    assert h.populated_cells == 1


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
