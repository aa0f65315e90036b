"""Smoke test for the pynexlab extension: run with `python smoke_test.py`."""

import math

import pynexlab as nx


def main():
    line = nx.SpaceModel.euclidean(1)
    assert abs(line.dist([0.0], [3.0]) - 3.0) < 1e-12
    assert line.combine([0.0], [4.0], 0.25) == [1.0]
    report = nx.SpaceModel.hyperboloid2().verify_hyperbolicity(2000, 1)
    assert report["passed"], report

    log = nx.Gauge.log()
    assert log.phi(0.5) == 1.0
    assert abs(log.c_phi - 2.0) < 1e-12

    zero = nx.Map.constant(line, [0.0])
    one = nx.Map.constant(line, [1.0])
    d = nx.Metric.series(line, [0.0], log).distance(zero, one)
    assert abs(d["value"] - 0.5) < 1e-12, d

    half = nx.Map.affine_1d(line, 0.5, 1.0)
    fp = nx.iterate(half, [100.0], 1e-10, 1000)
    assert fp["converged"] and abs(fp["final_point"]["coords"][0] - 2.0) < 1e-8, fp

    shift = nx.Map.affine_1d(line, 1.0, 1.0)
    w = nx.ball_invariance_witness(shift, 0.5, [0.0], nx.Metric.series(line, [0.0], log, budget=400))
    assert abs(w.params["gamma"] - 1 / 12) < 1e-15 and abs(w.params["m_f"] - 24) < 1e-12
    v = w.verify(members=20, budget=500, seed=3)
    assert v["all_pass"] and v["passed"] == 20, v
    assert abs(w.center([12.0])[0] - 12.0) < 1e-12

    f = nx.Map.identity(line).contract_toward([0.0], 0.25)
    g = nx.isometry_patch(f, [[0.0], [10.0]], 0.5, 0.5, [0.0])
    assert nx.local_lipschitz(g, [0.0], 1 / 128) >= 1 - 1e-6
    assert nx.local_lipschitz(f, [0.0], 1 / 128) <= 0.75 + 1e-6

    rep = nx.run_command("fixpoint", "schema = 1\n[model]\nkind = \"euclidean\"\n"
                         "[map]\nkind = \"affine1d\"\na = 0.5\nb = 1.0\n[fixpoint]\ntol = 1e-10\n")
    assert rep["summary"]["failed"] == 0, rep

    try:
        nx.Map.affine_1d(line, 2.0, 0.0)
    except nx.NexlabError:
        pass
    else:
        raise AssertionError("expanding map accepted")
    assert math.isfinite(nx.empirical_lipschitz(half, [0.0], 10.0))
    print("pynexlab smoke test passed")


if __name__ == "__main__":
    main()
