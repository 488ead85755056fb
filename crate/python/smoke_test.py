"""Smoke test for the pysmust extension module.

Build and install with

    pip install --no-build-isolation -e crates/python

then run ``python python/smoke_test.py``.
"""

import math

import pysmust


def main():
    qpsk = pysmust.Constellation("qpsk")
    assert qpsk.bits_per_symbol == 2

    cat3 = pysmust.Composite.cat3([2, 3], [3, 2], 31.0)
    assert cat3.size == 16 and cat3.is_injective()
    assert abs(cat3.mean_power - 31.0) < 1e-9
    for point, words in cat3.points():
        assert cat3.ml_detect(point) == words
        assert cat3.sic_detect(point) == words
        assert cat3.mpic_detect(point, 0, 1e-3)[0] == words[0]
    assert cat3.to_csv().splitlines()[0].startswith("i,q")

    cat1 = pysmust.Composite.cat1([2.3, 3.01], [3.11, 2.18], 31.0)
    assert cat1.size == 16
    mi = cat1.mutual_information(0, [10.0, 10.0])
    assert 0.0 < mi <= 2.0 + 1e-9

    assert abs(pysmust.mi_single("qpsk", 1e4) - 2.0) < 1e-6

    opt = pysmust.optimize_cpacs([10.0, 10.0])
    assert len(opt["alpha"]) == 2 and opt["objective"] > 0.0
    q, p = pysmust.quantize_cpacs(opt["alpha"], opt["beta"], 1.0)
    assert all(math.gcd(a, b) == 1 for a, b in zip(q, q[1:]))

    beams, gamma = pysmust.zf_beams([[1 + 0j, 0j], [0j, 1 + 0j]])
    assert abs(gamma - 2.0) < 1e-12 and len(beams) == 2

    clusters = pysmust.cluster_users(
        [[1 + 0j, 0j], [0j, 1 + 0j], [0.9 + 0j, 0.1j], [0.1 + 0j, 0.8 + 0j]], 2, 2
    )
    assert sorted(u for c in clusters for u in c) == [0, 1, 2, 3]

    try:
        pysmust.Constellation("8psk")
    except pysmust.SmustError:
        pass
    else:
        raise AssertionError("unknown modulation accepted")

    records = pysmust.run_experiment(
        'experiment = "fairness"\nseed = 1\ntrials = 10000\n'
        'schemes = ["oma", "smust_cat1"]\n[sweep]\nsnr_db_start = 10\nsnr_db_stop = 10\n'
    )
    assert [r["scheme"] for r in records] == ["oma", "smust_cat1"]
    print("pysmust smoke test passed")


if __name__ == "__main__":
    main()
