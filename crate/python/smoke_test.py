#!/usr/bin/env python3
"""Smoke test for the fedida_py extension module.

Builds nothing itself: expects `cargo build --release -p fedida-py` to have
produced target/release/libfedida_py.so. Copies the cdylib into a temp
directory under the importable name and exercises the main entry points.
"""

import json
import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def locate_cdylib():
    for profile in ("release", "debug"):
        p = os.path.join(REPO, "target", profile, "libfedida_py.so")
        if os.path.exists(p):
            return p
    sys.exit("libfedida_py.so not found; run: cargo build --release -p fedida-py")


def main():
    tmp = tempfile.mkdtemp(prefix="fedida-smoke-")
    shutil.copy(locate_cdylib(), os.path.join(tmp, "fedida_py.so"))
    sys.path.insert(0, tmp)
    import fedida_py

    # AUROC basics
    assert fedida_py.auroc([0.9, 0.1], [1, 0]) == 1.0
    assert abs(fedida_py.auroc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]) - 0.75) < 1e-12
    print("auroc ok")

    # synthetic dataset and subgroup structure
    ds = fedida_py.Dataset.synthetic(2000, seed=7)
    assert len(ds) == 2000 and ds.p_a == 3
    sizes = ds.subgroup_sizes()
    assert len(sizes) == 8, sizes
    print("dataset ok:", sorted(sizes.values()))

    # fairness report on a hand-made score vector
    scores = [0.9, 0.8, 0.2, 0.1, 0.7, 0.6, 0.3, 0.4]
    labels = [1, 1, 0, 0, 1, 0, 0, 1]
    sensitive = [[0], [0], [0], [0], [1], [1], [1], [1]]
    report = fedida_py.fairness_report(
        scores, labels, sensitive, threshold=0.5, min_group_size=2
    )
    for key in ("auroc", "dpd", "dpr", "dfpr", "dppv"):
        assert key in report, report
        assert 0.0 <= report[key] <= 1.0
    dpd, dpr = fedida_py.demographic_parity(
        scores, labels, sensitive, threshold=0.5, min_group_size=2
    )
    assert abs(dpd - report["dpd"]) < 1e-12
    print("metrics ok: dpd=%.3f dpr=%.3f" % (dpd, dpr))

    # penalty worked example: single cross pair, |0.3 - 0.7| / 1
    value, pairs, norm = fedida_py.penalty([0.3, 0.7], [1, 1], [0, 1])
    assert abs(value - 0.4) < 1e-12 and pairs == 1 and norm == 1.0
    print("penalty ok")

    # oversampler balances every (group, outcome) cell
    out = fedida_py.rose_augment(
        ds.features()[:200], ds.sensitive()[:200], ds.outcomes()[:200], seed=3
    )
    from collections import Counter

    cells = Counter(
        (tuple(s), y) for s, y in zip(out["s"], out["y"])
    )
    counts = set(cells.values())
    assert len(counts) == 1, cells
    assert any(out["synthetic_mask"])
    print("rose ok: %d cells balanced at %d" % (len(cells), counts.pop()))

    # end-to-end experiment on synthetic data
    config = {
        "seed": 11,
        "dataset": {
            "kind": "synthetic",
            "spec": json.loads(
                open(os.path.join(REPO, "configs", "synthetic_spec.json")).read()
            ),
        },
        "partition": {"client_count": 3, "mode": "homogeneous"},
        "federation": {
            "strategy": "fedavg",
            "clients": 3,
            "rounds": 2,
            "local_epochs": [2],
            "batch_size": 64,
            "lr": 0.1,
            "model": "linear",
        },
        "setups": [
            {"name": "fedavg", "strategy": "fedavg"},
            {
                "name": "fedida",
                "strategy": "fedavg",
                "penalty": {"mode": "absolute-pair", "lambda": 0.05, "gamma": 0.01},
                "rose": {},
            },
        ],
        "evaluation": {"threshold": 0.5, "min_group_size": 3},
    }
    outdir = os.path.join(tmp, "run")
    table = fedida_py.run_experiment(json.dumps(config), outdir, seed=11)
    assert len(table["rows"]) == 2
    for row in table["rows"]:
        assert 0.0 <= row["auroc_mean"] <= 1.0
    assert os.path.exists(os.path.join(outdir, "results.csv"))
    assert os.path.exists(os.path.join(outdir, "manifest.json"))
    print("experiment ok:")
    for row in table["rows"]:
        print(
            "  %-8s auroc=%.3f dpd=%.3f dpr=%.3f"
            % (row["setup"], row["auroc_mean"], row["dpd_mean"], row["dpr_mean"])
        )

    print("smoke test passed")


if __name__ == "__main__":
    main()
