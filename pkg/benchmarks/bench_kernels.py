"""Compare the compiled and pure-Python kernels on realistic workloads.

    python benchmarks/bench_kernels.py [--repeat 5]

Rule matching replays coloring rules over concept rows drawn from real
traces; rule search runs the termination enumeration kernel on samples
collected from 80 coloring graphs.
"""
import argparse
import time

import numpy as np

from algoconcepts import _pykernels
from algoconcepts.algoexec import labeled_rows
from algoconcepts.graphgen import make_dataset
from algoconcepts.pipeline import extract_rules, traces_for
from algoconcepts.termination import _pack, candidate_rules, collect_termination_samples

try:
    from algoconcepts import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads():
    traces = traces_for("coloring", make_dataset("coloring", counts=(80, 1, 1), seed=0).train)
    X, _ = labeled_rows(traces)
    X = np.tile(X, (10, 1))
    packed = _pykernels.pack_rows(X)
    rules = extract_rules("coloring", traces, dont_care=False)
    masks, values, owners = [], [], []
    for label, f in sorted(rules.items()):
        for t in f.terms:
            masks.append(t.mask)
            values.append(t.bits)
            owners.append(label)
    masks = np.array(masks, dtype=np.uint64)
    values = np.array(values, dtype=np.uint64)
    owners = np.array(owners, dtype=np.int64)

    samples = collect_termination_samples(traces)
    rows, offsets, taus = _pack(samples)
    cands = list(candidate_rules(7))
    # put the fitting rule last so every candidate is scanned
    cmask = np.array([sum(1 << i for i in idx) for idx, _ in cands][::-1], dtype=np.uint64)
    cval = np.array([sum(1 << i for i, v in t.items() if v) for _, t in cands][::-1], dtype=np.uint64)
    return {
        "pack_rows": lambda k: k.pack_rows(X),
        "match_labels": lambda k: k.match_labels(packed, masks, values, owners, 6),
        "first_fitting_rule": lambda k: k.first_fitting_rule(rows, offsets, taus, cmask, cval),
    }, X.shape[0], len(samples)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    loads, n_rows, n_samples = workloads()
    print(f"{n_rows} concept rows, {n_samples} termination samples")
    print(f"{'kernel':<20}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for name, fn in loads.items():
        py = best_of(lambda: fn(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<20}{py * 1e3:>14.2f}{'n/a':>14}{'':>10}")
            continue
        cy = best_of(lambda: fn(_ckernels), args.repeat)
        print(f"{name:<20}{py * 1e3:>14.2f}{cy * 1e3:>14.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
