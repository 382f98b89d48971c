"""XPRINT

Benchmark of end-to-end behaviour identification on interleaved traces as
the number of trees per ensemble grows. Reports scores and training and
inference times.
"""

from time import time
import os

import pandas as pd

from xprint import PipelineConfig, ScenarioConfig, evaluate, generate_corpus, \
    infer, train

if __name__ == '__main__':

    print("\nXPRINT\n")
    print("Behaviour identification on interleaved synthetic traces.\n")
    print("Available CPUs: %i\n" % os.cpu_count())

    SEED = 2017
    scenario = ScenarioConfig(rng_seed=SEED)
    train_traces, test_traces = generate_corpus(scenario)

    rows = []
    print('%6s | %8s | %8s | %8s | %8s' % ('trees', 'f1', 'fnr', 'train',
                                          'infer'))
    for n_trees in (10, 25, 50, 100):
        config = PipelineConfig(n_trees=n_trees, seed=SEED, n_jobs=-1,
                                scenario=scenario)
        t0 = time()
        bundle = train(config, train_traces)
        t1 = time() - t0
        predictions = [infer(bundle, t) for t in test_traces]
        t2 = time() - t0 - t1
        report = evaluate(predictions, test_traces)
        rows.append({"n_trees": n_trees, "f1": report.f1, "fnr": report.fnr,
                     "train_seconds": t1, "infer_seconds": t2})
        print('%6i | %8.4f | %8.4f | %7.1fs | %7.1fs' % (
            n_trees, report.f1, report.fnr, t1, t2), flush=True)

    results = pd.DataFrame(rows)
    results.to_csv("interleaved_benchmark.csv", index=False)
