"""XPRINT

Benchmark of burst-level URI identification as the burst gap threshold
varies, with the time spent training each URI classifier.
"""

from time import time
import os

import pandas as pd

from xprint import PipelineConfig, ScenarioConfig, generate_corpus
from xprint.bursts import train_uri_classifier, uri_f1
from xprint.experiments import DELTA_SWEEP

if __name__ == '__main__':

    print("\nXPRINT\n")
    print("Burst gap threshold sweep on a synthetic scenario.\n")
    print("Scoring metric: macro F1 over URIs.\n")
    print("Available CPUs: %i\n" % os.cpu_count())

    SEED = 2017
    config = PipelineConfig(n_trees=50, seed=SEED,
                            scenario=ScenarioConfig(rng_seed=SEED))
    train, test = generate_corpus(config.scenario)

    rows = []
    print('%8s | %8s | %8s | %8s' % ('app', 'delta_t', 'f1', 'fit'))
    for app in config.scenario.apps:
        train_flows = [f for t in train for f in t.flows if f.app == app]
        test_flows = [f for t in test for f in t.flows if f.app == app]
        for delta_t in DELTA_SWEEP:
            t0 = time()
            model = train_uri_classifier(train_flows, delta_t,
                                         config.forest_params(), SEED)
            t1 = time() - t0
            score = uri_f1(test_flows, model, delta_t)
            rows.append({"app": app, "delta_t": delta_t, "f1": score,
                         "fit_seconds": t1})
            print('%8s | %8.2f | %8.4f | %7.1fs' % (app, delta_t, score, t1),
                  flush=True)

    scores = pd.DataFrame(rows)
    print('\nMEAN F1')
    print(scores.groupby("delta_t")["f1"].mean().to_string())
