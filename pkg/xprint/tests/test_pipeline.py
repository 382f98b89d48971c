import copy

import pytest

from ..bursts import UriPrediction, UriSequence
from ..evaluation import attribution_accuracy, evaluate
from ..exceptions import LabelError, SchemaMismatchError, XPrintWarning
from ..pipeline import (TracePrediction, _decide, _whole_trace_window,
                        group_instances, infer, infer_all, infer_with_details,
                        load_predictions, save_predictions, train)
from ..synthgen import BACKGROUND_APP
from ..traffic import Burst, Packet, TrafficTrace
from ._scenarios import O, make_flow, tiny_bundle, tiny_config, tiny_corpus


def test_group_instances():
    train_traces, _ = tiny_corpus()
    groups = group_instances(train_traces)
    assert len(groups) == 8
    assert all(app != BACKGROUND_APP for app, _, _ in groups)
    assert all(len(v) >= 6 for v in groups.values())


def test_training_needs_labels():
    flow = make_flow("f", [(0.0, O, 100, "/u")])
    with pytest.raises(LabelError):
        train(tiny_config(), [TrafficTrace("t", [flow])])
    partial = make_flow("g", [(0.0, O, 100, "/u"), (0.1, O, 90)],
                        app="alpha", platform="ios", behavior="b0")
    with pytest.raises(LabelError):
        train(tiny_config(), [TrafficTrace("t", [partial])])


def test_behaviours_below_min_instances_are_skipped():
    train_traces, _ = tiny_corpus()
    with pytest.warns(XPrintWarning, match="instances"):
        bundle = train(tiny_config(min_instances=1000, n_trees=3, epochs=50),
                       train_traces)
    assert bundle.cums == []


@pytest.mark.slow
def test_end_to_end():
    _, test_traces = tiny_corpus()
    predictions = infer_all(tiny_bundle(), test_traces)
    assert [p.trace_id for p in predictions] == \
        [t.trace_id for t in test_traces]
    report = evaluate(predictions, test_traces)
    assert report.app_recall > 0.5
    assert attribution_accuracy(predictions, test_traces) > 0.5


def test_prediction_invariants():
    _, test_traces = tiny_corpus()
    bundle = tiny_bundle()
    for trace in test_traces[:6]:
        prediction, details = infer_with_details(bundle, trace)
        assert set(prediction.flow_owners) == {f.flow_id for f in trace.flows}
        owned = [f for w in prediction.windows for f in w.flow_ids]
        assert len(owned) == len(set(owned))
        for w in prediction.windows:
            assert 0.0 <= w.score <= 1.0
            assert w.start <= w.end
            assert all(prediction.flow_owners[f] == w.app for f in w.flow_ids)
            assert w.is_unseen == (w.unrefined_score <= bundle.config.beta)
            flows = [f for f in trace.flows if f.flow_id in w.flow_ids]
            assert w.start == min(f.start_time for f in flows)
            assert w.end == max(f.end_time for f in flows)
        assert len(details.decisions) >= len(prediction.windows)
        for d in details.decisions:
            assert set(d.claimed) <= set(d.result.aligned_flows)
            assert not set(d.claimed) & set(d.fallback)
            assert set(d.claimed + d.fallback) <= set(d.members)


def test_inference_is_deterministic():
    _, test_traces = tiny_corpus()
    bundle = tiny_bundle()
    assert infer(bundle, test_traces[0]) == infer(bundle, test_traces[0])


@pytest.mark.parametrize("kwargs", [{"skip_stage1": True}, {"method": "bag"},
                                    {"refine": False}])
def test_inference_variants(kwargs):
    _, test_traces = tiny_corpus()
    prediction = infer(tiny_bundle(), test_traces[0], **kwargs)
    for w in prediction.windows:
        assert 0.0 <= w.score <= 1.0
        if kwargs.get("method") == "bag" or kwargs.get("refine") is False:
            assert not w.refined


def test_empty_trace():
    prediction = infer(tiny_bundle(), TrafficTrace("empty"))
    assert prediction == TracePrediction("empty")


def test_schema_mismatch():
    _, test_traces = tiny_corpus()
    stale = copy.copy(tiny_bundle())
    stale.schema_version = -1
    with pytest.raises(SchemaMismatchError):
        infer(stale, test_traces[0])


def test_predictions_round_trip(tmp_path):
    _, test_traces = tiny_corpus()
    predictions = infer_all(tiny_bundle(), test_traces[:3])
    path = tmp_path / "predictions.jsonl"
    save_predictions(predictions, path)
    assert load_predictions(path) == predictions


def test_malformed_predictions(tmp_path):
    path = tmp_path / "predictions.jsonl"
    path.write_text('{"trace_id": "t", "windows": [{"app": "alpha"}]}\n')
    with pytest.raises(ValueError, match=":1:"):
        load_predictions(path)


def _sequence(items, app="alpha"):
    predictions = []
    for k, (uri, confidence, domain) in enumerate(items):
        burst = Burst(f"{domain}-flow", domain,
                      (Packet(float(k), O, 100),))
        predictions.append(UriPrediction(burst, uri, confidence))
    return UriSequence(app, tuple(predictions))


def test_refinement_without_shared_evidence_keeps_unrefined_result():
    _, test_traces = tiny_corpus()
    bundle = tiny_bundle()
    window = _whole_trace_window("alpha", test_traces[0].flows)
    noise = _sequence([("/nowhere", 0.9, "api0.alpha.example")])
    decision = _decide(bundle, "alpha", window, noise, "map", True)
    assert decision.result.is_unseen
    assert not decision.result.refined
    assert decision.result == decision.unrefined
    assert decision.claimed == ()
    assert decision.fallback == tuple(window.retained_ids)


def test_refinement_rescores_on_shared_uris():
    _, test_traces = tiny_corpus()
    bundle = copy.copy(tiny_bundle())
    bundle.config = bundle.config.replace(beta=0.6)
    shared = bundle.partitions["alpha"]["b0"].shared
    cum = next(c for c in bundle.cums
               if (c.app, c.platform, c.behavior) == ("alpha", "android", "b0"))
    items = [(u, 0.9, d) for d, seq in cum.branches.items() for u in seq
             if u in shared]
    window = _whole_trace_window("alpha", test_traces[0].flows)
    decision = _decide(bundle, "alpha", window, _sequence(items), "map", True)
    assert decision.unrefined.is_unseen
    assert decision.result.refined and decision.result.is_unseen
    assert decision.result.behavior == "b0"
    assert decision.result.score == pytest.approx(1.0)
