"""
xprint: server-centric fingerprinting of encrypted app traffic
==============================================================

xprint identifies which app, and which in-app behaviour, produced a stretch
of encrypted network traffic using only packet side channels (timing,
direction and size). Flows are scored against per-app models and grouped
into activity windows, split into bursts whose URIs are predicted, and the
resulting URI sequences are matched against Canonical URI Maps learned for
every (app, platform, behaviour). Behaviours from platforms or versions never
seen in training are detected and refined using the URIs shared across
platforms.

The learners follow the sklearn estimator API. A deterministic synthetic
traffic generator makes every stage trainable and testable without captures.
"""
from .bundle import ModelBundle
from .config import PipelineConfig
from .ensemble import TreeEnsembleClassifier
from .evaluation import EvalReport, evaluate
from .exceptions import BundleError, ConfigError, LabelError, \
    SchemaMismatchError, TraceFormatError, XPrintError, XPrintWarning
from .experiments import run_experiment
from .logistic import LogisticGate
from .pipeline import infer, train
from .synthgen import ScenarioConfig, generate_corpus
from .traffic import TrafficTrace, load_traces, save_traces

from .__version__ import __version__

__all__ = ['ModelBundle', 'PipelineConfig', 'TreeEnsembleClassifier',
           'LogisticGate', 'EvalReport', 'ScenarioConfig', 'TrafficTrace',
           'evaluate', 'generate_corpus', 'infer', 'load_traces',
           'run_experiment', 'save_traces', 'train', 'XPrintError',
           'TraceFormatError', 'LabelError', 'SchemaMismatchError',
           'ConfigError', 'BundleError', 'XPrintWarning', '__version__']
