"""Model operations control plane: gate, deploy, monitor, diagnose.

Pre-deploy readiness checks run a performance predictor over unlabeled
production windows; deployment routes traffic through a champion/challenger
bandit with automatic rollback; monitoring alerts only when predicted
accuracy or a KPI drops; diagnosis contrasts good and bad transactions to
rank suspect model behaviors. A deterministic traffic simulator with a
held-out label oracle validates the whole loop end to end.
"""

from .analytics import (
    KpiAggregate,
    SplitRule,
    SuspectReport,
    contrast_good_bad,
    correlate,
    kpi_aggregate,
    low_kpi_slice,
    wilson_interval,
)
from .calibration import (
    Calibrator,
    CorrectnessSample,
    apply,
    apply_batch,
    calibration_metrics,
    fit_histogram_binning,
    fit_platt,
)
from .canary import (
    BanditArm,
    CanaryConfig,
    CanaryState,
    decide,
    force_decision,
    record_reward,
    route,
)
from .drift import (
    Alert,
    DriftReport,
    MonitorThresholds,
    ReferenceProfile,
    build_reference_profile,
    evaluate_window,
    ks_statistic,
    prior_shift_tv,
    psi,
)
from .errors import (
    AmbiguousCorrelationError,
    DegenerateLabelsError,
    InsufficientDataError,
    ModelgateError,
    ProvenanceError,
    ValidationError,
)
from .events import EventStore, JoinedTransaction, KpiEvent, ScoredEvent, Window
from .models import ClassifierModel, Dataset, TrainConfig, accuracy, predict_proba, train_classifier
from .perf import (
    CalibratedMeanPredictor,
    MetaFeatureVector,
    MetaModel,
    MetaModelPredictor,
    PredictedAccuracy,
    bootstrap_interval,
    extract_meta_features,
    meta_features_batch,
    predict_accuracy_calibrated,
    predict_accuracy_meta,
    train_meta_model,
)
from .pipeline import GateReport, PipelineConfig, gate, run_monitor_cycle, run_scenario
from .scenario import Scenario, load_scenario, parse_scenario
from .sim import KpiEmitter, generate_dataset, generate_stream, oracle_accuracy

__version__ = "0.1.0"
