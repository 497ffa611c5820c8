"""mgtkit: context-aware enhancement of metric-based MGT detectors.

The toolkit layers two stages on top of a family of per-token metric
detectors: a chain-MRF mean-field calibration of token beliefs and a
rule-support reasoning branch over latter-part score statistics, fused
into a single detection score, plus a split/seed evaluation harness.
"""

__version__ = "0.1.0"

from .calibration import (
    BeliefMatrix,
    CalibrationParams,
    ChainAdjacency,
    beta,
    build_adjacency,
    enhance,
    final_calibration,
    mean_field_calibrate,
)
from .detectors import (
    DetectorMethod,
    DetectorOutput,
    METHODS,
    aggregate_binoculars,
    aggregate_dna,
    aggregate_mean,
    aggregate_zscore,
    detect_base,
    method_by_name,
    token_scores,
)
from .evaluation import (
    ExperimentConfig,
    MetricReport,
    SplitSpec,
    auroc,
    khop_mad,
    positionwise_mad,
    run_experiment,
    split,
    stat_distributions,
    tpr_at_fpr,
)
from .pipeline import (
    BatchScore,
    FittedPipeline,
    PipelineConfig,
    detect,
    detect_batch,
    fit,
    load_pipeline,
    save_pipeline,
)
from .records import (
    Corpus,
    TokenScoreRecord,
    UnaryProbabilities,
    load_corpus,
    normalize_scores,
    parse_corpus,
    save_corpus,
    serialize_corpus,
)
from .rules import (
    Rule,
    RuleModel,
    StatVector,
    SupportTable,
    ThresholdGrid,
    assign_atom,
    fit_atom_support,
    fit_rule_model,
    fit_thresholds,
    generate_rule,
    global_statistics,
    rule_prior,
    rule_probabilistic,
    rule_support,
)
from .synth import SequenceParams, SynthSpec, control_spec, default_spec, synth_corpus
