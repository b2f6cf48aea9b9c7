//! Tree-structured predictive distributions over a panel of signals.
//!
//! Signals are normalized one side at a time, linked by squared co-moment
//! similarity into a rooted maximum-similarity spanning tree, and the target
//! is attached to the node it co-moves with most. Predictions condition the
//! next-period target on the signals along the path from that node to the
//! root, one level at a time.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); tree
//! construction only needs [`Weight`], so exact rationals work as well. The
//! aliases below fix the common choices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attachment;
pub mod backtest;
pub mod config;
pub mod error;
pub mod export;
pub mod histogram;
pub mod oracle;
pub mod panel;
pub mod predictor;
pub mod scalar;
pub mod similarity;
pub mod tree;

pub use attachment::{
    attach_target, attach_to_tree, attachment_scores, covariance_scores, dominant_index, path_to_root, Attachment,
    AttachmentConfig, AttachmentPath, DemeanPolicy,
};
pub use backtest::{
    build_tree, compound_monthly, evaluation_rows, information_coefficient, monthly_series, pearson, run_backtest,
    AttachmentEvent, BacktestConfig, DayRecord, InformationCoefficient, LogRow, MonthlyPoint, PredictionLog,
    TreeEpoch, TreeRefresh,
};
pub use config::{parse_kv, PipelineConfig};
pub use error::{Error, Result};
pub use histogram::{
    conditioning_values, estimate_joint, observation_rows, Axis, Conditioning, EstimationWindow, HistogramConfig,
    JointHistogram, RangePolicy,
};
pub use panel::{
    load_panel, one_sided_normalize, one_sided_normalize_about, write_panel, FillPolicy, NormalizedSlice, RowWindow,
    Side, SignalPanel,
};
pub use predictor::{
    conditional_slice, confidence_interval, effective_estimate, level_conditionals, mixture, predict,
    ConditionalDist, LevelEstimate, MixtureEstimate, MixtureMode, Prediction, PredictorConfig,
};
pub use scalar::{Scalar, Weight};
pub use similarity::{panel_similarity, similarity_matrix, SimilarityMatrix, SliceSet};
pub use tree::{
    candidate_trees, prim_rooted_mst, select_widest_tree, tree_width_score, width_score, RootedTree, WidthMetric,
};

/// Exact rational weights for tree construction.
pub type Rational = num_rational::Ratio<i64>;

pub type Panel = SignalPanel<f64>;
pub type Panel32 = SignalPanel<f32>;
pub type Similarity = SimilarityMatrix<f64>;
pub type ExactSimilarity = SimilarityMatrix<Rational>;
pub type Tree = RootedTree<f64>;
pub type ExactTree = RootedTree<Rational>;
pub type Log = PredictionLog<f64>;
pub type Joint = JointHistogram<f64>;
pub type Conditional = ConditionalDist<f64>;
