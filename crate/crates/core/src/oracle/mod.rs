//! Synthetic ground truth and numerical property checks.

pub mod eigen;
pub mod props;
pub mod sim;

pub use eigen::{principal_direction, PrincipalDirection};
pub use props::{
    check_parent_centrality, check_parent_estimator, child_targets, pythagoras_residuals, subtree_diagnostic,
    uncertainty_error, verify_panel, verify_tree, EdgeResidual, PropositionReport, SubtreeDiagnostic,
    VerificationReport,
};
pub use sim::{business_days, simulate_regime_panel, ClusterSpec, RegimeModel};
