//! Metrics and reporting: black-box success rate, FID, service confidence,
//! JSON reports and comparison grids.

mod api;
mod fid;
mod font;
mod grid;
mod report;

use crate::embedding::{cosine_similarity, embed, FaceEmbedder, VerificationThreshold};
use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub use api::{api_confidence, mean_api_confidence, VerificationServiceClient};
pub use fid::{fid, FeatureExtractor, RandomProjectionExtractor};
pub use grid::{comparison_grid, GridLayout};
pub use report::{EvaluationReport, ModelScore, REPORT_SCHEMA_VERSION};

/// Holdout-model cosine similarity for each `(protected, target)` pair.
pub fn pair_similarities(
    protected: &[ImageTensor],
    targets: &[ImageTensor],
    holdout: &dyn FaceEmbedder,
) -> Result<Vec<f64>> {
    if protected.len() != targets.len() {
        return Err(Error::param(format!(
            "{} protected images but {} targets",
            protected.len(),
            targets.len()
        )));
    }
    protected
        .iter()
        .zip(targets)
        .map(|(p, t)| cosine_similarity(&embed(holdout, p)?, &embed(holdout, t)?))
        .collect()
}

/// Fraction of pairs the holdout model accepts as the same identity.
/// Every pair counts in the denominator; embedding failures are errors.
pub fn attack_success_rate(
    protected: &[ImageTensor],
    targets: &[ImageTensor],
    holdout: &dyn FaceEmbedder,
    thr: &VerificationThreshold,
) -> Result<f64> {
    let sims = pair_similarities(protected, targets, holdout)?;
    Ok(success_rate_from_similarities(&sims, thr.tau))
}

pub fn success_rate_from_similarities(sims: &[f64], tau: f64) -> f64 {
    if sims.is_empty() {
        return 0.0;
    }
    sims.iter().filter(|s| **s >= tau).count() as f64 / sims.len() as f64
}
