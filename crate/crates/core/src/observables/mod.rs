//! From trajectories or images to measured quantities.

mod correlations;
mod fit;
mod moments;
mod shots;
mod squeezing;

pub use correlations::{g2_correlations, CorrelationMap, RadialBin, DEFAULT_WINDOW};
pub use fit::{min_squeezing_fit, CurveModel, MinimumFit, CURVE_DRAWS};
pub use moments::CollectiveMoments;
pub use shots::{shot_filter, synthetic_shots, Reading, ShotCounts, ShotMeta, ShotMode, ShotRecord, ShotSet};
pub use squeezing::{
    contrast_direct, contrast_ramsey_fit, xi2, xi2_differential, Estimate, RamseyGroup, SqueezingEstimate, CONTRAST_RESAMPLES,
    XI2_RESAMPLES,
};
