//! Outcome statistics: negative binomial LOS regression, pairwise group
//! contrasts, and confounder-balance similarity analysis.

pub mod contrast;
pub mod design;
pub mod nb;
pub mod similarity;

pub use contrast::{pairwise_los_test, PairwiseLOSTest};
pub use design::{build_design, DesignMatrix};
pub use nb::{fit_nb, fit_nb_warm, NBRegressionFit};
pub use similarity::{
    factor_distribution, pcc, pcc_pvalue, similarity_report, Factor, FactorDistribution,
    SimilarityResult,
};
