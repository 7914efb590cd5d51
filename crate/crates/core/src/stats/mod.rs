//! Binomial interval estimation and the association / distribution-fit
//! measures used to check the binomial assumption on sampled mutants.

pub mod association;
pub mod interval;
mod special;

pub use self::association::{
    correlated_binomial_distribution, correlated_binomial_pmf, ess, fit_correlated_binomial, g2, odds_ratio, quartiles, yules_q, Contingency, FitGrid,
    FitResult,
};
pub use self::interval::{clopper_pearson, normal_quantile, wilson, ConfidenceInterval};
pub use self::special::{binomial_pmf, ln_gamma, regularized_beta};
