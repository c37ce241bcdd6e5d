//! Robust estimator selection by minmax median-of-means (MOM) comparisons.
//!
//! Candidates are `(learner, training block)` pairs over a dyadic family of
//! subsamples. Every candidate's risk is computed once on a shared partition,
//! pairwise comparisons are medians of blockwise risk differences, and the
//! selected candidate minimizes its worst comparison.

pub mod bounds;
pub mod dataset;
pub mod ensemble;
pub mod experiment;
pub mod learners;
pub mod partition;
pub mod selection;
pub mod textfmt;
