//! Data model of a category-learning experiment, drift-field assembly from
//! fixed and random effects, and inverse-probit category probabilities.

mod data;
mod effects;
mod prob;

pub use data::{Combo, Dataset, TrialRecord};
pub use effects::{assemble_drifts, DriftField, Field4, FixedEffects, RandomEffects};
pub use prob::{category_prob_mc, category_prob_quad, loglik};
