//! Adaptations driven by the adversarial classifier: drop drifting
//! features, choose a test-like validation split, or reweight training rows,
//! then fit the outcome model accordingly.

mod matching;
mod outcome;
mod selection;
mod weighting;

pub use matching::{psm_validation_select, MatchConfig, MatchResult, PROPENSITY_ROW};
pub use outcome::{train_outcome, Adaptation, AdaptationPlan, OutcomeModel, ValidationSource};
pub use selection::{auto_feature_selection, FeatureSelectionConfig, SelectionIteration, SelectionTrace};
pub use weighting::{ipw_weight, ipw_weights, WeightVector, DEFAULT_P_MAX, NEAR_ZERO_WEIGHT};
