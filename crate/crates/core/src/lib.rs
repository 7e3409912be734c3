//! Re-identification risk assessment for survey-panel microdata.
//!
//! The crate measures how identifiable respondents are on a set of
//! quasi-identifying variables, both with listwise deletion of incomplete
//! rows (classic anonymity sets) and with a missing-tolerant match count in
//! which missing cells match any value. Risk is summarized as the
//! probability that a unique match found by an adversary linking a
//! population register to the data is correct.

pub mod anonymity;
pub mod attack_sim;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod matching;
pub mod panel_prep;
pub mod risk;
pub mod rowset;

pub use anonymity::{
    anonymity_sets, k_anonymity_audit, k_profile, listwise_delete, KProfile, QuasiIdentifier,
};
pub use dataset::{
    load_csv, read_csv, Dataset, Datum, Schema, Value, VariableKind, VariableRole, VariableSpec,
};
pub use error::{Error, Result};
pub use matching::{
    build_match_index, n_match_all, n_match_all_reference, n_match_row, MatchIndex, MatchOptions,
    MatchProfile,
};
pub use panel_prep::{
    estimate_birth_month, filter_background_only, merge_waves, BirthMonthEstimate, WaveSeries,
    YearMonth,
};
pub use risk::{
    risk_report, theta, theta_from_k, theta_from_match, Method, ReliabilityPolicy, RiskReport,
    ThetaEstimate,
};
