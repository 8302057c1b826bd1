//! Query answering under access policies and per-unit budget ledgers.

mod answerer;
mod config;
mod interaction;
mod label_split;
mod ledger;
mod policy;

pub use answerer::{
    answer_exact, answer_gaussian, answer_laplace, gaussian_sigma, laplace_noise, laplace_scale,
    laplace_tail, Answerer,
};
pub use config::{AnswererConfig, MechanismConfig};
pub use interaction::{
    run_interaction, write_rejection_csv, Exchange, Interaction, Mechanism, Outcome, Rejection,
};
pub use label_split::{combine_split, label_split_answer};
pub use ledger::{charge, BudgetLedger, UnitSpend, CAP_TOLERANCE};
pub use policy::{admit, AccessPolicy, PolicyKind, RejectReason, GLOBAL_UNIT};
