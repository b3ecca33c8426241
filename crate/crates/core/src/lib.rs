//! Contextual distributionally robust chance-constrained DC optimal power flow.

pub mod cvar;
pub mod datagen;
pub mod error;
pub mod evaluate;
pub mod grid;
pub mod lp;
pub mod methods;
pub mod uncertainty;
pub mod worst_case_cost;

pub use error::{Error, Result};
