//! Network revenue management with Markov-modulated arrivals: exact and
//! LP bounds, bid-price policies, assortment offers, and simulation.

pub mod assortment;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod simulate;
pub mod verify;

pub use assortment::{AssortBidPriceTable, ChoiceModel};
pub use error::{NrmError, Result};
pub use lp::{AdpWeights, LinearProgram, LpSolution, LpStatus};
pub use model::{bundle_size_l, validate, CustomerType, Instance, MarkovArrival, Resource, ValidationReport};
pub use oracle::DpTable;
pub use policies::{BidPriceTable, Decision, Policy};
pub use simulate::{SimResult, Trajectory};
