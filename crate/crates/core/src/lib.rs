//! Grooming-aware intent compilation for IP-over-flexgrid networks.
//!
//! User connectivity intents are compiled into a DAG of lightpath, spectrum
//! and equipment intents. Three compilers are provided: a sequential
//! baseline that routes and assigns spectrum separately, a joint multilayer
//! compiler minimising equipment cost, and a latency-driven variant.

pub mod catalog;
pub mod compile;
pub mod intent;
pub mod label;
pub mod multilayer;
pub mod search;
pub mod sim;
pub mod spectrum;
pub mod state;
pub mod topology;
pub mod units;
