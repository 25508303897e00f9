//! Deterministic simulator and agent library for cooperative coded
//! caching at small base stations.
//!
//! Contents are erasure-coded into fragments; each of `C` contents may be
//! cached at one of `l_max = ceil(L/d)` levels across `K`-sized caches, a
//! user is served jointly by `d` stations, and the macro station delivers
//! whatever fraction the caches cannot cover. Popularity follows a Markov
//! chain over a finite candidate set; agents (value iteration, tabular
//! Q-learning, a linear approximator, and a myopic baseline) pick the
//! per-slot caching vector to maximize traffic served without backhaul.

pub mod actions;
pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod model;
pub mod serving;

pub use error::{Error, Result};
pub use model::{CachingAction, PopularityProfile, RequestBatch, SystemParams};
