//! Diffusion analytics over post-view record corpora.
//!
//! The crate is organised around the record format ([`records`]) and the
//! three analyses built on top of it:
//!
//! * [`cascade`] and [`influence`]: Independent Cascade spread estimation and
//!   key-user selection (voting over sampled diffusion trees, lazy greedy,
//!   brute force).
//! * [`backbone`]: region-pair demand, day-type traffic prediction and server
//!   placement (reverse greedy, forward greedy, exhaustive).
//! * [`geo`]: region resolution, diffusion matrices, homophily and
//!   floating-population projection through a Dirichlet process mixture.
//!
//! All randomness is driven by explicit 64-bit seeds. Parallel work is split
//! into index-addressed units whose seeds are derived with [`rng::mix_seed`],
//! so results never depend on the worker count.

pub mod backbone;
pub mod calendar;
pub mod cascade;
pub mod diffusion;
pub mod geo;
pub mod influence;
pub mod records;
pub mod rng;

mod par;
