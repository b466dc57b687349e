pub mod config;
pub mod engine;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod inclusion;
pub mod operators;
pub mod oracles;
pub mod schedules;
pub mod vector_space;
