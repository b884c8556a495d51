pub mod automata;
pub mod cli;
pub mod config;
pub mod eftypes;
pub mod error;
pub mod fvc;
pub mod gen;
pub mod logic;
pub mod optrees;
pub mod preservation;
pub mod reduce;
pub mod structures;

pub use error::{Error, Result};
