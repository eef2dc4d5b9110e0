pub mod error;
pub mod events;
pub mod gcm;
pub mod metrics;
pub mod multiplicity;
pub mod regress;
pub mod score;
pub mod seed;
pub mod sim;
pub mod stats;
pub mod survival;
pub mod teams;

pub use error::{Error, ErrorKind, Result};

// Keeps the book's code listings compiling and passing.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/residualization.md")]
    mod residualization {}
    #[doc = include_str!("../../../book/src/inference.md")]
    mod inference {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/survival.md")]
    mod survival {}
    #[doc = include_str!("../../../book/src/team-strength.md")]
    mod team_strength {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
