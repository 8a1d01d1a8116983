//! Connected EF1 divisions of a path of goods.
//!
//! Knife positions on half-integers form the vertices of a triangulated
//! simplex ([`simplex`]). Owners color vertices by virtual values
//! ([`coloring`]). A search finds a fully colored elementary simplex
//! ([`solver`]), and [`rounding`] turns it into a division. [`verify`] checks
//! it independently, and [`pipeline`] strings the stages together.

pub mod coloring;
pub mod generate;
pub mod instance;
pub mod matching;
pub mod pipeline;
pub mod rational;
pub mod rounding;
pub mod simplex;
pub mod solver;
pub mod verify;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/overview.md")]
    mod overview {}
    #[doc = include_str!("../../../book/src/instances.md")]
    mod instances {}
    #[doc = include_str!("../../../book/src/grid.md")]
    mod grid {}
    #[doc = include_str!("../../../book/src/coloring.md")]
    mod coloring {}
    #[doc = include_str!("../../../book/src/rounding.md")]
    mod rounding {}
    #[doc = include_str!("../../../book/src/solving.md")]
    mod solving {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
