pub mod acceptance;
pub mod cgf;
pub mod dist;
pub mod dominance;
pub mod error;
mod linalg;
pub mod mas;
pub mod pref;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
    #[doc = include_str!("../../../book/src/dominance.md")]
    mod dominance {}
    #[doc = include_str!("../../../book/src/catalysts.md")]
    mod catalysts {}
    #[doc = include_str!("../../../book/src/preferences.md")]
    mod preferences {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
