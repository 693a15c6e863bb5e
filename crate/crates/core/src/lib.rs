pub mod baselines;
pub mod config;
pub mod data;
pub mod detector;
pub mod error;
pub mod eval;
pub mod manager;
pub mod nn;
pub mod pipeline;
pub mod numfmt;
pub mod rnn;
pub mod sim;

pub use error::{Error, Result};
pub use sim::{FailureMode, Pose};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/networks.md")]
    mod networks {}
    #[doc = include_str!("../../../book/src/recurrent.md")]
    mod recurrent {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/manager.md")]
    mod manager {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
}
