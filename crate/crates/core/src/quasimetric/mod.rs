//! Quasimetric critic: encoder, projector, interval quasimetric head and
//! residual latent transition model.

mod critic;
mod iqe;

pub use critic::{
    CriticGrads, CriticSpec, HeadKind, HeadTape, QuasimetricCritic, TransitionTape,
};
pub use iqe::{iqe_component_distance, iqe_maxmean, IqeScratch};
