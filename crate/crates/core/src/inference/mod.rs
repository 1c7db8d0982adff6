//! Parameter learning, exact inference by junction tree, interventions on
//! mutilated graphs, posterior sampling and model averaging.

mod cpt;
mod factor;
mod intervene;
mod jtree;
mod posterior;

pub use cpt::{fit_cpts, CptSet, NodeCpt};
pub use intervene::{ace_do, do_marginal, mutilate};
pub use jtree::{JunctionTree, DEFAULT_CLIQUE_CAP};
pub use posterior::{
    averaged_posterior_ace, model_average_ace, model_weights, posterior_ace_samples, sample_cpts, AveragedAce, Weighting,
    DEFAULT_DRAWS,
};
