//! Small dense-network toolkit shared by both agents.
//!
//! Everything is `f64`. Network parameters live in one flat vector per
//! network so that optimizers, target averaging and checkpointing all work
//! on plain slices.

mod adam;
mod dist;
mod init;
mod matrix;
mod mlp;
mod rng;

pub use adam::AdamState;
pub(crate) use dist::squash_with_noise;
pub use dist::{
    diag_gaussian_entropy, gaussian_logprob, squash_log_correction, squashed_gaussian_sample,
    SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use init::{orthogonal_init, xavier_uniform_init};
pub use matrix::Matrix;
pub use mlp::{Activation, ForwardCache, Mlp};
pub use rng::RngStream;

/// `target <- tau * online + (1 - tau) * target`, elementwise.
pub fn polyak_average(target: &mut [f64], online: &[f64], tau: f64) -> crate::Result<()> {
    crate::error::check_len("polyak_average", target.len(), online.len())?;
    if tau == 1.0 {
        target.copy_from_slice(online);
        return Ok(());
    }
    for (t, &o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}
