//! Reference estimators: exact cross-correlation, DCT-domain compressed
//! recovery, decimation, and sparsity profiles.

mod compressed;
mod transform;
mod xcorr;

pub use compressed::{dct_baseline, downsample_baseline, DownsampleMode};
pub use transform::{dct, dct_matrix, sparsity_profile, Domain, SparsityProfile};
pub use xcorr::{argmax_delay, xcorr_fd, xcorr_td, Correlation};
