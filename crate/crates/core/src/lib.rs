//! Blind image deblurring with blur kernels represented as sparse
//! combinations of separable Gaussian atoms.
//!
//! The image step minimizes a total-variation regularized least-squares
//! problem by variable splitting with closed-form spectral updates; the
//! kernel step runs a proximal gradient method on the atom coefficients and
//! projects the result onto unit-sum rank-one coefficient matrices.

pub mod bench;
pub mod circulant;
pub mod dense;
pub mod dictionary;
pub mod error;
pub mod init;
pub mod kernel;
pub mod pipeline;
pub mod spectral;
pub mod tv;

pub use circulant::{apply_separable_blur, separable_psf, BlurSpectrum, GeneratingSequence, Image, SeparableBlur};
pub use dictionary::{build_dictionary, gaussian_sequence, synthesize_blur, GaussianDictionary, KernelCoefficients};
pub use error::{DeblurError, Result};
pub use pipeline::{restore_block, restore_image, restore_nonblind, RestorationConfig, RestorationResult};

