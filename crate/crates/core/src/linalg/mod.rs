pub mod banded;
pub mod sparse;

pub use banded::{fold_order, BandedLu};
pub use sparse::{axpy, dot, norm2, norm_inf, CsrMatrix, LinearOperator};
