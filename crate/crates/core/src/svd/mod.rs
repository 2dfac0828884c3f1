//! Band-split singular value profiles of activation matrices.

mod jacobi;
mod scan;

pub use jacobi::singular_values;
pub use scan::{
    effective_rank, split_activations, svd_scan, svd_scan_with, tail_length, Band, BandSpectrum, LayerScan,
    LayerSummary, SvdScan, TAIL_DB,
};
