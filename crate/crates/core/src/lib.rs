//! Cramér–Rao bounds for source localization from rate-limited, lossy
//! compressed sensor observations.
//!
//! The crate covers array geometry, piecewise-constant spectra, Gaussian
//! reverse water-filling, the Whittle Fisher information of the compressed
//! array (numerical and closed form) and a Monte-Carlo score oracle.

pub mod closedform;
pub mod compression;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod montecarlo;
pub mod quadrature;
pub mod spectra;
pub mod whittle;

pub use closedform::{
    band_info_terms, compare_schemes, crlb_ratio, crlb_two_band, fim_rate_band_selective, fim_rate_two_band,
    selective_info_terms, BandInfoTerms, Scheme, SchemeComparison, SelectiveInfoTerms,
};
pub use compression::{
    band_selective_channel, band_selective_point, classify_regime, critical_rate, distortion_of_level,
    rate_of_level, rd_channel, solve_water_level, two_band_operating_point, two_band_rd_channel, BandChannel,
    ChannelBand, ChannelKind, OperatingPoint, Rate, RegimeLabel, SelectivePoint,
};
pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{geometry_matrix, GeometryMatrix, Scenario};
pub use montecarlo::{
    draw_bin_snapshots, empirical_fim, monte_carlo_fim, normalized_errors, scaling_study, simulate_snapshots,
    McConfig, McEstimate, ScalingStudy, SnapshotBatch,
};
pub use quadrature::QuadratureScheme;
pub use spectra::{
    compressed_csd, steering_vector, uncompressed_csd, ArraySpectrum, CMatrix, CVector, CompressedArray,
    PiecewisePsd, TwoBandSpectrum,
};
pub use whittle::{
    crlb_from_fim, csd_derivative, fim_rate_quadrature, fim_rate_sherman_morrison, information_weight,
    trace_term_dense, trace_term_sherman_morrison, CrlbReport, FimMethod, FimRate, QuadratureSpec,
};
