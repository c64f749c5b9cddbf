//! Activation-sharing multi-resolution coordinate networks.
//!
//! A coordinate network maps grid coordinates to signal values. This crate
//! implements a sinusoidal MLP backbone plus a multi-resolution variant that
//! decomposes each coordinate into per-level digits under a mixed-radix
//! partition scheme. Because every layer's activation depends only on a
//! coarse prefix of the coordinate, the full-grid forward computes each layer
//! once per partition cell and shares the result across all finer samples —
//! per-sample inference cost stays near constant as depth grows, while
//! capacity grows with depth as usual.
//!
//! The crate is organized around:
//!
//! - [`coords`]: mixed-radix partition schemes and coordinate decomposition
//! - [`tensor`]: dense tensors and a small reverse-mode tape
//! - [`model`]: the sinusoidal backbone and the multi-resolution model
//! - [`profiler`]: analytic multiply-accumulate and parameter accounting
//! - [`train`]: MSE fitting with Adam and cosine annealing
//! - [`metrics`]: PSNR, SSIM, IoU
//! - [`dataio`]: PGM/PPM images, WAV audio, raw grid containers
//!
//! ```
//! use asmr::coords::PartitionScheme;
//! use asmr::model::AsmrModel;
//! use asmr::profiler::mac_asmr;
//!
//! // a 16x16 image split into 2x2 cells at each of 4 levels per axis
//! let scheme = PartitionScheme::new(
//!     &[vec![2, 2, 2, 2], vec![2, 2, 2, 2]],
//!     &[16, 16],
//! )?;
//! let model = AsmrModel::init(&[2, 32, 32, 32, 1], 30.0, scheme.clone(), 0)?;
//!
//! // full-grid inference via activation sharing
//! let image = model.forward_shared(None)?;
//! assert_eq!(image.shape(), &[256, 1]);
//!
//! // the amortized cost is far below the naive per-sample cost
//! let report = mac_asmr(model.widths(), &scheme)?;
//! assert!(report.per_sample() < 600.0);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod coords;
pub mod dataio;
pub mod metrics;
pub mod model;
pub mod profiler;
pub mod tensor;
pub mod train;

/// The user guide (`book/`), embedded chapter by chapter so every example in
/// it compiles and runs as a doc-test.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/coordinates.md")]
    pub mod coordinates {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/profiling.md")]
    pub mod profiling {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/formats.md")]
    pub mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}

pub use coords::PartitionScheme;
pub use dataio::Grid;
pub use metrics::{iou, psnr, ssim, QualityReport};
pub use model::{AsmrModel, InstanceModulation, SirenModel};
pub use profiler::{mac_asmr, mac_siren, MacReport};
pub use train::{fit_asmr, fit_siren, Batch, FitResult, TrainConfig};
