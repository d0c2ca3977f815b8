//! Nonlinear frequency-division multiplexing over optical fiber.
//!
//! The crate covers the whole burst-mode NIS transmission chain: QPSK
//! bursts, root-raised-cosine shaping, mapping onto the continuous nonlinear
//! spectrum, backward and forward NFTs, split-step fiber propagation with
//! distributed ASE, and the EDC/DBP/AWGN reference systems, plus a seeded
//! Monte Carlo harness for Q-factor sweeps.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod error;
pub mod fiber;
pub mod fourier;
pub mod harness;
pub mod metrics;
pub mod modem;
pub mod nft;
pub mod random;
pub mod signal;
pub mod spectrum;

pub use error::{Error, Result};
pub use fiber::{FiberParams, NormalizationScheme};
pub use signal::{make_grid, ComplexSignal, UnitsMode};
pub use spectrum::{LambdaGrid, NonlinearSpectrum, ScatteringPair};
