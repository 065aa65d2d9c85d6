//! Colored branching processes on finite color alphabets, exponential line
//! counting, and the Hausdorff dimension of the random fractals they generate.
//!
//! The toolkit is organized around a finite alphabet `X = {1, ..., r}` of
//! colors. A *line* is a word of colors; a *measure* is a nonnegative weight
//! vector on `X`. Everything else is built from three analytic primitives:
//!
//! ```text
//! spectral potential   lambda(phi, mu) = ln mu[e^phi]
//! Kullback action      rho(nu, mu)     = sum_i nu(i) ln(nu(i) / mu(i))
//! Billingsley entropy  S(nu, theta)    = sum nu ln nu / sum nu ln theta
//! ```
//!
//! The modules, bottom up:
//!
//! * [`alphabet`] - measures, functions, and total-variation neighborhoods
//!   on the color alphabet.
//! * [`rate`] - spectral potential, tilted measures, Kullback action, and
//!   the Legendre duality between them.
//! * [`galton_watson`] - scalar Galton-Watson processes: generating
//!   functions, extinction probabilities, martingale normalization.
//! * [`branching`] - colored branching processes evolved as generation
//!   histograms keyed by color counts, plus explicit trees for small runs.
//! * [`mcmillan`] - exact and Monte Carlo line counting: the number of lines
//!   whose empirical spectrum falls in a neighborhood grows at the
//!   exponential rate dictated by the Kullback action.
//! * [`dimension`] - cylinder metrics, Billingsley and Billingsley-Kullback
//!   entropies, Moran and Bowen equations, pointwise and covering dimension
//!   estimates.
//! * [`blocks`] - block selections inside explicit trees and the steered
//!   sampler that drives a single line toward a prescribed spectrum.
//! * [`rng`] - the deterministic stream-splitting scheme shared by every
//!   Monte Carlo entry point.
//!
//! All Monte Carlo routines are deterministic functions of their seeds, so
//! every experiment can be replayed byte for byte.

#![forbid(unsafe_code)]

pub mod alphabet;
pub mod blocks;
pub mod branching;
pub mod dimension;
pub mod error;
pub mod galton_watson;
pub mod mcmillan;
pub mod rate;
pub mod rng;

pub use error::{Error, Result};
