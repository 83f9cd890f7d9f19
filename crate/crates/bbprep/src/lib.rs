//! Two-stage tensor-network optimization of bang-bang circuits that prepare
//! transverse-field Ising ground states.
//!
//! Stage one optimizes the 2N rotation angles of a translationally
//! invariant circuit directly on the infinite chain with an iTEBD engine
//! ([`itebd`]). Stage two embeds the infinite-lattice angles on a finite
//! lattice, where they stay optimal in the bulk, and re-optimizes only the
//! gates inside the causal cone of the boundary ([`cone`], [`fmps`]).
//! Exact references come from a free-fermion solution ([`oracle`]) in 1D
//! and from a statevector engine with a sparse eigensolver ([`sv`]) at
//! small sizes and in 2D.

pub mod cone;
pub mod fmps;
pub mod itebd;
pub mod linalg;
pub mod minimize;
pub mod model;
pub mod optimize;
pub mod oracle;
pub mod record;
pub mod sv;

pub mod acceptance;
pub mod cli;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("lattice too large: {n} sites exceeds the statevector cap of {cap}")]
    LatticeTooLarge { n: usize, cap: usize },
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("degenerate dominant transfer-matrix eigenvalue (|l2/l1| = {0})")]
    DegenerateSpectrum(f64),
    #[error("quadrature did not reach the requested tolerance (best {0:.3e})")]
    QuadratureFailure(f64),
    #[error("no bracket for the scalar minimum within (0, {0}]")]
    NoBracket(f64),
    #[error("field profile value {g} outside the angle library range [{lo}, {hi}]")]
    LibraryRange { g: f64, lo: f64, hi: f64 },
    #[error("missing fixture {path}; generate it with `{hint}`")]
    MissingFixture { path: String, hint: String },
    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

extern "C" {
    fn openblas_set_num_threads(n: std::os::raw::c_int);
}

/// Pin the linked BLAS to one thread.
///
/// The dense kernels here are small (at most `2D x 2D` with `D <= 40`), so
/// threaded BLAS only adds synchronization overhead and makes reductions
/// order-dependent. Engines call this lazily; it is cheap and idempotent.
pub fn init_blas() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| unsafe {
        openblas_set_num_threads(1);
    });
}
