//! Tape-based reverse-mode automatic differentiation over small dense
//! matrices.
//!
//! Every value is a row-major matrix ([`Tensor`]). A forward pass records
//! operations on a [`Tape`]; [`Tape::backward`] then walks the tape in
//! reverse and fills in gradients for every node that depends on a leaf.
//!
//! Trainable arrays live in a [`ParamStore`] outside any tape. A
//! [`Session`] binds parameters onto a fresh tape lazily, so a forward pass
//! only copies the parameters it touches, and [`Bindings::accumulate_into`]
//! folds the tape gradients back into the store for the [`Adam`] step.
//!
//! ```
//! use coguide_autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let w = tape.leaf(Tensor::scalar(0.0));
//! let y = tape.sigmoid(w).unwrap();
//! tape.backward(y).unwrap();
//! assert_eq!(tape.grad(w).unwrap()[0], 0.25);
//! ```

mod adam;
mod error;
mod gradcheck;
mod params;
mod scalar;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use error::AutodiffError;
pub use gradcheck::{grad_check, GradCheckReport, ParamCheck, Tolerance};
pub use params::{Bindings, Init, Param, ParamId, ParamStore, Session};
pub use scalar::Real;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, AutodiffError>;
