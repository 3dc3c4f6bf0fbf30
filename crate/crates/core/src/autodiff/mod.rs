//! Dense tensors and a tape-based reverse-mode differentiation engine.
//!
//! Operations are recorded on a [`Tape`] as they execute; [`Tape::backward`]
//! walks the records newest-first, which is a reverse topological order
//! because every record only refers to earlier ones.
//!
//! ```
//! use nvsgraph::autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.leaf(Tensor::from_vec(vec![3], vec![1.0, -2.0, 3.0]).unwrap());
//! let y = tape.relu(x).unwrap();
//! let loss = tape.sum(y).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[1.0, 0.0, 1.0]);
//! ```

mod ops;
mod tape;
mod tensor;

pub use ops::{ScatterEntry, ScatterPlan};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{read_dump, write_dump, Tensor};

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type: `f64` (default) or `f32`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    /// Element width in bytes.
    const BYTES: usize;

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }
}

impl Real for f64 {
    const BYTES: usize = 8;
}

impl Real for f32 {
    const BYTES: usize = 4;
}
