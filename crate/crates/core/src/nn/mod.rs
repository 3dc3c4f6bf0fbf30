//! Graph network layers: B-spline kernel convolution, batch normalization,
//! cluster pooling, fully connected and residual blocks.

mod basis;
mod batchnorm;
mod checkpoint;
mod conv;
mod fc;
mod params;
mod pool;
mod residual;

pub use basis::{bspline_basis, kernel_basis, Basis1d};
pub use batchnorm::{BatchNorm, BN_EPS, BN_MOMENTUM};
pub use checkpoint::{read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to, Checkpoint};
pub use conv::{spline_plan, SplineConv, SplineKernelSpec};
pub use fc::Linear;
pub use params::{Param, ParamId, ParamStore, Session};
pub use pool::{graph_pool, grid_slots, pad_to_grid, pool_topology, PoolMode, PoolSpec};
pub use residual::{ConvBlock, ResidualBlock};
