//! Linear relaxation schemes for the time-fractional Allen-Cahn and
//! Cahn-Hilliard equations.
//!
//! The Caputo derivative is discretized with the L1+ formula on graded
//! meshes; the nonlinearity enters through an auxiliary variable
//! `r ~ phi^2 - 1 - S` that lives on half steps and is advanced by an
//! algebraic update. Each step is one linear solve, done matrix-free with
//! BiCGStab and a Fourier preconditioner on a periodic grid.

pub mod energy;
pub mod error;
pub mod format;
pub mod grid;
pub mod history;
pub mod initial;
pub mod krylov;
pub mod mms;
pub mod model;
pub mod quadrature;
pub mod simulation;
pub mod stepper;
pub mod time_mesh;

pub use energy::DiagnosticsRecord;
pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use history::HistoryBuffer;
pub use krylov::SolveStats;
pub use model::{Model, ModelParams};
pub use stepper::{init_state, update_r, Forcing, SolverState, SourceSpec, StepOptions, StepReport, Stepper};
pub use time_mesh::{kernel_oracle, kernel_row, KernelRow, TimeMesh};
