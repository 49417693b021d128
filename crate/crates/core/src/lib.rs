//! Stochastic exponentials and logarithms of jump processes, jump-measure and
//! compensator functionals, Novikov–Kazamaki type criterion processes, and the
//! Föllmer change of measure, with Monte Carlo harnesses for checking them.

pub mod criteria;
pub mod density;
pub mod follmer;
pub mod functionals;
pub mod error;
pub mod jumplaw;
pub mod lab;
pub mod models;
pub mod numeric;
pub mod path;
pub mod rng;
pub mod stochexp;
pub mod stopping;
pub mod testfn;

pub use error::{Error, Result};
pub use numeric::Ext;
pub use path::{CadlagPath, Direction, JumpEvent, PathBuilder};
pub use testfn::TestFunction;
