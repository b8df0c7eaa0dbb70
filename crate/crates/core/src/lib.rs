pub mod cli;
pub mod coevolution;
pub mod intent;
pub mod lang;
pub mod metrics;
pub mod solver;
pub mod synthesis;
pub mod vcgen;
