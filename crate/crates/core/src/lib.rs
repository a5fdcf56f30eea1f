pub mod rng;
pub mod scene;
pub mod distribution;
pub mod preproc;
pub mod capture;
pub mod postproc;
pub mod dsl;
pub mod optimize;
pub mod cli;
