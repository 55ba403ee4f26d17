pub mod budget;
pub mod calib;
pub mod compress;
pub mod eval;
pub mod fixture;
pub mod oracle;
