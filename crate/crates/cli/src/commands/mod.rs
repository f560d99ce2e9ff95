pub mod bias_scan;
pub mod em_gamma;
pub mod genfit;
pub mod sample;

// Context salts for deriving independent sub-seeds from the master seed.
pub const SALT_DATA: u64 = 1;
pub const SALT_WARM_START: u64 = 2;
pub const SALT_TRAIN: u64 = 3;
pub const SALT_EVAL: u64 = 4;
