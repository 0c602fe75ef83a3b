pub mod qsim;
pub mod money;
pub mod attacks;
pub mod vault;
pub mod netsim;
pub mod acceptance;
