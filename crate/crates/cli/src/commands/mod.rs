pub mod bench;
pub mod compare;
pub mod flops;
pub mod run;
pub mod sweep;
