//! Small fixed-precision tensor kernel: f64 tensors, a recording executor
//! with reverse-mode gradients, a portable RNG, and byte-exact storage.

mod exec;
mod gradcheck;
mod params;
mod rng;
mod sample;
mod store;
mod tape;
mod tensor;

pub use exec::{Exec, Val, ValueExec};
pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{ParamId, ParamSet, Parameter};
pub use rng::RngState;
pub use sample::{mask_renormalize, sample_categorical, sample_from_logits, SampleError};
pub use store::{
    load_params, load_params_from, read_tensors, read_tensors_from, save_params, save_params_to,
    write_tensors, write_tensors_to, StoreError,
};
pub use tape::{NodeId, Tape};
pub use tensor::{log_sum_exp, matvec, matvec_transposed, softmax, Tensor};
