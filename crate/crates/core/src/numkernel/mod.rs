//! Minimal differentiable numeric kernel: dense f64 arrays, a recorded
//! operation tape with reverse-mode gradients, the handful of layers the
//! movement policy and discriminator need, and a finite-difference checker.

pub mod array;
pub mod gradcheck;
pub mod layers;
pub mod store;
pub mod tape;

pub use array::{dot, masked_softmax_slice, sigmoid, NumArray};
pub use gradcheck::check_gradients;
pub use layers::{
    dot_attention_infer, dot_attention_tape, embedding_lookup_infer, embedding_lookup_tape,
    GatSpec, LstmSpec, MlpSpec, OutAct,
};
pub use store::ParamStore;
pub use tape::{Gradients, Tape, Val};
