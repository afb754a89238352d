//! Decoding strategies: greedy, nucleus, beam, fixed-weight contrastive
//! decoding and description-contrastive decoding.

pub mod beam;
pub mod contrast;
pub mod decode;
pub mod nucleus;

pub use beam::{beam_decode, BeamHypothesis, BeamOutput};
pub use contrast::{
    cd_distribution, cd_fixed_step, code_step, plausibility_head, ContrastStep, StepRecord,
};
pub use decode::{
    decode, decode_batch, CallCounts, DecodeError, DecodeJob, DecodeOutput, DecodeRng,
};
pub use nucleus::{nucleus_set, nucleus_step, sample_from};
