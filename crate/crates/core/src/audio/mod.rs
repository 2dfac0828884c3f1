//! Audio buffers, mu-law codes, WAV files, and the synthetic corpus.

mod buffer;
mod corpus;
mod mulaw;
mod wav;

pub use buffer::{AudioBuffer, DEFAULT_SAMPLE_RATE};
pub use corpus::{synth_harmonic_corpus, CorpusSpec, SyntheticUtterance};
pub use mulaw::{
    compand, decode_sample, decode_table, encode_sample, encode_slice, expand, mu_law_decode,
    mu_law_encode, QuantizedSignal, LEVELS, MIDPOINT_CODE, MU,
};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav};
