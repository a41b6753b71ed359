pub mod dense;
pub mod dropout;
pub mod lstm;

pub use dense::{dense_forward, dense_stack, Activation, DenseLayer};
pub use dropout::{DropoutMode, DropoutSpec, MaskSource};
pub use lstm::{concat_states, encode_sequence, encoded_width, lstm_encode, lstm_stack, LstmLayer, LstmState};
