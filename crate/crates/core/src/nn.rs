//! Minimal from-scratch neural-network engine: dense stacks, GRU and LSTM
//! cells, backpropagation through time, Adam, and early stopping — sized
//! for 4-layer x 128-unit networks but used at desk scale in tests.

pub mod backward;
pub mod forward;
pub mod io;
pub mod params;
pub mod train;

pub use backward::{accumulate_sample, backward_batch, Gradients};
pub use forward::{forward_sequence, gru_cell, infer, lstm_cell};
pub use io::{load_model, model_from_json, model_to_json, save_model};
pub use params::{
    Arch, Dense, GruLayer, Layer, LstmLayer, ModelParams, Normalization, TrainMeta,
};
pub use train::{
    ablation_grid, evaluate, train, AblationRow, AblationSpec, Adam, EpochStats, TrainConfig,
    WindowSet,
};
