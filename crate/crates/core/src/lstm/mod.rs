//! Embedding + stacked LSTM + dense head binary classifier with hand-derived
//! backpropagation through time.

pub mod cell;
pub mod network;

pub use cell::{
    lstm_cell_forward, lstm_layer_backward, lstm_layer_forward, LstmLayerParams, LstmStepState,
};
pub use network::{
    example_loss, load_checkpoint, network_backward, network_forward, predict, save_checkpoint,
    ForwardCache, Mode, NetworkConfig, NetworkParams,
};
