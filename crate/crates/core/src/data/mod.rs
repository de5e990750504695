//! Image decoding, labelled indexes, seeded batching and the synthetic corpus.

mod index;
pub mod ppm;
pub mod rawt;
mod resize;
pub mod synth;

pub use index::{
    batches, epoch_order, load_index, load_resized, split, Batch, BatchStream, Dataset,
    DatasetIndex, ImageSource, Record, READ_AHEAD,
};
pub use resize::resize_bilinear;
pub use synth::synth_generate;
