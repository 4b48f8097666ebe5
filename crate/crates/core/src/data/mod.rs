//! Multi-behavior interaction data: loading, synthesis, graphs, splits and sampling.

mod graph;
mod load;
mod sample;
mod split;
mod synth;
mod tensor;

pub use graph::{build_graphs, BehaviorGraph, BehaviorLayer};
pub use load::{load_interactions, write_interactions, DataFormat, LoadedData};
pub use sample::{sample_batch, TrainBatch, TrainTuple};
pub use split::{leave_one_out_split, Exclusion, SplitDataset, TestCase, EVAL_NEGATIVES};
pub use synth::{generate_synthetic, indicator_correlation, SynthSpec};
pub use tensor::{Event, IdMap, InteractionTensor};
