use thiserror::Error;

/// Errors produced anywhere in the repair pipeline.
#[derive(Debug, Error)]
pub enum RepairError {
    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    Shape {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("nnet parse error at line {line}: {message}")]
    NnetParse { line: usize, message: String },

    #[error("invalid property: {0}")]
    InvalidProperty(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty sample set: {0}")]
    EmptySampleSet(&'static str),

    #[error("spec `{spec_id}`: only {found} of {required} positive samples found after exhausting the delta schedule")]
    PositivesUnavailable {
        spec_id: String,
        found: usize,
        required: usize,
    },

    #[error("negative correction impossible: {0}")]
    CorrectionImpossible(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("duplicate neuron index (layer {layer}, neuron {neuron})")]
    DuplicateNeuron { layer: usize, neuron: usize },

    #[error("neuron index (layer {layer}, neuron {neuron}) out of range")]
    NeuronOutOfRange { layer: usize, neuron: usize },

    #[error("synthetic construction failed: {0}")]
    Synthesis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RepairError {
    /// Short machine-readable tag used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            RepairError::Shape { .. } => "shape",
            RepairError::InvalidNetwork(_) => "invalid_network",
            RepairError::NnetParse { .. } => "nnet_parse",
            RepairError::InvalidProperty(_) => "invalid_property",
            RepairError::InvalidConfig(_) => "invalid_config",
            RepairError::EmptySampleSet(_) => "empty_sample_set",
            RepairError::PositivesUnavailable { .. } => "positives_unavailable",
            RepairError::CorrectionImpossible(_) => "correction_impossible",
            RepairError::Diverged { .. } => "diverged",
            RepairError::DuplicateNeuron { .. } => "duplicate_neuron",
            RepairError::NeuronOutOfRange { .. } => "neuron_out_of_range",
            RepairError::Synthesis(_) => "synthesis",
            RepairError::Io(_) => "io",
            RepairError::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, RepairError>;
