use crate::geom::ObjectId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("object {0} is not part of the cloud")]
    UnknownObject(ObjectId),
    #[error("point set is empty")]
    EmptyCloud,
    #[error("voxel size must be positive, got {0}")]
    InvalidVoxelSize(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid cloud: {0}")]
    InvalidCloud(String),
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("task references object class `{0}` which is missing from the cloud")]
    MissingObject(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model has not been fitted")]
    UnfittedModel,
    #[error("no stored placement mode matches an anchor in the scene for object {0}")]
    NoApplicableMode(ObjectId),
    #[error("clouds do not share objects or point counts: {0}")]
    MismatchedObjects(String),
    #[error("no plan found ({0})")]
    NoPlanFound(String),
    #[error("scripted policy failed: {0}")]
    ScriptFailure(String),
    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },
    #[error("corrupt record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
