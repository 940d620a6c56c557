use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fields live on different sphere grids")]
    GridMismatch,
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("mean curvature vector not spacelike at node {node} (theta = {theta:.4}, phi = {phi:.4})")]
    NonSpacelikeH { node: usize, theta: f64, phi: f64 },
    #[error("no future-timelike observer: |B|/(4A) = {0} >= 1")]
    NoTimelikeObserver(f64),
    #[error("inconsistent solve: obstruction {0:e} exceeds tolerance")]
    Consistency(f64),
    #[error("ill-conditioned fit (condition number {0:e}); spread the radii further apart")]
    IllConditioned(f64),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
