use std::io;

use thiserror::Error;

/// Errors produced anywhere in the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input contains no points")]
    EmptyInput,

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("triangulation failed: {0}")]
    Triangulation(String),

    #[error("degenerate face: cross product norm {0:e}")]
    DegenerateFace(f64),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no path between vertices {from} and {to}")]
    NoPath { from: usize, to: usize },

    #[error("invalid roof spec: {0}")]
    InvalidSpec(String),

    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
