use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// Malformed JSON or a value of the wrong type.
    #[error("{}:{line}:{column}: field `{field}`: {message}", path.display())]
    Parse {
        path: PathBuf,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed but semantically invalid content.
    #[error("{}: field `{field}`: {reason}", path.display())]
    Schema {
        path: PathBuf,
        field: String,
        reason: String,
    },
    #[error("{}: {message}", path.display())]
    Urdf { path: PathBuf, message: String },
}

impl FileError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FileError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, field: impl Into<String>, reason: impl Into<String>) -> Self {
        FileError::Schema {
            path: path.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Name of the offending field, when known.
    pub fn field(&self) -> Option<&str> {
        match self {
            FileError::Parse { field, .. } | FileError::Schema { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Deserializes JSON text, reporting the field path and position on failure.
pub(crate) fn from_json<T: serde::de::DeserializeOwned>(path: &std::path::Path, text: &str) -> Result<T, FileError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        FileError::Parse {
            path: path.to_path_buf(),
            field,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })
}

pub(crate) fn read(path: &std::path::Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|e| FileError::io(path, e))
}

pub(crate) fn check_version(path: &std::path::Path, version: u32) -> Result<(), FileError> {
    if version != crate::FORMAT_VERSION {
        return Err(FileError::schema(
            path,
            "format_version",
            format!("unsupported version {version}, expected {}", crate::FORMAT_VERSION),
        ));
    }
    Ok(())
}
