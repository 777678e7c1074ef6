use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use arat_core::{Error, GameInstance, PolicyProfile, StationaryPolicy};

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or an unreadable/ill-formed input file.
    Usage(String),
    /// The computation itself failed.
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

/// Input problems are usage errors; everything else is a reported failure.
pub fn core_error(path: &Path, e: Error) -> CliError {
    match e {
        Error::Shape { .. } | Error::Policy { .. } | Error::InvalidArgument(_) => {
            CliError::Usage(format!("{}: {e}", path.display()))
        }
        Error::InvalidInstance(_) | Error::Linear(_) | Error::Lp(_) => {
            CliError::Failure(format!("{}: {e}", path.display()))
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            CliError::Usage(format!("{}: {inner}", path.display()))
        } else {
            CliError::Usage(format!("{}: field `{field}`: {inner}", path.display()))
        }
    })
}

/// Parses an instance and checks its shapes, but not its semantics.
pub fn read_instance(path: &Path) -> Result<GameInstance, CliError> {
    let instance: GameInstance = read_json(path)?;
    instance.check_shape().map_err(|e| core_error(path, e))?;
    Ok(instance)
}

/// Like [`read_instance`], and the instance must also validate.
pub fn read_valid_instance(path: &Path) -> Result<GameInstance, CliError> {
    let instance = read_instance(path)?;
    instance.ensure_valid().map_err(|e| core_error(path, e))?;
    Ok(instance)
}

pub fn read_profile(path: &Path, instance: &GameInstance) -> Result<(StationaryPolicy, StationaryPolicy), CliError> {
    let profile: PolicyProfile = read_json(path)?;
    profile.policies(instance).map_err(|e| core_error(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, to_json(value) + "\n")
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}
