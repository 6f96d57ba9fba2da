use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SandboxError;

/// Placeholder substituted with the path of the source file.
pub const SOURCE_PLACEHOLDER: &str = "{source}";

/// How to check and run programs written in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    /// File extension given to the temporary source file.
    pub extension: String,
    /// Command line that runs the program. `{source}` is replaced by the path.
    pub run: Vec<String>,
    /// Command line that exits non-zero when the program does not parse or
    /// compile. Absent for profiles without a separate check pass.
    #[serde(default)]
    pub check: Option<Vec<String>>,
    #[serde(default = "default_true")]
    pub empty_source_is_ce: bool,
    /// Substrings of stderr that identify an allocation failure, so a
    /// program that dies from its address-space limit is reported as MLE.
    #[serde(default)]
    pub memory_error_markers: Vec<String>,
}

fn default_true() -> bool {
    true
}

impl LanguageProfile {
    pub fn python3() -> Self {
        Self {
            extension: "py".into(),
            run: vec!["python3".into(), "-B".into(), SOURCE_PLACEHOLDER.into()],
            check: Some(vec![
                "python3".into(),
                "-B".into(),
                "-c".into(),
                "import sys; compile(open(sys.argv[1], 'rb').read(), sys.argv[1], 'exec')".into(),
                SOURCE_PLACEHOLDER.into(),
            ]),
            empty_source_is_ce: true,
            memory_error_markers: vec!["MemoryError".into()],
        }
    }

    pub(crate) fn validate(&self, name: &str) -> Result<(), SandboxError> {
        if self.run.is_empty() {
            return Err(SandboxError::Config(format!("profile `{name}` has an empty run command")));
        }
        if self.check.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(SandboxError::Config(format!("profile `{name}` has an empty check command")));
        }
        Ok(())
    }

    #[cfg_attr(not(unix), allow(dead_code))]
    pub(crate) fn expand(command: &[String], source: &Path) -> Vec<String> {
        let path = source.to_string_lossy();
        command.iter().map(|arg| arg.replace(SOURCE_PLACEHOLDER, &path)).collect()
    }
}

/// Named language profiles, usually read from a TOML file:
///
/// ```toml
/// [profiles.python3]
/// extension = "py"
/// run = ["python3", "{source}"]
/// check = ["python3", "-m", "py_compile", "{source}"]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRegistry {
    pub profiles: BTreeMap<String, LanguageProfile>,
}

impl ProfileRegistry {
    pub fn builtin() -> Self {
        let mut profiles = BTreeMap::new();
        profiles.insert("python3".to_string(), LanguageProfile::python3());
        Self { profiles }
    }

    pub fn from_toml(text: &str) -> Result<Self, SandboxError> {
        let registry: Self = toml::from_str(text).map_err(|e| SandboxError::Config(e.to_string()))?;
        for (name, profile) in &registry.profiles {
            profile.validate(name)?;
        }
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Self, SandboxError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Result<&LanguageProfile, SandboxError> {
        self.profiles
            .get(name)
            .ok_or_else(|| SandboxError::UnknownProfile(name.to_string()))
    }
}
