use std::fs;
use std::path::Path;

use super::NetworkScenario;
use crate::error::{CopError, Result};

const HEADER: &str = "# copkit scenario\n";

impl NetworkScenario {
    pub fn to_toml(&self) -> Result<String> {
        let body = toml::to_string(self).map_err(|e| CopError::Config(e.to_string()))?;
        Ok(format!("{HEADER}{body}"))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: NetworkScenario =
            toml::from_str(text).map_err(|e| CopError::Config(e.to_string()))?;
        scenario.normalized()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()?).map_err(|e| CopError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CopError::io(path, e))?;
        let scenario: NetworkScenario =
            toml::from_str(&text).map_err(|e| CopError::format(path, e))?;
        scenario.normalized()
    }
}

#[cfg(test)]
mod tests {
    use crate::scenario::{generate_scenario, LayoutParams};

    use super::*;

    #[test]
    fn toml_round_trip_is_exact() {
        let s = generate_scenario(7, &LayoutParams::default()).unwrap();
        let text = s.to_toml().unwrap();
        let back = NetworkScenario::from_toml(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(text, back.to_toml().unwrap());
    }

    #[test]
    fn load_rejects_invalid_scenario() {
        let mut s = generate_scenario(7, &LayoutParams::default()).unwrap();
        s.sectors[3].load = 2.0;
        let text = toml::to_string(&s).unwrap();
        assert!(NetworkScenario::from_toml(&text).is_err());
    }

    #[test]
    fn load_reports_path() {
        let err = NetworkScenario::load("/nonexistent/scenario.toml").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/scenario.toml"));
    }
}
