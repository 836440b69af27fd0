//! Scenario files: TOML with one table per configuration section and a
//! `[[faults]]` array.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::array::ArrayConfig;
use crate::engine::Thresholds;
use crate::sim::{
    CoverageConfig, FaultSpec, KpiConfig, MeasurementConfig, NetworkConfig, RadioConfig, ScheduleConfig,
    SimulationConfig, TrafficConfig,
};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{}unknown key `{path}`", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    UnknownKey { path: String, line: Option<usize> },
    #[error("{0}")]
    Semantic(String),
}

/// How keys the schema does not know are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownKeys {
    #[default]
    Reject,
    Warn,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scenario {
    pub config: SimulationConfig,
    pub faults: FaultSpec,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct ScenarioDoc {
    network: NetworkConfig,
    radio: RadioConfig,
    array: ArrayConfig,
    measurement: MeasurementConfig,
    coverage: CoverageConfig,
    thresholds: Thresholds,
    schedule: ScheduleConfig,
    traffic: TrafficConfig,
    kpi: KpiConfig,
    faults: FaultSpec,
}

impl From<ScenarioDoc> for Scenario {
    fn from(d: ScenarioDoc) -> Self {
        Scenario {
            config: SimulationConfig {
                network: d.network,
                radio: d.radio,
                array: d.array,
                measurement: d.measurement,
                coverage: d.coverage,
                thresholds: d.thresholds,
                schedule: d.schedule,
                traffic: d.traffic,
                kpi: d.kpi,
            },
            faults: d.faults,
        }
    }
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let c = s.config.clone();
        ScenarioDoc {
            network: c.network,
            radio: c.radio,
            array: c.array,
            measurement: c.measurement,
            coverage: c.coverage,
            thresholds: c.thresholds,
            schedule: c.schedule,
            traffic: c.traffic,
            kpi: c.kpi,
            faults: s.faults.clone(),
        }
    }
}

/// A parsed scenario plus the unknown keys tolerated in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub scenario: Scenario,
    pub warnings: Vec<String>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

/// Best-effort line of the key at `path` (dotted, array indices numeric).
fn locate_key(text: &str, path: &str) -> Option<usize> {
    let parts: Vec<&str> = path.split('.').filter(|p| p.parse::<usize>().is_err()).collect();
    let (key, tables) = parts.split_last()?;
    let wanted = tables.join(".");
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == path.trim_end_matches(|c: char| c.is_ascii_digit() || c == '.') && tables.is_empty() {
                return Some(i + 1);
            }
            if tables.is_empty() && current == *key {
                return Some(i + 1);
            }
            continue;
        }
        if current == wanted {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim().trim_matches('"') == *key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Parses and validates a scenario. An empty text yields every default.
pub fn parse_scenario(text: &str, unknown: UnknownKeys) -> Result<Parsed, ScenarioError> {
    let syntax = |e: toml::de::Error| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        ScenarioError::Syntax {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    };
    let de = toml::de::Deserializer::parse(text).map_err(syntax)?;
    let mut ignored = Vec::new();
    let doc: ScenarioDoc = serde_ignored::deserialize(de, |path| ignored.push(path.to_string())).map_err(syntax)?;

    let mut warnings = Vec::new();
    for path in ignored {
        let line = locate_key(text, &path);
        match unknown {
            UnknownKeys::Reject => return Err(ScenarioError::UnknownKey { path, line }),
            UnknownKeys::Warn => warnings.push(ScenarioError::UnknownKey { path, line }.to_string()),
        }
    }
    let scenario = Scenario::from(doc);
    validate(&scenario)?;
    Ok(Parsed { scenario, warnings })
}

pub fn validate(s: &Scenario) -> Result<(), ScenarioError> {
    s.config.validate().map_err(|e| ScenarioError::Semantic(e.to_string()))?;
    for f in &s.faults {
        if f.cell >= s.config.network.cells {
            return Err(ScenarioError::Semantic(format!(
                "fault targets cell {}, but the network has {} cells",
                f.cell, s.config.network.cells
            )));
        }
    }
    Ok(())
}

pub fn to_toml(s: &Scenario) -> String {
    toml::to_string(&ScenarioDoc::from(s)).expect("scenario types always serialize")
}

/// Every default, written out as a scenario file.
pub fn defaults_toml() -> String {
    to_toml(&Scenario::default())
}
