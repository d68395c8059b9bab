//! Structured-text serialization of measures and fields, plus small CSV
//! helpers. All on-disk formats are TOML or plain comma-separated tables.

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::grid::{Field, Grid};
use crate::measures::{MeasureError, RadonMeasure};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub cells: usize,
}

impl From<&Grid> for GridSpec {
    fn from(g: &Grid) -> Self {
        GridSpec {
            a: g.a(),
            b: g.b(),
            cells: g.cells(),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        Grid::new(self.a, self.b, self.cells).map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// On-disk form of a measure: grid, midpoint density samples, atom list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub grid: GridSpec,
    pub density: Vec<f64>,
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
}

impl MeasureSpec {
    pub fn from_measure(mu: &RadonMeasure) -> Self {
        MeasureSpec {
            grid: GridSpec::from(mu.grid()),
            density: mu.density().to_vec(),
            atoms: mu.atoms().to_vec(),
        }
    }

    pub fn build(&self) -> Result<RadonMeasure, ConfigError> {
        let grid = self.grid.build()?;
        RadonMeasure::new(&grid, self.density.clone(), self.atoms.clone())
            .map_err(|e: MeasureError| ConfigError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("measure spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// On-disk form of a field: grid plus interior node values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldSpec {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl FieldSpec {
    pub fn from_field(f: &Field) -> Self {
        FieldSpec {
            grid: GridSpec::from(f.grid()),
            values: f.values().to_vec(),
        }
    }

    pub fn build(&self) -> Result<Field, ConfigError> {
        let grid = self.grid.build()?;
        Field::from_values(&grid, self.values.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("field spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// One CSV row from float cells, full shortest-roundtrip precision.
pub fn csv_row(cells: &[f64]) -> String {
    let mut out = String::new();
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!("{}", c));
    }
    out.push('\n');
    out
}
