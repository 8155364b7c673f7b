//! JSON instance files: the on-disk schema and its validation into library
//! objects.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use qprob::{HermitianMatrix, Matrix, Partition, QuantumMeasure, QuantumRandomVariable, SampleSpace, Tolerances, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Row-major `d x d` matrix of `[re, im]` pairs.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

/// One matrix per sample-point label.
pub type LabelledMatrices = BTreeMap<String, MatrixJson>;

/// Largest tolerated `|m_ij - conj(m_ji)|` before a matrix counts as non-Hermitian.
pub const ASYMMETRY_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dim: usize,
    pub points: Vec<String>,
    #[serde(default)]
    pub measures: BTreeMap<String, LabelledMatrices>,
    #[serde(default)]
    pub qrvs: BTreeMap<String, LabelledMatrices>,
    #[serde(default)]
    pub partitions: BTreeMap<String, Vec<Vec<String>>>,
}

impl InstanceFile {
    /// Parses JSON text; schema errors carry the JSON path of the offending value.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let mut de = serde_json::Deserializer::from_str(text);
        let file: Self =
            serde_path_to_error::deserialize(&mut de).map_err(|e| format!("at `{}`: {}", e.path(), e.inner()))?;
        de.end().map_err(|e| e.to_string())?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text).map_err(|message| CliError::Parse { path: path.to_owned(), message })
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_json()).map_err(|source| CliError::Io { path: path.to_owned(), source })
    }
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub space: SampleSpace,
    pub dim: usize,
    pub measures: BTreeMap<String, QuantumMeasure>,
    pub qrvs: BTreeMap<String, QuantumRandomVariable>,
    pub partitions: BTreeMap<String, Partition>,
    /// Matrices that were symmetrized under `lenient`.
    pub warnings: Vec<String>,
}

impl Instance {
    /// Validates every object. Non-Hermitian matrices are an error unless
    /// `lenient`, in which case they are replaced by `(M + M^†)/2` and a
    /// warning is recorded.
    pub fn from_file(file: &InstanceFile, lenient: bool, tol: &Tolerances) -> CliResult<Self> {
        if file.dim == 0 {
            return Err(CliError::invalid("dim", "dimension must be at least 1"));
        }
        let space = SampleSpace::new(file.points.iter().cloned()).map_err(|e| CliError::invalid("points", e))?;
        let mut reader = MatrixReader { dim: file.dim, space: &space, lenient, warnings: Vec::new() };

        let mut measures = BTreeMap::new();
        for (name, atoms) in &file.measures {
            let location = format!("measures.{name}");
            let atoms = reader.labelled(atoms, &location)?;
            let nu = QuantumMeasure::new(space.clone(), atoms, tol).map_err(|e| CliError::invalid(location, e))?;
            measures.insert(name.clone(), nu);
        }

        let mut qrvs = BTreeMap::new();
        for (name, values) in &file.qrvs {
            let location = format!("qrvs.{name}");
            let values = reader.labelled(values, &location)?;
            let psi = QuantumRandomVariable::new(space.clone(), values).map_err(|e| CliError::invalid(location, e))?;
            qrvs.insert(name.clone(), psi);
        }

        let mut partitions = BTreeMap::new();
        for (name, blocks) in &file.partitions {
            let f = Partition::from_labels(&space, blocks)
                .map_err(|e| CliError::invalid(format!("partitions.{name}"), e))?;
            partitions.insert(name.clone(), f);
        }

        let warnings = reader.warnings;
        Ok(Self { space, dim: file.dim, measures, qrvs, partitions, warnings })
    }

    pub fn load(path: &Path, lenient: bool, tol: &Tolerances) -> CliResult<Self> {
        Self::from_file(&InstanceFile::read(path)?, lenient, tol)
    }

    pub fn to_file(&self) -> InstanceFile {
        let labelled = |values: &[HermitianMatrix]| -> LabelledMatrices {
            self.space.labels().iter().zip(values).map(|(l, v)| (l.clone(), matrix_to_json(v.matrix()))).collect()
        };
        InstanceFile {
            dim: self.dim,
            points: self.space.labels().to_vec(),
            measures: self.measures.iter().map(|(k, nu)| (k.clone(), labelled(nu.atoms()))).collect(),
            qrvs: self.qrvs.iter().map(|(k, psi)| (k.clone(), labelled(psi.values()))).collect(),
            partitions: self.partitions.iter().map(|(k, f)| (k.clone(), partition_labels(&self.space, f))).collect(),
        }
    }

    pub fn measure(&self, name: &str) -> CliResult<&QuantumMeasure> {
        lookup(&self.measures, "measure", name)
    }

    pub fn qrv(&self, name: &str) -> CliResult<&QuantumRandomVariable> {
        lookup(&self.qrvs, "qrv", name)
    }

    pub fn partition(&self, name: &str) -> CliResult<&Partition> {
        lookup(&self.partitions, "partition", name)
    }
}

fn lookup<'a, T>(map: &'a BTreeMap<String, T>, kind: &'static str, name: &str) -> CliResult<&'a T> {
    map.get(name).ok_or_else(|| CliError::MissingName {
        kind,
        name: name.to_owned(),
        available: if map.is_empty() { "none".into() } else { map.keys().cloned().collect::<Vec<_>>().join(", ") },
    })
}

pub fn partition_labels(space: &SampleSpace, f: &Partition) -> Vec<Vec<String>> {
    f.blocks().iter().map(|b| b.iter().map(|&i| space.label(i).to_owned()).collect()).collect()
}

pub fn matrix_to_json(m: &Matrix) -> MatrixJson {
    m.rows().into_iter().map(|row| row.into_iter().map(|z| [z.re, z.im]).collect()).collect()
}

struct MatrixReader<'a> {
    dim: usize,
    space: &'a SampleSpace,
    lenient: bool,
    warnings: Vec<String>,
}

impl MatrixReader<'_> {
    /// Matrices in sample-point order; every point must be present exactly once.
    fn labelled(&mut self, map: &LabelledMatrices, location: &str) -> CliResult<Vec<HermitianMatrix>> {
        if let Some(extra) = map.keys().find(|l| self.space.index_of(l).is_none()) {
            return Err(CliError::invalid(format!("{location}.{extra}"), "label is not one of the instance points"));
        }
        self.space
            .labels()
            .iter()
            .map(|label| {
                let at = format!("{location}.{label}");
                let m = map.get(label).ok_or_else(|| CliError::invalid(&at, "no matrix for this point"))?;
                self.matrix(m, &at)
            })
            .collect()
    }

    fn matrix(&mut self, rows: &MatrixJson, at: &str) -> CliResult<HermitianMatrix> {
        let d = self.dim;
        if rows.len() != d {
            return Err(CliError::invalid(at, format!("expected {d} rows, found {}", rows.len())));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(CliError::invalid(at, format!("row {i} has {} entries, expected {d}", row.len())));
        }
        let parsed: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&[re, im]| C64::new(re, im)).collect()).collect();
        let m = Matrix::from_rows(&parsed).map_err(|e| CliError::invalid(at, e))?;
        if !m.is_finite() {
            return Err(CliError::invalid(at, "matrix has a non-finite entry"));
        }
        let (gap, (i, j)) = m.hermitian_defect();
        if gap > ASYMMETRY_THRESHOLD {
            let what = format!(
                "entry [{i}][{j}] is not the conjugate of [{j}][{i}] (difference {gap:.3e}, threshold {ASYMMETRY_THRESHOLD:e})"
            );
            if !self.lenient {
                return Err(CliError::invalid(
                    at,
                    format!("matrix is not Hermitian: {what}; pass --lenient to symmetrize"),
                ));
            }
            self.warnings.push(format!("{at}: {what}; symmetrized"));
        }
        qprob::herm::hermitize(&m).map_err(|e| CliError::invalid(at, e))
    }
}
