//! JSON file formats. Numbers are IEEE doubles; complex entries are `[re, im]`
//! pairs; composite spaces are ordered system ⊗ environment.

use nalgebra::{Complex, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dynamics::GkslGenerator;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, ProbabilityVector, RateMatrix, StochasticKernel};
use crate::lifts::{KrausMap, LinearMap, SuperOperator};
use crate::linalg::{CMatrix, RMatrix};
use crate::tolerance::Tolerances;

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

/// `{"n": rows, "rows": [[...], ...]}`, rows top to bottom, optional times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealMatrixFile {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_t: Option<f64>,
}

fn check_rows<E>(n: usize, rows: &[Vec<E>]) -> Result<usize> {
    if rows.len() != n {
        return Err(Error::Parse(format!("\"n\" is {n} but {} rows were given", rows.len())));
    }
    let width = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(Error::Parse(format!("row {i} has {} entries, expected {width}", r.len())));
    }
    Ok(width)
}

impl RealMatrixFile {
    pub fn from_matrix(m: &RMatrix<f64>) -> Self {
        Self {
            n: m.nrows(),
            rows: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
            from_t: None,
            to_t: None,
        }
    }

    pub fn from_kernel(k: &StochasticKernel<f64>) -> Self {
        Self {
            from_t: k.from_time(),
            to_t: k.to_time(),
            ..Self::from_matrix(k.matrix())
        }
    }

    pub fn to_matrix(&self) -> Result<RMatrix<f64>> {
        let width = check_rows(self.n, &self.rows)?;
        Ok(RMatrix::from_fn(self.n, width, |r, c| self.rows[r][c]))
    }

    pub fn to_square(&self) -> Result<RMatrix<f64>> {
        let m = self.to_matrix()?;
        if m.ncols() != m.nrows() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        Ok(m)
    }

    pub fn to_kernel(&self, tol: &Tolerances) -> Result<StochasticKernel<f64>> {
        let m = self.to_square()?;
        match (self.from_t, self.to_t) {
            (Some(s), Some(t)) => StochasticKernel::with_times(m, s, t, tol),
            (None, None) => StochasticKernel::new(m, tol),
            _ => Err(Error::Parse("\"from_t\" and \"to_t\" must be given together".into())),
        }
    }

    pub fn to_rate(&self, tol: &Tolerances) -> Result<RateMatrix<f64>> {
        RateMatrix::new(self.to_square()?, tol)
    }
}

/// Probability vector as an `n x 1` matrix file or a flat list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorFile {
    Flat(Vec<f64>),
    Column(RealMatrixFile),
}

impl VectorFile {
    pub fn from_vector(p: &ProbabilityVector<f64>) -> Self {
        VectorFile::Column(RealMatrixFile::from_matrix(&RMatrix::from_column_slice(
            p.dim(),
            1,
            p.entries().as_slice(),
        )))
    }

    pub fn to_entries(&self) -> Result<Vec<f64>> {
        match self {
            VectorFile::Flat(v) => Ok(v.clone()),
            VectorFile::Column(m) => {
                let m = m.to_matrix()?;
                if m.ncols() != 1 {
                    return Err(Error::Parse(format!("a vector needs one column, got {}", m.ncols())));
                }
                Ok(m.column(0).iter().copied().collect())
            }
        }
    }

    pub fn to_probability(&self, tol: &Tolerances) -> Result<ProbabilityVector<f64>> {
        ProbabilityVector::from_dvector(DVector::from_vec(self.to_entries()?), tol)
    }
}

/// `{"n": rows, "rows": [[[re, im], ...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexMatrixFile {
    pub n: usize,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl ComplexMatrixFile {
    pub fn from_matrix(m: &CMatrix<f64>) -> Self {
        Self {
            n: m.nrows(),
            rows: m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }

    pub fn from_real(m: &RMatrix<f64>) -> Self {
        Self {
            n: m.nrows(),
            rows: m.row_iter().map(|r| r.iter().map(|&x| [x, 0.0]).collect()).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix<f64>> {
        let width = check_rows(self.n, &self.rows)?;
        if width != self.n {
            return Err(Error::NotSquare {
                rows: self.n,
                cols: width,
            });
        }
        Ok(CMatrix::from_fn(self.n, self.n, |r, c| {
            let [re, im] = self.rows[r][c];
            Complex::new(re, im)
        }))
    }
}

/// Real or complex square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixFile {
    Real(RealMatrixFile),
    Complex(ComplexMatrixFile),
}

impl MatrixFile {
    pub fn to_complex(&self) -> Result<CMatrix<f64>> {
        match self {
            MatrixFile::Real(m) => Ok(m.to_square()?.map(|x| Complex::new(x, 0.0))),
            MatrixFile::Complex(m) => m.to_matrix(),
        }
    }
}

/// `{"ops": [matrix, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausFile {
    pub ops: Vec<MatrixFile>,
}

impl KrausFile {
    pub fn from_map(map: &KrausMap<f64>) -> Self {
        Self {
            ops: map
                .operators()
                .iter()
                .map(|k| MatrixFile::Complex(ComplexMatrixFile::from_matrix(k)))
                .collect(),
        }
    }

    pub fn to_map(&self, tol: &Tolerances) -> Result<KrausMap<f64>> {
        let ops = self.ops.iter().map(MatrixFile::to_complex).collect::<Result<Vec<_>>>()?;
        KrausMap::new(ops, tol)
    }
}

/// `{"h": matrix, "jumps": [matrix, ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    pub h: MatrixFile,
    #[serde(default)]
    pub jumps: Vec<MatrixFile>,
}

impl GeneratorFile {
    pub fn to_generator(&self, tol: &Tolerances) -> Result<GkslGenerator<f64>> {
        let jumps = self.jumps.iter().map(MatrixFile::to_complex).collect::<Result<Vec<_>>>()?;
        GkslGenerator::new(self.h.to_complex()?, jumps, tol)
    }

    pub fn from_generator(gen: &GkslGenerator<f64>) -> Self {
        Self {
            h: MatrixFile::Complex(ComplexMatrixFile::from_matrix(gen.hamiltonian())),
            jumps: gen
                .jumps()
                .iter()
                .map(|l| MatrixFile::Complex(ComplexMatrixFile::from_matrix(l)))
                .collect(),
        }
    }
}

/// A map given either by Kraus operators or by its `N² x N²` Liouville matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapFile {
    Kraus(KrausFile),
    Superoperator(MatrixFile),
}

impl MapFile {
    pub fn to_superoperator(&self, tol: &Tolerances) -> Result<SuperOperator<f64>> {
        match self {
            MapFile::Kraus(k) => Ok(k.to_map(tol)?.superoperator()),
            MapFile::Superoperator(m) => SuperOperator::new(m.to_complex()?),
        }
    }
}

/// `{"u_x": matrix, "u_y": matrix, "v": matrix}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseMemoryFile {
    pub u_x: MatrixFile,
    pub u_y: MatrixFile,
    pub v: MatrixFile,
}

/// Environment division scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisionScenarioFile {
    pub n_sys: usize,
    pub n_env: usize,
    pub p_env: VectorFile,
    pub interaction: MapFile,
    pub post_sys: MapFile,
    pub post_env: MapFile,
}

/// Kernel family sampled on a grid, used for pairwise lifts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelFamilyFile {
    /// `Γ(t←s) = exp((t−s) R)`.
    Ctmc { grid: Vec<f64>, rate: RealMatrixFile },
    /// `Γ(t←s) = [exp(−iH(t−s))]_⊙`.
    Theta { grid: Vec<f64>, h: MatrixFile },
}

impl KernelFamilyFile {
    pub fn dim(&self) -> usize {
        match self {
            KernelFamilyFile::Ctmc { rate, .. } => rate.n,
            KernelFamilyFile::Theta { h, .. } => match h {
                MatrixFile::Real(m) => m.n,
                MatrixFile::Complex(m) => m.n,
            },
        }
    }

    pub fn to_family(&self, tol: &Tolerances) -> Result<KernelFamily<f64>> {
        match self {
            KernelFamilyFile::Ctmc { grid, rate } => KernelFamily::ctmc(grid.clone(), rate.to_rate(tol)?),
            KernelFamilyFile::Theta { grid, h } => KernelFamily::theta_process(grid.clone(), h.to_complex()?),
        }
        .map(|f| f.with_tolerances(*tol))
    }
}

/// Any single-object input accepted by validation, discriminated by shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyFile {
    Kraus(KrausFile),
    Generator(GeneratorFile),
    Real(RealMatrixFile),
    Complex(ComplexMatrixFile),
}
