//! Densities sampled on rectangular grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("axis '{0}' has no samples")]
    EmptyAxis(String),
    #[error("axis '{name}': range [{lo}, {hi}] is not a finite increasing interval")]
    BadRange { name: String, lo: f64, hi: f64 },
    #[error("cannot parse axis '{0}': expected name:lo:hi:n")]
    Parse(String),
    #[error("field has {got} values but its axes describe {expected}")]
    Shape { expected: usize, got: usize },
    #[error("value at index {0} is negative or not finite")]
    BadValue(usize),
    #[error("no axis named '{0}'")]
    UnknownAxis(String),
    #[error("field integrates to zero")]
    ZeroIntegral,
}

/// A uniformly spaced axis request, `n` samples from `lo` to `hi` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64, n: usize) -> Self {
        AxisSpec { name: name.into(), lo, hi, n }
    }

    /// Parses `name:lo:hi:n`.
    pub fn parse(text: &str) -> Result<Self, FieldError> {
        let parts: Vec<&str> = text.split(':').collect();
        let bad = || FieldError::Parse(text.to_string());
        if parts.len() != 4 || parts[0].is_empty() {
            return Err(bad());
        }
        let lo = parts[1].trim().parse().map_err(|_| bad())?;
        let hi = parts[2].trim().parse().map_err(|_| bad())?;
        let n = parts[3].trim().parse().map_err(|_| bad())?;
        Ok(AxisSpec::new(parts[0], lo, hi, n))
    }

    pub fn build(&self) -> Result<Axis, FieldError> {
        if self.n == 0 {
            return Err(FieldError::EmptyAxis(self.name.clone()));
        }
        let ordered = if self.n == 1 { self.hi >= self.lo } else { self.hi > self.lo };
        if !(self.lo.is_finite() && self.hi.is_finite() && ordered) {
            return Err(FieldError::BadRange { name: self.name.clone(), lo: self.lo, hi: self.hi });
        }
        Ok(Axis::linspace(&self.name, self.lo, self.hi, self.n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub samples: Vec<f64>,
}

impl Axis {
    pub fn new(name: impl Into<String>, samples: Vec<f64>) -> Self {
        Axis { name: name.into(), samples }
    }

    pub fn linspace(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        let samples = if n == 1 {
            vec![lo]
        } else {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect()
        };
        Axis::new(name, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn lo(&self) -> f64 {
        self.samples[0]
    }

    pub fn hi(&self) -> f64 {
        self.samples[self.samples.len() - 1]
    }

    /// Mean spacing; zero for a single sample.
    pub fn spacing(&self) -> f64 {
        if self.samples.len() < 2 {
            0.0
        } else {
            (self.hi() - self.lo()) / (self.samples.len() - 1) as f64
        }
    }

    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(&self.samples)
    }
}

/// Trapezoid-rule weights for (possibly non-uniform) samples. A single
/// sample gets weight one so that integrating over it is the identity.
pub fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    WindowNormalized,
}

/// Row-major samples (last axis fastest) of a non-negative density. A field
/// with no axes holds a single value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfField {
    pub axes: Vec<Axis>,
    pub values: Vec<f64>,
    pub normalization: Normalization,
    pub scenario_hash: Option<String>,
    pub time: f64,
}

impl PdfField {
    pub fn new(axes: Vec<Axis>, values: Vec<f64>) -> Result<Self, FieldError> {
        if let Some(a) = axes.iter().find(|a| a.is_empty()) {
            return Err(FieldError::EmptyAxis(a.name.clone()));
        }
        let expected: usize = axes.iter().map(Axis::len).product();
        if values.len() != expected {
            return Err(FieldError::Shape { expected, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(FieldError::BadValue(i));
        }
        Ok(PdfField { axes, values, normalization: Normalization::Raw, scenario_hash: None, time: 0.0 })
    }

    /// Evaluates `f` at every grid point in parallel. Output order is the
    /// grid order regardless of scheduling.
    pub fn from_fn<E, F>(axes: Vec<Axis>, f: F) -> Result<Self, E>
    where
        E: Send + From<FieldError>,
        F: Fn(&[f64]) -> Result<f64, E> + Sync,
    {
        let shape: Vec<usize> = axes.iter().map(Axis::len).collect();
        let total: usize = shape.iter().product();
        let values = (0..total)
            .into_par_iter()
            .map(|flat| {
                let point = point_at(&axes, &shape, flat);
                f(&point)
            })
            .collect::<Result<Vec<f64>, E>>()?;
        Ok(PdfField::new(axes, values)?)
    }

    pub fn with_metadata(mut self, scenario_hash: Option<String>, time: f64) -> Self {
        self.scenario_hash = scenario_hash;
        self.time = time;
        self
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn axis_index(&self, name: &str) -> Result<usize, FieldError> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| FieldError::UnknownAxis(name.to_string()))
    }

    pub fn axis(&self, name: &str) -> Result<&Axis, FieldError> {
        Ok(&self.axes[self.axis_index(name)?])
    }

    /// Coordinates of the grid point with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        point_at(&self.axes, &self.shape(), flat)
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.len() + i)
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[self.index(idx)]
    }

    /// Trapezoid integral over every axis.
    pub fn integral(&self) -> f64 {
        let weights: Vec<Vec<f64>> = self.axes.iter().map(Axis::trapezoid_weights).collect();
        let shape = self.shape();
        let mut idx = vec![0usize; shape.len()];
        let mut total = 0.0;
        for &v in &self.values {
            let w: f64 = idx.iter().zip(&weights).map(|(&i, w)| w[i]).product();
            total += w * v;
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        total
    }

    /// Rescaled copy that integrates to one over the grid.
    pub fn normalized(&self) -> Result<Self, FieldError> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(FieldError::ZeroIntegral);
        }
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v /= total);
        out.normalization = Normalization::WindowNormalized;
        Ok(out)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

fn point_at(axes: &[Axis], shape: &[usize], mut flat: usize) -> Vec<f64> {
    let mut point = vec![0.0; axes.len()];
    for d in (0..axes.len()).rev() {
        point[d] = axes[d].samples[flat % shape[d]];
        flat /= shape[d];
    }
    point
}
