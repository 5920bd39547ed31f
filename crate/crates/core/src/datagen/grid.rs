use serde::{Deserialize, Serialize};

use crate::error::{CopError, Result};
use crate::scenario::{MobilityConfig, CIO_RANGE, HOM_RANGE};

/// Largest grid [`enumerate_grid`] will hand out.
pub const ENUMERATION_LIMIT: u64 = 100_000_000;

const LATTICE_EPS: f64 = 1e-9;

/// Regular CIO x HOM lattice over the three target sectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParameterGrid {
    pub cio_min: f64,
    pub cio_max: f64,
    pub cio_step: f64,
    pub hom_min: f64,
    pub hom_max: f64,
    pub hom_step: f64,
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self::with_steps(2.0, 2.0)
    }
}

impl ParameterGrid {
    /// Full CIO and HOM ranges at the given steps.
    pub fn with_steps(cio_step: f64, hom_step: f64) -> Self {
        Self {
            cio_min: CIO_RANGE.0,
            cio_max: CIO_RANGE.1,
            cio_step,
            hom_min: HOM_RANGE.0,
            hom_max: HOM_RANGE.1,
            hom_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        axis_len("cio", self.cio_min, self.cio_max, self.cio_step)?;
        axis_len("hom", self.hom_min, self.hom_max, self.hom_step)?;
        if self.cio_min < CIO_RANGE.0 || self.cio_max > CIO_RANGE.1 {
            return Err(CopError::Config(format!(
                "cio axis [{}, {}] exceeds [{}, {}]",
                self.cio_min, self.cio_max, CIO_RANGE.0, CIO_RANGE.1
            )));
        }
        if self.hom_min < HOM_RANGE.0 || self.hom_max > HOM_RANGE.1 {
            return Err(CopError::Config(format!(
                "hom axis [{}, {}] exceeds [{}, {}]",
                self.hom_min, self.hom_max, HOM_RANGE.0, HOM_RANGE.1
            )));
        }
        Ok(())
    }

    pub fn cio_values(&self) -> Vec<f64> {
        axis_values(self.cio_min, self.cio_max, self.cio_step)
    }

    pub fn hom_values(&self) -> Vec<f64> {
        axis_values(self.hom_min, self.hom_max, self.hom_step)
    }

    /// Number of lattice points, computed without enumerating.
    pub fn cardinality(&self) -> Result<u64> {
        let c = axis_len("cio", self.cio_min, self.cio_max, self.cio_step)?;
        let h = axis_len("hom", self.hom_min, self.hom_max, self.hom_step)?;
        Ok(c.pow(3) * h.pow(3))
    }

    /// Nearest lattice point, per gene.
    pub fn project(&self, genes: [f64; 6]) -> MobilityConfig {
        let snap = |v: f64, min: f64, max: f64, step: f64| {
            let n = axis_count(min, max, step);
            let i = ((v - min) / step).round().clamp(0.0, (n - 1) as f64);
            min + i * step
        };
        let c = |v| snap(v, self.cio_min, self.cio_max, self.cio_step);
        let h = |v| snap(v, self.hom_min, self.hom_max, self.hom_step);
        MobilityConfig {
            cio_db: [c(genes[0]), c(genes[1]), c(genes[2])],
            hom_db: [h(genes[3]), h(genes[4]), h(genes[5])],
        }
    }

    /// Whether `config` lies exactly on the lattice.
    pub fn contains(&self, config: &MobilityConfig) -> bool {
        self.project(config.genes()) == *config
    }
}

fn axis_count(min: f64, max: f64, step: f64) -> u64 {
    ((max - min) / step + LATTICE_EPS).floor() as u64 + 1
}

fn axis_len(name: &str, min: f64, max: f64, step: f64) -> Result<u64> {
    if !(min.is_finite() && max.is_finite() && step.is_finite()) {
        return Err(CopError::Config(format!("{name} axis must be finite")));
    }
    if step <= 0.0 {
        return Err(CopError::Config(format!("{name} step must be positive")));
    }
    if min > max {
        return Err(CopError::Config(format!("{name} min exceeds max")));
    }
    Ok(axis_count(min, max, step))
}

fn axis_values(min: f64, max: f64, step: f64) -> Vec<f64> {
    (0..axis_count(min, max, step))
        .map(|i| min + i as f64 * step)
        .collect()
}

/// Lazily walks the lattice in lexicographic order of
/// `(cio1, cio2, cio3, hom1, hom2, hom3)`.
#[derive(Debug, Clone)]
pub struct GridIter {
    cio: Vec<f64>,
    hom: Vec<f64>,
    next: u64,
    len: u64,
}

impl GridIter {
    fn config_at(&self, mut index: u64) -> MobilityConfig {
        let (nc, nh) = (self.cio.len() as u64, self.hom.len() as u64);
        let mut digits = [0usize; 6];
        for (pos, d) in digits.iter_mut().enumerate().rev() {
            let radix = if pos < 3 { nc } else { nh };
            *d = (index % radix) as usize;
            index /= radix;
        }
        MobilityConfig {
            cio_db: [self.cio[digits[0]], self.cio[digits[1]], self.cio[digits[2]]],
            hom_db: [self.hom[digits[3]], self.hom[digits[4]], self.hom[digits[5]]],
        }
    }
}

impl Iterator for GridIter {
    type Item = MobilityConfig;

    fn next(&mut self) -> Option<MobilityConfig> {
        if self.next >= self.len {
            return None;
        }
        let config = self.config_at(self.next);
        self.next += 1;
        Some(config)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = (self.len - self.next) as usize;
        (rest, Some(rest))
    }

    fn nth(&mut self, n: usize) -> Option<MobilityConfig> {
        self.next = self.next.saturating_add(n as u64).min(self.len);
        self.next()
    }
}

impl ExactSizeIterator for GridIter {}

/// Every lattice point of `grid`, lexicographically ordered.
pub fn enumerate_grid(grid: &ParameterGrid) -> Result<GridIter> {
    grid.validate()?;
    let cardinality = grid.cardinality()?;
    if cardinality > ENUMERATION_LIMIT {
        return Err(CopError::GridTooLarge {
            cardinality,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(GridIter {
        cio: grid.cio_values(),
        hom: grid.hom_values(),
        next: 0,
        len: cardinality,
    })
}
