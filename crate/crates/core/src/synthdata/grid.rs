use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ground-truth factors: one name and value count per factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorGrid {
    pub names: Vec<String>,
    pub cardinalities: Vec<usize>,
}

impl Default for FactorGrid {
    fn default() -> Self {
        FactorGrid {
            names: ["floor_hue", "wall_hue", "object_hue", "scale", "shape", "orientation"]
                .map(String::from)
                .to_vec(),
            cardinalities: vec![10, 10, 10, 8, 4, 15],
        }
    }
}

impl FactorGrid {
    pub fn new(names: Vec<String>, cardinalities: Vec<usize>) -> Result<Self> {
        let g = FactorGrid { names, cardinalities };
        g.validate()?;
        Ok(g)
    }

    /// Grid with names `f0, f1, …`.
    pub fn from_cardinalities(cardinalities: &[usize]) -> Result<Self> {
        Self::new(
            (0..cardinalities.len()).map(|i| format!("f{i}")).collect(),
            cardinalities.to_vec(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.cardinalities.is_empty() {
            return Err(Error::invalid("factor grid has no factors"));
        }
        if self.names.len() != self.cardinalities.len() {
            return Err(Error::invalid(format!(
                "{} factor names for {} cardinalities",
                self.names.len(),
                self.cardinalities.len()
            )));
        }
        if let Some(c) = self.cardinalities.iter().find(|&&c| c < 2) {
            return Err(Error::invalid(format!("factor cardinality {c} < 2")));
        }
        self.cardinalities
            .iter()
            .try_fold(1usize, |acc, &c| acc.checked_mul(c))
            .ok_or_else(|| Error::invalid("combination count overflows"))?;
        Ok(())
    }

    pub fn n_factors(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn total(&self) -> usize {
        self.cardinalities.iter().product()
    }

    pub fn check_tuple(&self, tuple: &[usize]) -> Result<()> {
        if tuple.len() != self.n_factors() {
            return Err(Error::DimensionMismatch {
                context: "factor tuple",
                expected: self.n_factors(),
                got: tuple.len(),
            });
        }
        for (f, (&v, &c)) in tuple.iter().zip(&self.cardinalities).enumerate() {
            if v >= c {
                return Err(Error::invalid(format!(
                    "factor {} value {v} outside 0..{c}",
                    self.names[f]
                )));
            }
        }
        Ok(())
    }

    /// Lexicographic rank of a tuple (last factor varies fastest).
    pub fn index_of(&self, tuple: &[usize]) -> Result<usize> {
        self.check_tuple(tuple)?;
        Ok(tuple
            .iter()
            .zip(&self.cardinalities)
            .fold(0, |acc, (&v, &c)| acc * c + v))
    }

    pub fn tuple_of(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.total() {
            return Err(Error::invalid(format!("combination {index} outside 0..{}", self.total())));
        }
        let mut t = vec![0; self.n_factors()];
        let mut rest = index;
        for f in (0..self.n_factors()).rev() {
            t[f] = rest % self.cardinalities[f];
            rest /= self.cardinalities[f];
        }
        Ok(t)
    }

    /// Factor value mapped linearly onto `[0, 1]`.
    pub fn unit_value(&self, factor: usize, value: usize) -> f64 {
        value as f64 / (self.cardinalities[factor] - 1) as f64
    }

    /// Factor value mapped linearly onto `[-1, 1]`.
    pub fn signed_value(&self, factor: usize, value: usize) -> f64 {
        2.0 * self.unit_value(factor, value) - 1.0
    }
}

/// Every factor tuple in lexicographic order; position equals `index_of`.
pub fn enumerate_combinations(grid: &FactorGrid) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(grid.total());
    let mut t = vec![0; grid.n_factors()];
    for _ in 0..grid.total() {
        out.push(t.clone());
        for f in (0..t.len()).rev() {
            t[f] += 1;
            if t[f] < grid.cardinalities[f] {
                break;
            }
            t[f] = 0;
        }
    }
    out
}
