use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::ForceVector;

/// Force levels of the calibration grid, per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub fz_levels: Vec<f64>,
    pub fx_levels: Vec<f64>,
    pub fy_levels: Vec<f64>,
}

fn steps(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

impl CalibrationGrid {
    /// 3 N normal spacing, 3 N shear-x, 6 N shear-y: 7 x 3 x 3 = 63 nodes.
    pub fn sparse() -> Self {
        CalibrationGrid {
            fz_levels: steps(0.0, 18.0, 7),
            fx_levels: steps(-3.0, 3.0, 3),
            fy_levels: steps(-6.0, 6.0, 3),
        }
    }

    /// 13 x 9 x 9 = 1053 nodes.
    pub fn medium() -> Self {
        CalibrationGrid {
            fz_levels: steps(0.0, 18.0, 13),
            fx_levels: steps(-3.0, 3.0, 9),
            fy_levels: steps(-6.0, 6.0, 9),
        }
    }

    /// 25 x 13 x 21 = 6825 nodes, the size of a per-finger human calibration.
    pub fn dense() -> Self {
        CalibrationGrid {
            fz_levels: steps(0.0, 18.0, 25),
            fx_levels: steps(-3.0, 3.0, 13),
            fy_levels: steps(-6.0, 6.0, 21),
        }
    }

    pub fn len(&self) -> usize {
        self.fz_levels.len() * self.fx_levels.len() * self.fy_levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("fz", &self.fz_levels, 0.0, 18.0),
            ("fx", &self.fx_levels, -3.0, 3.0),
            ("fy", &self.fy_levels, -6.0, 6.0),
        ];
        for (name, levels, lo, hi) in axes {
            if levels.is_empty() {
                return Err(Error::domain(format!("{name} level list is empty")));
            }
            if levels.iter().any(|v| !(lo..=hi).contains(v)) {
                return Err(Error::domain(format!("{name} levels must lie in [{lo}, {hi}]")));
            }
            if levels.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::domain(format!("{name} levels must be strictly increasing")));
            }
        }
        Ok(())
    }
}

/// Full Cartesian product, normal force outermost, then shear-x, then shear-y.
pub fn make_grid(grid: &CalibrationGrid) -> Result<Vec<ForceVector>> {
    grid.validate()?;
    let mut out = Vec::with_capacity(grid.len());
    for &fz in &grid.fz_levels {
        for &fx in &grid.fx_levels {
            for &fy in &grid.fy_levels {
                out.push(ForceVector::new(fx, fy, fz));
            }
        }
    }
    Ok(out)
}
