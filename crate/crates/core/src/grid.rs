use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    /// Whole line `x ∈ [−L, L]`.
    Line,
    /// Radially symmetric fields in `ℝ^N`, `r ∈ [0, L]`.
    Radial(u32),
}

impl Geometry {
    /// Number of spatial directions the diffusive CFL bound accounts for.
    pub fn n_eff(&self) -> f64 {
        match *self {
            Geometry::Line => 1.0,
            Geometry::Radial(n) => f64::from(n),
        }
    }
}

/// Uniform cell-centred grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub geometry: Geometry,
    pub h: f64,
    pub half_width: f64,
    pub n: usize,
}

/// Area of the unit sphere in `ℝ^N` (`ω₁ = 2`, `ω₂ = 2π`, `ω₃ = 4π`).
pub fn unit_sphere_area(n: u32) -> f64 {
    let (mut w, mut k) = if n % 2 == 1 { (2.0, 1) } else { (2.0 * std::f64::consts::PI, 2) };
    while k < n {
        w *= 2.0 * std::f64::consts::PI / f64::from(k);
        k += 2;
    }
    w
}

impl Grid {
    /// Builds the grid with cell width as close to `h` as divides the domain.
    /// Line grids always have an even cell count.
    pub fn new(geometry: Geometry, h: f64, half_width: f64) -> Result<Self> {
        if !(h > 0.0 && half_width > 0.0) {
            return Err(Error::InvalidParams(format!(
                "grid needs h > 0 and L > 0, got h = {h}, L = {half_width}"
            )));
        }
        if let Geometry::Radial(0) = geometry {
            return Err(Error::InvalidParams("radial geometry needs N >= 1".into()));
        }
        let span = match geometry {
            Geometry::Line => 2.0 * half_width,
            Geometry::Radial(_) => half_width,
        };
        // even on the line so that x = 0 is a face, as in the radial layout
        let n = match geometry {
            Geometry::Line => 2 * (half_width / h).round() as usize,
            Geometry::Radial(_) => (span / h).round() as usize,
        };
        if n < 16 {
            return Err(Error::InvalidParams(format!(
                "grid needs at least 16 cells, got {n}"
            )));
        }
        let h = span / n as f64;
        Ok(Self {
            geometry,
            h,
            half_width,
            n,
        })
    }

    /// Signed cell centre (`x_i` on the line, `r_i` radially).
    pub fn center(&self, i: usize) -> f64 {
        match self.geometry {
            Geometry::Line => -self.half_width + (i as f64 + 0.5) * self.h,
            Geometry::Radial(_) => (i as f64 + 0.5) * self.h,
        }
    }

    /// Distance of the cell centre from the origin.
    pub fn radius(&self, i: usize) -> f64 {
        self.center(i).abs()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Measure of cell `i` in `ℝ^N`: `h` on the line, `ω_N ∫ r^{N−1} dr`
    /// over the shell radially.
    pub fn cell_measure(&self, i: usize) -> f64 {
        match self.geometry {
            Geometry::Line => self.h,
            Geometry::Radial(n) => {
                let lo = i as f64 * self.h;
                let hi = lo + self.h;
                let nf = f64::from(n);
                unit_sphere_area(n) * (hi.powi(n as i32) - lo.powi(n as i32)) / nf
            }
        }
    }

    /// Measure of the face between cells `i` and `i + 1` (area of the sphere
    /// of radius `r_{i+1/2}` radially, 1 on the line).
    pub fn face_measure(&self, i: usize) -> f64 {
        match self.geometry {
            Geometry::Line => 1.0,
            Geometry::Radial(n) => {
                let r = (i as f64 + 1.0) * self.h;
                unit_sphere_area(n) * r.powi(n as i32 - 1)
            }
        }
    }
}
