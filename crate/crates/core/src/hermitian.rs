//! Fields of 2×2 Hermitian matrices indexed by `(t, z)`.

use num_complex::Complex64;

use crate::torus::Field;

/// Smaller eigenvalue of `[[a, b], [b̄, d]]`.
pub fn eigmin(a: f64, b: Complex64, d: f64) -> f64 {
    let mean = 0.5 * (a + d);
    let half_gap = 0.5 * (a - d);
    mean - (half_gap * half_gap + b.norm_sqr()).sqrt()
}

/// Components `(tt̄, tz̄, zz̄)` of a Hermitian (1,1)-form on one fiber; the
/// `zt̄` component is the conjugate of `tz̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    pub tt: Field,
    pub tz: Field,
    pub zz: Field,
}

impl HermitianField {
    pub fn new(tt: Field, tz: Field, zz: Field) -> Self {
        debug_assert!(tt.is_real() && zz.is_real());
        HermitianField { tt, tz, zz }
    }

    pub fn zt(&self) -> Field {
        self.tz.conj()
    }

    pub fn add(&self, other: &HermitianField) -> HermitianField {
        HermitianField {
            tt: self.tt.add(&other.tt),
            tz: self.tz.add(&other.tz),
            zz: self.zz.add(&other.zz),
        }
    }

    pub fn sub(&self, other: &HermitianField) -> HermitianField {
        HermitianField {
            tt: self.tt.sub(&other.tt),
            tz: self.tz.sub(&other.tz),
            zz: self.zz.sub(&other.zz),
        }
    }

    pub fn scale(&self, s: f64) -> HermitianField {
        HermitianField {
            tt: self.tt.scale(s),
            tz: self.tz.scale(s),
            zz: self.zz.scale(s),
        }
    }

    /// Pointwise smaller eigenvalue, as a real field.
    pub fn eigmin_field(&self) -> Field {
        let grid = self.tt.grid();
        let data = (0..grid.len())
            .map(|i| {
                eigmin(
                    self.tt.samples()[i].re,
                    self.tz.samples()[i],
                    self.zz.samples()[i].re,
                )
            })
            .collect();
        Field::from_real(grid, data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigmin_field().min_real()
    }
}
