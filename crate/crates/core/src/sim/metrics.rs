use crate::geometry::check_unit;
use crate::srp::DoaEstimate;
use crate::{Error, Result, Vec3};

/// Ambiguity folding matched to the array dimensionality.
///
/// A linear array only resolves the angle to its axis, so directions are
/// folded onto an arc; a planar array cannot tell the two sides of its plane
/// apart, so directions are folded onto the upper hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectionMapping {
    Arc,
    Hemisphere,
    Sphere,
}

impl DirectionMapping {
    /// Mapping for an array of dimensionality 1, 2 or 3.
    pub fn for_dimensionality(alpha: usize) -> Result<Self> {
        match alpha {
            1 => Ok(DirectionMapping::Arc),
            2 => Ok(DirectionMapping::Hemisphere),
            3 => Ok(DirectionMapping::Sphere),
            other => Err(Error::InvalidArgument(format!(
                "array dimensionality must be 1, 2 or 3, got {other}"
            ))),
        }
    }

    pub fn dimensionality(self) -> usize {
        match self {
            DirectionMapping::Arc => 1,
            DirectionMapping::Hemisphere => 2,
            DirectionMapping::Sphere => 3,
        }
    }

    pub fn apply(self, s: Vec3) -> Result<Vec3> {
        check_unit(s)?;
        Ok(self.apply_unchecked(s))
    }

    fn apply_unchecked(self, s: Vec3) -> Vec3 {
        match self {
            DirectionMapping::Arc => {
                let g = s[2].atan2(s[0].hypot(s[1]));
                [g.cos(), 0.0, g.sin()]
            }
            DirectionMapping::Hemisphere => [s[0], s[1], s[2].abs()],
            DirectionMapping::Sphere => s,
        }
    }
}

/// Folds a unit direction according to the array dimensionality `alpha`.
pub fn map_direction(s: Vec3, alpha: usize) -> Result<Vec3> {
    DirectionMapping::for_dimensionality(alpha)?.apply(s)
}

/// Energy-weighted localization error of a sequence of frame estimates.
///
/// The mapped estimated directions are averaged with weights `Y` and the
/// Euclidean distance to the mapped true direction is returned. Weights are
/// used as they are; a nonpositive total is an error.
pub fn rmse(estimates: &[DoaEstimate], truth: Vec3, mapping: DirectionMapping) -> Result<f64> {
    let target = mapping.apply(truth)?;
    let mut acc = [0.0; 3];
    let mut total = 0.0;
    for e in estimates {
        let f = mapping.apply(e.direction)?;
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v * e.energy;
        }
        total += e.energy;
    }
    if total.is_nan() || total <= 0.0 {
        return Err(Error::NonPositiveWeight(total));
    }
    Ok(acc
        .iter()
        .zip(target)
        .map(|(a, t)| (a / total - t).powi(2))
        .sum::<f64>()
        .sqrt())
}
