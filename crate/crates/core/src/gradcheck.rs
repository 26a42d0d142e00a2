//! Finite-difference gradient checking.
//!
//! Compares reverse-mode gradients against central differences
//! `(f(θ+h) − f(θ−h)) / 2h` coordinate by coordinate. Run at 64-bit
//! precision; the customary tolerance 1e-4 is out of reach in 32-bit.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Result;
use crate::params::{GradBuffer, ParamId, ParamStore};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    /// Parameter and flat index where the worst error occurred.
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err < tol
    }
}

/// Relative error with a small absolute floor so near-zero pairs compare by
/// absolute difference.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Sample up to `per_param` coordinates from every parameter, so a check
/// spans each parameter group at least once.
pub fn sample_coords(
    store: &ParamStore,
    per_param: usize,
    rng: &mut SplitMix64,
) -> Vec<(ParamId, usize)> {
    let mut coords = Vec::new();
    for (id, p) in store.iter() {
        let len = p.value.len();
        if len == 0 {
            continue;
        }
        for _ in 0..per_param.min(len) {
            coords.push((id, rng.below(len)));
        }
    }
    coords
}

/// Check analytic gradients against central finite differences at the given
/// coordinates. `f` must be a deterministic scalar function of the store's
/// current values; the store is restored to its original values afterwards.
pub fn grad_check<F>(
    store: &mut ParamStore,
    analytic: &GradBuffer,
    coords: &[(ParamId, usize)],
    h: f64,
    mut f: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let mut max_rel = 0.0;
    let mut sum_rel = 0.0;
    let mut worst = None;
    for &(id, idx) in coords {
        let original = store.get(id).value.data()[idx];
        store.get_mut(id).value.data_mut()[idx] = original + h;
        let plus = f(store)?;
        store.get_mut(id).value.data_mut()[idx] = original - h;
        let minus = f(store)?;
        store.get_mut(id).value.data_mut()[idx] = original;

        let fd = (plus - minus) / (2.0 * h);
        let an = analytic.get(id).map_or(0.0, |g| g.data()[idx]);
        let rel = relative_error(an, fd);
        sum_rel += rel;
        if rel > max_rel {
            max_rel = rel;
            worst = Some((store.get(id).name.clone(), idx));
        }
    }
    Ok(GradCheckReport {
        coords_checked: coords.len(),
        max_rel_err: max_rel,
        mean_rel_err: if coords.is_empty() { 0.0 } else { sum_rel / coords.len() as f64 },
        worst,
    })
}
