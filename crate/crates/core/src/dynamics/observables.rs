//! Entropy and string-breaking diagnostics.

use ndarray::Array2;

use crate::error::{invalid, numerical, Result};
use crate::linalg;
use crate::sparse::{hermitize, C64};

use super::evolve::Series;

/// `-Σ p ln p` over the spectrum of the Hermitised `ρ`.
pub fn von_neumann_entropy(rho: &Array2<C64>) -> Result<f64> {
    let p = linalg::eigvalsh(&hermitize(rho))?;
    if let Some(&low) = p.first() {
        if low < -1e-8 {
            return numerical(format!("not a density matrix: eigenvalue {low:.3e}"));
        }
    }
    Ok(p.iter()
        .map(|&x| x.clamp(0.0, 1.0))
        .filter(|&x| x > 0.0)
        .map(|x| -x * x.ln())
        .sum())
}

/// Pointwise `string - vacuum` on a shared grid.
pub fn vacuum_subtracted_fields(string: &Series, vacuum: &Series) -> Result<Series> {
    if string.times.len() != vacuum.times.len()
        || string.times.iter().zip(&vacuum.times).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return invalid("string and vacuum trajectories use different time grids");
    }
    if string.channels() != vacuum.channels() {
        return invalid("string and vacuum trajectories record different links");
    }
    let values = string
        .values
        .iter()
        .zip(&vacuum.values)
        .map(|(s, v)| s.iter().zip(v).map(|(a, b)| a - b).collect())
        .collect();
    Ok(Series {
        times: string.times.clone(),
        values,
    })
}

/// `t*(x)`: earliest sample time in `[0, t_max]` maximising `|⟨E_x(t)⟩|`,
/// for every link.
pub fn string_peak_time(fields: &Series, t_max: f64) -> Result<Vec<f64>> {
    if fields.is_empty() {
        return invalid("empty trajectory");
    }
    if t_max < 0.0 || t_max > fields.times[fields.len() - 1] + 1e-9 {
        return invalid(format!("t_max = {t_max} lies outside the trajectory"));
    }
    let last = fields.times.iter().rposition(|&t| t <= t_max + 1e-9).unwrap_or(0);
    Ok((0..fields.channels())
        .map(|x| {
            let mut best = (0usize, fields.values[0][x].abs());
            for i in 1..=last {
                let v = fields.values[i][x].abs();
                if v > best.1 {
                    best = (i, v);
                }
            }
            fields.times[best.0]
        })
        .collect())
}

/// `Ē = (1 / (n (t2 - t1))) ∫_{t1}^{t2} Σ_{x ∈ links} ⟨E_x(t)⟩ dt`, trapezoidal
/// on the sample grid, with `n` the number of links.
pub fn string_metric(fields: &Series, t1: f64, t2: f64, links: &[usize]) -> Result<f64> {
    if !(t2 > t1) {
        return invalid(format!("window [{t1}, {t2}] is empty"));
    }
    if links.is_empty() || links.iter().any(|&l| l >= fields.channels()) {
        return invalid(format!("links {links:?} outside 0..{}", fields.channels()));
    }
    let tol = 1e-9;
    if fields.is_empty() || t1 < fields.times[0] - tol || t2 > fields.times[fields.len() - 1] + tol {
        return invalid(format!("window [{t1}, {t2}] lies outside the trajectory"));
    }
    let sum = |i: usize| links.iter().map(|&l| fields.values[i][l]).sum::<f64>();
    let pts: Vec<usize> = (0..fields.len())
        .filter(|&i| fields.times[i] >= t1 - tol && fields.times[i] <= t2 + tol)
        .collect();
    if pts.len() < 2 {
        return invalid("window contains fewer than two samples");
    }
    let integral: f64 = pts
        .windows(2)
        .map(|w| 0.5 * (fields.times[w[1]] - fields.times[w[0]]) * (sum(w[0]) + sum(w[1])))
        .sum();
    let span = fields.times[pts[pts.len() - 1]] - fields.times[pts[0]];
    Ok(integral / (links.len() as f64 * span))
}

/// Largest sampled `t` with `|O(t) - O_∞| ≥ e^{-1} |O(0) - O_∞|`.
pub fn trajectory_relaxation_time(times: &[f64], values: &[f64], steady_value: f64) -> Result<f64> {
    if times.is_empty() || times.len() != values.len() {
        return invalid("time grid and values differ in length");
    }
    let initial = (values[0] - steady_value).abs();
    if initial == 0.0 {
        return Ok(0.0);
    }
    let threshold = initial * (-1.0f64).exp();
    let last = (0..times.len()).rev().find(|&i| (values[i] - steady_value).abs() >= threshold);
    Ok(last.map_or(0.0, |i| times[i]))
}
