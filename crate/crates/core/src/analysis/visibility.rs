use serde::Serialize;

use crate::error::{ensure_nonneg, Error, Result};

/// `C(theta) = A (1 + V cos(4 theta - phi)) + floor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VisibilityFit {
    pub amplitude: f64,
    /// Clamped to `[0, 1]`; see `raw_visibility` and `nonphysical`.
    pub visibility: f64,
    pub raw_visibility: f64,
    pub nonphysical: bool,
    pub phase_deg: f64,
    pub offset_floor: f64,
    pub residual_rms: f64,
    pub amplitude_se: f64,
    pub visibility_se: f64,
}

impl VisibilityFit {
    /// Fitted count at the curve maximum.
    pub fn peak(&self) -> f64 {
        self.amplitude * (1.0 + self.visibility) + self.offset_floor
    }

    pub fn peak_se(&self) -> f64 {
        ((1.0 + self.visibility).powi(2) * self.amplitude_se.powi(2)
            + self.amplitude.powi(2) * self.visibility_se.powi(2))
        .sqrt()
    }

    pub fn model(&self, angle_deg: f64) -> f64 {
        let arg = (4.0 * angle_deg - self.phase_deg).to_radians();
        self.amplitude * (1.0 + self.raw_visibility * arg.cos()) + self.offset_floor
    }
}

type M3 = [[f64; 3]; 3];

fn inverse(m: &M3) -> Option<M3> {
    let c = |r: usize, k: usize| {
        m[(r + 1) % 3][(k + 1) % 3] * m[(r + 2) % 3][(k + 2) % 3]
            - m[(r + 1) % 3][(k + 2) % 3] * m[(r + 2) % 3][(k + 1) % 3]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let scale = m.iter().flatten().fold(0.0f64, |a, &x| a.max(x.abs()));
    if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = c(k, r) / det;
        }
    }
    Some(inv)
}

fn mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for k in 0..3 {
            out[r][k] = (0..3).map(|j| a[r][j] * b[j][k]).sum();
        }
    }
    out
}

pub fn fit_visibility(angles_deg: &[f64], counts: &[f64]) -> Result<VisibilityFit> {
    fit_visibility_with_floor(angles_deg, counts, 0.0)
}

/// Linear regression on `{1, cos 4 theta, sin 4 theta}`.
///
/// The constant term absorbs both `A` and the floor, which the regression
/// cannot separate; the floor is therefore a known input (for example the
/// measured accidental level), not a fitted parameter. Standard errors use
/// Poisson weights `var = max(count, 1)` propagated through the
/// least-squares estimator.
pub fn fit_visibility_with_floor(
    angles_deg: &[f64],
    counts: &[f64],
    offset_floor: f64,
) -> Result<VisibilityFit> {
    if angles_deg.len() != counts.len() {
        return Err(Error::invalid("counts", "length differs from angles"));
    }
    ensure_nonneg("offset_floor", offset_floor)?;
    for &c in counts {
        ensure_nonneg("counts", c)?;
    }
    for &a in angles_deg {
        crate::error::ensure_finite("angle", a)?;
    }
    // cos 4 theta and sin 4 theta repeat every 90 degrees.
    let mut distinct: Vec<i64> = angles_deg
        .iter()
        .map(|a| (a.rem_euclid(90.0) * 1e6).round() as i64 % 90_000_000)
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Underdetermined {
            distinct: distinct.len(),
        });
    }

    let rows: Vec<[f64; 3]> = angles_deg
        .iter()
        .map(|a| {
            let t = (4.0 * a).to_radians();
            [1.0, t.cos(), t.sin()]
        })
        .collect();
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    let mut meat = [[0.0; 3]; 3];
    for (x, &y) in rows.iter().zip(counts) {
        for r in 0..3 {
            xty[r] += x[r] * y;
            for k in 0..3 {
                xtx[r][k] += x[r] * x[k];
                meat[r][k] += x[r] * x[k] * y.max(1.0);
            }
        }
    }
    let inv = inverse(&xtx).ok_or(Error::Underdetermined {
        distinct: distinct.len(),
    })?;
    let beta: [f64; 3] = std::array::from_fn(|r| (0..3).map(|k| inv[r][k] * xty[k]).sum());
    let cov = mul(&mul(&inv, &meat), &inv);

    let amplitude = beta[0] - offset_floor;
    if amplitude <= 0.0 {
        return Err(Error::Nonphysical(format!(
            "fitted amplitude {amplitude} is not positive"
        )));
    }
    let r = beta[1].hypot(beta[2]);
    let raw = r / amplitude;
    let phase_deg = beta[2].atan2(beta[1]).to_degrees();
    let sse: f64 = rows
        .iter()
        .zip(counts)
        .map(|(x, &y)| (y - (beta[0] + beta[1] * x[1] + beta[2] * x[2])).powi(2))
        .sum();
    let g = if r > 0.0 {
        [
            -r / (amplitude * amplitude),
            beta[1] / (r * amplitude),
            beta[2] / (r * amplitude),
        ]
    } else {
        [0.0, 1.0 / amplitude, 0.0]
    };
    let var_v: f64 = (0..3)
        .map(|i| (0..3).map(|j| g[i] * cov[i][j] * g[j]).sum::<f64>())
        .sum();
    Ok(VisibilityFit {
        amplitude,
        visibility: raw.min(1.0),
        raw_visibility: raw,
        nonphysical: raw > 1.0,
        phase_deg,
        offset_floor,
        residual_rms: (sse / counts.len() as f64).sqrt(),
        amplitude_se: cov[0][0].max(0.0).sqrt(),
        visibility_se: var_v.max(0.0).sqrt(),
    })
}
