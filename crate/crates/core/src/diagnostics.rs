//! Convergence observables for a run.
//!
//! Besides the uniform distance to the conjectured limit profile, two
//! integrals of the precipitation record along `eta = alpha` are tracked:
//!
//! ```text
//! h(x)     = (1/x) * int_0^x xi^2 p*(xi) dxi
//! Gamma(x) = x * int_x^inf p*(xi) dxi
//! ```
//!
//! Both tend to `gamma` exactly when the concentration tends to
//! `Phi_gamma`. The record `q_hist[k]` is read as `p*(alpha * s_k)`, and all
//! integrals are first-order Riemann sums with `dxi = alpha * d_s`.

use crate::error::{Error, Result};
use crate::profiles::{psi, ModelParams, TargetProfile};
use crate::solver::{Grid, Snapshot, SolverState};

/// One row of the diagnostics time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub sup_err: f64,
    pub v_alpha: f64,
    pub h: f64,
    pub gamma_tail: f64,
    pub extent_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    /// Strictly increasing in `s`.
    pub samples: Vec<Sample>,
    pub target: TargetProfile,
    pub matched_gamma: f64,
}

impl DiagnosticsRecord {
    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Sample whose time is closest to `s`.
    pub fn at(&self, s: f64) -> Option<&Sample> {
        self.samples
            .iter()
            .min_by(|a, b| (a.s - s).abs().total_cmp(&(b.s - s).abs()))
    }
}

/// Tail integral together with an estimate of what the finite record misses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    /// `x * sum_{alpha s_k >= x} q_k alpha d_s`, a lower bound of the
    /// untruncated tail.
    pub value: f64,
    /// Missing contribution beyond the record end `X` if the tail decays
    /// like `gamma / xi^2`: `gamma_est * x / X` with
    /// `gamma_est = value / (1 - x / X)`.
    pub truncation_bound: f64,
}

/// `max_i |Psi_i + w_i - target_i|` from precomputed node values.
pub fn sup_error_on_nodes(w: &[f64], psi_vals: &[f64], target_vals: &[f64]) -> f64 {
    w.iter()
        .zip(psi_vals)
        .zip(target_vals)
        .map(|((w, p), t)| (w + p - t).abs())
        .fold(0.0, f64::max)
}

/// Uniform distance between `v = Psi + w` and the target over the grid nodes.
pub fn sup_error(w: &[f64], grid: &Grid, target: &TargetProfile, params: &ModelParams) -> Result<f64> {
    let mut err: f64 = 0.0;
    for (i, wi) in w.iter().enumerate().take(grid.n_full) {
        let eta = grid.eta(i);
        err = err.max((wi + psi(params, eta) - target.eval(eta)?).abs());
    }
    Ok(err)
}

fn record_index(x: f64, grid: &Grid, params: &ModelParams) -> f64 {
    // Relative slack so that x = alpha * s_j maps back to j.
    x / (params.alpha * grid.d_s) * (1.0 + 4.0 * f64::EPSILON)
}

/// `h` at the record position `x_J = alpha * s_J`.
pub fn discrete_h_at(q_hist: &[f64], grid: &Grid, params: &ModelParams, index: usize) -> Result<f64> {
    if index >= q_hist.len() {
        return Err(Error::OutOfRange {
            what: "record index",
            value: index as f64,
            limit: q_hist.len().saturating_sub(1) as f64,
        });
    }
    if index == 0 {
        return Ok(0.0);
    }
    let dxi = params.alpha * grid.d_s;
    let sum: f64 = q_hist[..=index]
        .iter()
        .enumerate()
        .map(|(k, q)| {
            let xi = k as f64 * dxi;
            xi * xi * q
        })
        .sum();
    Ok(sum * dxi / (index as f64 * dxi))
}

/// Weighted average `h(x) = (1/x) int_0^x xi^2 p*(xi) dxi`.
pub fn discrete_h(q_hist: &[f64], grid: &Grid, params: &ModelParams, x: f64) -> Result<f64> {
    let limit = params.alpha * grid.d_s * q_hist.len().saturating_sub(1) as f64;
    if x.is_nan() || x < 0.0 || x > limit * (1.0 + 1e-12) {
        return Err(Error::OutOfRange { what: "x", value: x, limit });
    }
    let index = (record_index(x, grid, params).floor() as usize).min(q_hist.len() - 1);
    discrete_h_at(q_hist, grid, params, index)
}

/// Tail integral `Gamma(x) = x int_x^inf p*(xi) dxi`, truncated at the end
/// of the record.
pub fn discrete_gamma_tail(
    q_hist: &[f64],
    grid: &Grid,
    params: &ModelParams,
    x: f64,
) -> Result<TailEstimate> {
    let last = q_hist.len().saturating_sub(1);
    let dxi = params.alpha * grid.d_s;
    let end = last as f64 * dxi;
    if x.is_nan() || x < 0.0 || x >= end {
        return Err(Error::OutOfRange { what: "x", value: x, limit: end });
    }
    let first = record_index(x, grid, params).ceil() as usize;
    let mass: f64 = q_hist[first.min(last)..].iter().sum::<f64>() * dxi;
    let value = x * mass;
    let frac = x / end;
    Ok(TailEstimate {
        value,
        truncation_bound: value / (1.0 - frac) * frac,
    })
}

/// Largest physical position ignited on `eta >= alpha` so far.
pub fn precipitation_extent(state: &SolverState) -> f64 {
    state.extent_x
}

/// Builds a [`DiagnosticsRecord`] from snapshots.
#[derive(Debug, Clone)]
pub struct Recorder {
    params: ModelParams,
    grid: Grid,
    target: TargetProfile,
    target_vals: Vec<f64>,
    samples: Vec<Sample>,
}

impl Recorder {
    pub fn new(params: &ModelParams, grid: &Grid, target: TargetProfile) -> Result<Self> {
        let target_vals = (0..grid.n_full)
            .map(|i| target.eval(grid.eta(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: *params,
            grid: *grid,
            target,
            target_vals,
            samples: Vec::new(),
        })
    }

    pub fn target_values(&self) -> &[f64] {
        &self.target_vals
    }

    pub fn sample(&mut self, snap: &Snapshot<'_>) -> Result<Sample> {
        let state = snap.state;
        let n = self.grid.n;
        let j = snap.j;
        let gamma_tail = if j >= 2 {
            let x = 0.5 * self.params.alpha * snap.s;
            discrete_gamma_tail(&state.q_hist, &self.grid, &self.params, x)?.value
        } else {
            0.0
        };
        let sample = Sample {
            s: snap.s,
            sup_err: sup_error_on_nodes(snap.w, snap.psi, &self.target_vals),
            v_alpha: snap.w[n] + snap.psi[n],
            h: discrete_h_at(&state.q_hist, &self.grid, &self.params, j)?,
            gamma_tail,
            extent_x: precipitation_extent(state),
        };
        if let Some(prev) = self.samples.last() {
            debug_assert!(sample.s > prev.s);
        }
        self.samples.push(sample);
        Ok(sample)
    }

    pub fn finish(self) -> DiagnosticsRecord {
        DiagnosticsRecord {
            samples: self.samples,
            matched_gamma: self.target.gamma(),
            target: self.target,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::SelfSimilarProfile;
    use crate::solver::{build_grid, psi_on_grid};

    fn setup(u_star: f64, n: usize, m: usize, s_max: f64) -> (ModelParams, Grid) {
        let p = ModelParams::new(1.0, 1.0, u_star).unwrap();
        let g = build_grid(&p, n, m, s_max).unwrap();
        (p, g)
    }

    #[test]
    fn sup_error_zero_on_exact_profile() {
        let (p, g) = setup(0.15, 20, 10, 1.0);
        let target = TargetProfile::for_params(&p).unwrap();
        let w: Vec<f64> = (0..g.n_full)
            .map(|i| target.eval(g.eta(i)).unwrap() - psi(&p, g.eta(i)))
            .collect();
        assert!(sup_error(&w, &g, &target, &p).unwrap() < 1e-16);
    }

    #[test]
    fn sup_error_of_psi_peaks_at_origin() {
        let (p, g) = setup(0.15, 20, 10, 1.0);
        let target = TargetProfile::for_params(&p).unwrap();
        let w = vec![0.0; g.n_full];
        let err = sup_error(&w, &g, &target, &p).unwrap();
        let gap: Vec<f64> = (0..g.n_full)
            .map(|i| psi(&p, g.eta(i)) - target.eval(g.eta(i)).unwrap())
            .collect();
        let peak = gap.iter().cloned().fold(0.0, f64::max);
        assert_eq!(err, peak);
        // Phi_gamma(0) = 0 while Psi is flat on [0, alpha], so the gap is
        // largest at the origin, not at the source.
        assert_eq!(err, gap[0]);
        assert!((err - p.psi_alpha()).abs() < 1e-15);
        assert!(gap[g.n] < gap[0]);
    }

    #[test]
    fn sup_error_single_perturbation() {
        let (p, g) = setup(0.15, 20, 10, 1.0);
        let target = TargetProfile::for_params(&p).unwrap();
        let psi_vals = psi_on_grid(&p, &g);
        let tv: Vec<f64> = (0..g.n_full).map(|i| target.eval(g.eta(i)).unwrap()).collect();
        let mut w: Vec<f64> = tv.iter().zip(&psi_vals).map(|(t, p)| t - p).collect();
        w[37] += 0.0125;
        assert!((sup_error_on_nodes(&w, &psi_vals, &tv) - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn empty_record_gives_zero() {
        let (p, g) = setup(0.15, 20, 1000, 10.0);
        let q = vec![0.0; 1001];
        assert_eq!(discrete_h(&q, &g, &p, 5.0).unwrap(), 0.0);
        assert_eq!(discrete_gamma_tail(&q, &g, &p, 5.0).unwrap().value, 0.0);
    }

    #[test]
    fn h_of_step_record() {
        // q = 1 on [0, X], so h(x) = X^3 / (3x) for x >= X.
        let (p, g) = setup(0.15, 20, 10_000, 10.0);
        let cut = 4000;
        let q: Vec<f64> = (0..=10_000).map(|k| if k <= cut { 1.0 } else { 0.0 }).collect();
        let big_x = cut as f64 * g.d_s;
        for x in [5.0, 7.5, 10.0] {
            let h = discrete_h(&q, &g, &p, x).unwrap();
            let want = big_x.powi(3) / (3.0 * x);
            assert!((h - want).abs() < 5.0 * g.d_s * big_x * big_x / x, "x = {x}");
        }
    }

    #[test]
    fn tail_beyond_support_vanishes() {
        let (p, g) = setup(0.15, 20, 1000, 10.0);
        let q: Vec<f64> = (0..=1000).map(|k| if k < 300 { 1.0 } else { 0.0 }).collect();
        assert_eq!(discrete_gamma_tail(&q, &g, &p, 4.0).unwrap().value, 0.0);
        assert!(discrete_gamma_tail(&q, &g, &p, 2.0).unwrap().value > 0.0);
    }

    #[test]
    fn out_of_range() {
        let (p, g) = setup(0.15, 20, 100, 1.0);
        let q = vec![0.0; 101];
        assert!(matches!(discrete_h(&q, &g, &p, 1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(discrete_gamma_tail(&q, &g, &p, 1.0), Err(Error::OutOfRange { .. })));
        assert!(discrete_h(&q, &g, &p, 1.0).is_ok());
        assert!(discrete_h_at(&q, &g, &p, 101).is_err());
    }

    #[test]
    fn h_at_index_matches_position_lookup() {
        let (p, g) = setup(0.15, 20, 1000, 10.0);
        let q: Vec<f64> = (0..=1000).map(|k| ((k * 7) % 3 == 0) as u8 as f64).collect();
        for j in [1usize, 17, 500, 999, 1000] {
            let by_x = discrete_h(&q, &g, &p, p.alpha * g.s(j)).unwrap();
            assert_eq!(by_x, discrete_h_at(&q, &g, &p, j).unwrap());
        }
    }

    #[test]
    fn recorder_targets() {
        let (p, g) = setup(0.15, 20, 10, 1.0);
        let target = TargetProfile::Phi(SelfSimilarProfile::matched(&p).unwrap());
        let rec = Recorder::new(&p, &g, target).unwrap();
        assert_eq!(rec.target_values().len(), g.n_full);
        assert!((rec.target_values()[g.n] - 0.15).abs() < 1e-14);
        assert!(rec.finish().matched_gamma > 4.0);
    }
}
