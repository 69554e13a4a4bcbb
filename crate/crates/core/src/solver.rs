//! Implicit finite-difference scheme in parabolic similarity coordinates.
//!
//! The unknown is the deviation `w = v - Psi` from the zero-precipitation
//! profile, which satisfies
//!
//! ```text
//! s w_s - eta w_eta = 2 w_etaeta - 2 s^2 q (Psi + w)
//! ```
//!
//! on `eta_i = i * d_eta`, `i = 0..6N`, with a mirror ghost node at the
//! origin and a homogeneous Dirichlet node one past the last stored cell.
//! Diffusion and advection are implicit (upwind advection), the reaction is
//! explicit. The precipitation field `q` is binary on `eta >= alpha` and is
//! carried along the characteristics `eta * s = const` into `eta < alpha`.

use crate::diagnostics::{DiagnosticsRecord, Recorder};
use crate::error::{Error, Result};
use crate::profiles::{psi, ModelParams, TargetProfile};

/// Ratio between the full computational domain and `[0, alpha]`.
pub const DOMAIN_FACTOR: usize = 6;

const MIN_PIVOT: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// Cells on `[0, alpha]`.
    pub n: usize,
    pub n_full: usize,
    pub d_eta: f64,
    /// Number of time steps.
    pub m: usize,
    pub s_max: f64,
    pub d_s: f64,
}

impl Grid {
    pub fn eta(&self, i: usize) -> f64 {
        i as f64 * self.d_eta
    }

    pub fn s(&self, j: usize) -> f64 {
        j as f64 * self.d_s
    }

    /// Time index closest to similarity time `s`.
    pub fn step_index(&self, s: f64) -> usize {
        ((s / self.d_s).round().max(0.0) as usize).min(self.m)
    }
}

pub fn build_grid(params: &ModelParams, n: usize, m: usize, s_max: f64) -> Result<Grid> {
    if n < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 cells on [0, alpha], got {n}")));
    }
    if !(s_max.is_finite() && s_max > 0.0) {
        return Err(Error::InvalidGrid(format!("s_max must be positive, got {s_max}")));
    }
    // m = 0 is allowed: a run of zero steps only records the initial state.
    let d_s = if m == 0 { s_max } else { s_max / m as f64 };
    Ok(Grid {
        n,
        n_full: DOMAIN_FACTOR * n,
        d_eta: params.alpha / n as f64,
        m,
        s_max,
        d_s,
    })
}

/// `Psi` sampled on the grid nodes.
pub fn psi_on_grid(params: &ModelParams, grid: &Grid) -> Vec<f64> {
    (0..grid.n_full).map(|i| psi(params, grid.eta(i))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    /// Time index; the state represents `s_j = j * d_s`.
    pub j: usize,
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    /// Rightmost index flagged by the ignition recursion, `None` before the
    /// first ignition.
    pub i_precip: Option<usize>,
    /// `q` at `eta = alpha` for every time index so far.
    pub q_hist: Vec<f64>,
    /// Prefix sums of `q_hist`.
    pub q_prefix: Vec<f64>,
    pub q_running: f64,
    /// Largest physical position `x = eta * s` ever ignited on `eta >= alpha`.
    pub extent_x: f64,
}

impl SolverState {
    /// `w = 0`, `q = 0` at `s = 0`.
    pub fn initial(grid: &Grid) -> Self {
        Self {
            j: 0,
            w: vec![0.0; grid.n_full],
            q: vec![0.0; grid.n_full],
            i_precip: None,
            q_hist: vec![0.0],
            q_prefix: vec![0.0],
            q_running: 0.0,
            extent_x: 0.0,
        }
    }
}

/// Tridiagonal system stored by diagonals. `lower[0]` and `upper[n - 1]` are
/// unused and kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagonalSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Builds `A^j w^j = b^{j-1}` for the step from `state.j` to `state.j + 1`.
pub fn assemble_system(state: &SolverState, grid: &Grid, psi_vals: &[f64]) -> TridiagonalSystem {
    let len = grid.n_full;
    let j = (state.j + 1) as f64;
    let inv_h2 = 1.0 / (grid.d_eta * grid.d_eta);
    let react = 2.0 * j * j * grid.d_s * grid.d_s;

    let mut lower = vec![0.0; len];
    let mut diag = vec![0.0; len];
    let mut upper = vec![0.0; len];
    let mut rhs = vec![0.0; len];
    for i in 0..len {
        let fi = i as f64;
        diag[i] = j + fi + 4.0 * inv_h2;
        if i >= 1 {
            lower[i] = -2.0 * inv_h2;
        }
        if i + 1 < len {
            upper[i] = -fi - 2.0 * inv_h2;
        }
        let w = state.w[i];
        rhs[i] = j * w - react * state.q[i] * (psi_vals[i] + w);
    }
    // Mirror ghost w_{-1} = w_1 folds the lower coupling into row 0.
    upper[0] = -4.0 * inv_h2;
    TridiagonalSystem {
        lower,
        diag,
        upper,
        rhs,
    }
}

/// Thomas algorithm (Gaussian elimination without pivoting).
pub fn thomas_solve(sys: &TridiagonalSystem) -> Result<Vec<f64>> {
    let n = sys.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];

    let mut pivot = sys.diag[0];
    if pivot.abs() < MIN_PIVOT {
        return Err(Error::SingularPivot { row: 0, pivot });
    }
    c[0] = sys.upper[0] / pivot;
    d[0] = sys.rhs[0] / pivot;
    for i in 1..n {
        pivot = sys.diag[i] - sys.lower[i] * c[i - 1];
        if pivot.abs() < MIN_PIVOT {
            return Err(Error::SingularPivot { row: i, pivot });
        }
        c[i] = sys.upper[i] / pivot;
        d[i] = (sys.rhs[i] - sys.lower[i] * d[i - 1]) / pivot;
    }

    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Recomputes `q` for the state whose `w` has just been advanced to `state.j`.
pub fn update_precipitation(state: &mut SolverState, grid: &Grid, psi_vals: &[f64], u_star: f64) {
    let j = state.j;
    let n = grid.n;
    debug_assert!(j >= 1);

    // Outer region: binary q up to the rightmost ignited index.
    let crossed = (n..grid.n_full)
        .rev()
        .find(|&k| state.w[k] + psi_vals[k] > u_star);
    let carried = state.i_precip.map(|i| i * (j - 1) / j);
    let i_precip = crossed.max(carried);
    state.i_precip = i_precip;
    for i in n..grid.n_full {
        state.q[i] = match i_precip {
            Some(top) if i <= top => 1.0,
            _ => 0.0,
        };
    }
    if let Some(top) = i_precip.filter(|&top| top >= n) {
        state.extent_x = state.extent_x.max(grid.eta(top) * grid.s(j));
    }

    let q_alpha = state.q[n];
    state.q_hist.push(q_alpha);
    state.q_running += q_alpha;
    state.q_prefix.push(state.q_running);

    // Inner region: transport along eta * s = const.
    if j <= n {
        for i in 0..n {
            state.q[i] = state.q_hist[i * j / n];
        }
    } else {
        let scale = n as f64 / j as f64;
        for i in 0..n {
            let lo = i * j / n;
            let hi = (i + 1) * j / n;
            state.q[i] = scale * (state.q_prefix[hi] - state.q_prefix[lo]);
        }
    }
}

/// Advances the state by one time step.
pub fn step(
    state: &mut SolverState,
    grid: &Grid,
    psi_vals: &[f64],
    params: &ModelParams,
) -> Result<()> {
    let sys = assemble_system(state, grid, psi_vals);
    state.w = thomas_solve(&sys)?;
    state.j += 1;
    update_precipitation(state, grid, psi_vals, params.u_star);
    Ok(())
}

/// Borrowed view of the solver state handed to observers.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub j: usize,
    pub s: f64,
    pub grid: &'a Grid,
    pub psi: &'a [f64],
    pub w: &'a [f64],
    pub q: &'a [f64],
    pub i_precip: Option<usize>,
    pub state: &'a SolverState,
}

pub trait Observer {
    /// Steps at which this observer needs a snapshot in addition to the
    /// sampling stride.
    fn extra_steps(&self) -> Vec<usize> {
        Vec::new()
    }

    fn observe(&mut self, snap: &Snapshot<'_>);
}

/// A single run: parameters, grid, precomputed `Psi`, and the evolving state.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    grid: Grid,
    psi: Vec<f64>,
    state: SolverState,
    precipitation: bool,
}

impl Simulation {
    pub fn new(params: ModelParams, grid: Grid) -> Self {
        let psi = psi_on_grid(&params, &grid);
        let state = SolverState::initial(&grid);
        Self {
            params,
            grid,
            psi,
            state,
            precipitation: true,
        }
    }

    /// With precipitation disabled `q` stays zero and the exact steady
    /// state `w = 0` must persist.
    pub fn without_precipitation(mut self) -> Self {
        self.precipitation = false;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn step(&mut self) -> Result<()> {
        if self.precipitation {
            step(&mut self.state, &self.grid, &self.psi, &self.params)
        } else {
            let sys = assemble_system(&self.state, &self.grid, &self.psi);
            self.state.w = thomas_solve(&sys)?;
            self.state.j += 1;
            self.state.q_hist.push(0.0);
            self.state.q_prefix.push(self.state.q_running);
            Ok(())
        }
    }

    /// Concentration `v = Psi + w` on the grid.
    pub fn concentration(&self) -> Vec<f64> {
        self.state.w.iter().zip(&self.psi).map(|(w, p)| w + p).collect()
    }

    pub fn snapshot(&self) -> Snapshot<'_> {
        Snapshot {
            j: self.state.j,
            s: self.grid.s(self.state.j),
            grid: &self.grid,
            psi: &self.psi,
            w: &self.state.w,
            q: &self.state.q,
            i_precip: self.state.i_precip,
            state: &self.state,
        }
    }
}

/// Runs `grid.m` steps from the zero initial state, sampling diagnostics
/// every `stride` steps (and always at the first and last step).
pub fn run(
    params: &ModelParams,
    grid: &Grid,
    target: TargetProfile,
    stride: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<DiagnosticsRecord> {
    let stride = stride.max(1);
    let mut sim = Simulation::new(*params, *grid);
    let mut recorder = Recorder::new(params, grid, target)?;
    let mut extra: Vec<usize> = observers.iter().flat_map(|o| o.extra_steps()).collect();
    extra.sort_unstable();
    extra.dedup();

    let visit = |sim: &Simulation, recorder: &mut Recorder, observers: &mut [&mut dyn Observer]| -> Result<()> {
        let j = sim.state().j;
        let sampled = j.is_multiple_of(stride) || j == grid.m;
        if sampled {
            recorder.sample(&sim.snapshot())?;
        }
        if sampled || extra.binary_search(&j).is_ok() {
            let snap = sim.snapshot();
            for o in observers.iter_mut() {
                o.observe(&snap);
            }
        }
        Ok(())
    };

    visit(&sim, &mut recorder, observers)?;
    for _ in 0..grid.m {
        sim.step()?;
        visit(&sim, &mut recorder, observers)?;
    }
    Ok(recorder.finish())
}
