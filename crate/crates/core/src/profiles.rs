//! Closed-form self-similar profiles.
//!
//! `Psi` is the steady state in similarity coordinates without any
//! precipitation. `Phi_gamma` is the steady state when the precipitation
//! function is the self-similar `p = gamma / x^2` behind the source; its
//! left branch is built from Kummer's function and its right branch from
//! `erfc`. The value of `Phi_gamma` at the source, `u*_gamma`, decreases
//! strictly in `gamma`, and the matching condition `u*_gamma = u*` selects
//! the physically relevant member of the family.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::specfun::{erf, erfc, kummer_m, Accuracy};

/// Default absolute tolerance used to detect the marginal and critical
/// knife-edge cases.
pub const DEFAULT_REGIME_TOL: f64 = 1e-9;

const MAX_BRACKET_DOUBLINGS: usize = 64;
const MAX_BISECTIONS: usize = 200;

/// The physical parameters: source position `alpha` in similarity
/// coordinates, source strength `beta`, and the supersaturation threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub u_star: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, beta: f64, u_star: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("u_star", u_star)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            alpha,
            beta,
            u_star,
        })
    }

    /// Same source, different threshold.
    pub fn with_u_star(&self, u_star: f64) -> Result<Self> {
        Self::new(self.alpha, self.beta, u_star)
    }

    /// `Psi(alpha)`, the largest concentration reachable without precipitation.
    pub fn psi_alpha(&self) -> f64 {
        psi(self, self.alpha)
    }

    /// Critical threshold `u*_0 = Psi(alpha) erf(alpha / 2)`.
    pub fn u_star_zero(&self) -> f64 {
        self.psi_alpha() * erf(self.alpha / 2.0)
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self, DEFAULT_REGIME_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `u* > Psi(alpha)`: the reaction never ignites.
    Subcritical,
    /// `u* = Psi(alpha)`.
    Marginal,
    /// `u*_0 < u* < Psi(alpha)`: precipitation stays in a bounded region.
    Transitional,
    /// `u* = u*_0`.
    Critical,
    /// `u* < u*_0`: ignition recurs for arbitrarily large `x`.
    Supercritical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subcritical => "Subcritical",
            Regime::Marginal => "Marginal",
            Regime::Transitional => "Transitional",
            Regime::Critical => "Critical",
            Regime::Supercritical => "Supercritical",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Subcritical" => Ok(Regime::Subcritical),
            "Marginal" => Ok(Regime::Marginal),
            "Transitional" => Ok(Regime::Transitional),
            "Critical" => Ok(Regime::Critical),
            "Supercritical" => Ok(Regime::Supercritical),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

/// Zero-precipitation profile
/// `Psi(eta) = (alpha beta sqrt(pi) / 2) e^{alpha^2/4} erfc(max(eta, alpha) / 2)`.
pub fn psi(params: &ModelParams, eta: f64) -> f64 {
    let a = params.alpha;
    a * params.beta * PI.sqrt() / 2.0 * (a * a / 4.0).exp() * erfc(eta.max(a) / 2.0)
}

/// Positive root of `kappa (kappa - 1) = gamma`.
pub fn kappa_of_gamma(gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::NegativeGamma(gamma));
    }
    Ok((1.0 + (4.0 * gamma + 1.0).sqrt()) / 2.0)
}

fn gamma_of_kappa(kappa: f64) -> f64 {
    kappa * (kappa - 1.0)
}

/// Value at the source of the profile with exponent `kappa`, from the
/// derivative jump `[Phi'(alpha)] = -alpha beta / 2`.
fn u_star_of_kappa(params: &ModelParams, kappa: f64, acc: Accuracy) -> Result<f64> {
    let a = params.alpha;
    let z = -a * a / 4.0;
    let m = kummer_m(kappa / 2.0, kappa + 0.5, z, acc)?;
    let m_plus = kummer_m(kappa / 2.0 + 1.0, kappa + 0.5, z, acc)?;
    let left = kappa * m_plus / (a * m);
    let right = z.exp() / (PI.sqrt() * erfc(a / 2.0));
    Ok(a * params.beta / 2.0 / (left + right))
}

/// `u*_gamma`, the value `Phi_gamma(alpha)` for which the profile carries
/// exactly the source's derivative jump.
pub fn ustar_of_gamma(params: &ModelParams, gamma: f64) -> Result<f64> {
    let kappa = kappa_of_gamma(gamma)?;
    u_star_of_kappa(params, kappa, Accuracy::default())
}

/// Solves `u*_gamma = u*` for `gamma > 0` by bisection in `kappa`.
pub fn gamma_of_ustar(params: &ModelParams) -> Result<f64> {
    let u0 = params.u_star_zero();
    if params.u_star >= u0 {
        return Err(Error::NotSupercritical {
            u_star: params.u_star,
            u_star_zero: u0,
        });
    }
    let acc = Accuracy::default();
    let excess = |kappa: f64| -> Result<f64> { Ok(u_star_of_kappa(params, kappa, acc)? - params.u_star) };

    let mut hi = 2.0;
    let mut doublings = 0;
    while excess(hi)? >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::NoRoot(format!(
                "could not bracket the matching condition for u* = {}",
                params.u_star
            )));
        }
    }
    let kappa = bisect(excess, 1.0, hi)?;
    Ok(gamma_of_kappa(kappa))
}

/// Bisection on a sign change with `f(lo) > 0 > f(hi)` or the reverse.
/// Runs until the bracket cannot be halved any further in floating point.
fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let lo_positive = f(lo)? > 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v == 0.0 {
            return Ok(mid);
        }
        if (v > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The unique `alpha* > alpha` with `Psi(alpha*) = u*`.
pub fn alpha_star(params: &ModelParams) -> Result<f64> {
    let psi_a = params.psi_alpha();
    if params.u_star >= psi_a {
        return Err(Error::NoRoot(format!(
            "u* = {} is not below Psi(alpha) = {psi_a}",
            params.u_star
        )));
    }
    let mut hi = 2.0 * params.alpha;
    let mut doublings = 0;
    while psi(params, hi) >= params.u_star {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::NoRoot("could not bracket alpha*".into()));
        }
    }
    bisect(|eta| Ok(psi(params, eta) - params.u_star), params.alpha, hi)
}

pub fn classify_regime(params: &ModelParams, tol: f64) -> Regime {
    let psi_a = params.psi_alpha();
    let u0 = params.u_star_zero();
    let u = params.u_star;
    if (u - psi_a).abs() <= tol {
        Regime::Marginal
    } else if u > psi_a {
        Regime::Subcritical
    } else if (u - u0).abs() <= tol {
        Regime::Critical
    } else if u > u0 {
        Regime::Transitional
    } else {
        Regime::Supercritical
    }
}

/// Which one-sided derivative to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A member `Phi_gamma` of the self-similar family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfSimilarProfile {
    pub gamma: f64,
    pub kappa: f64,
    /// Profile value at the source, `Phi_gamma(alpha)`.
    pub u_star_gamma: f64,
    /// Left-branch coefficient, `u*_gamma / (alpha^kappa M(kappa/2, kappa+1/2, -alpha^2/4))`.
    pub c1: f64,
    /// Right-branch coefficient, `u*_gamma / erfc(alpha / 2)`.
    pub c2: f64,
    alpha: f64,
    m_alpha: f64,
    acc: Accuracy,
}

impl SelfSimilarProfile {
    /// `Phi_gamma` scaled by its own `u*_gamma`, so the derivative jump
    /// condition holds by construction.
    pub fn from_gamma(params: &ModelParams, gamma: f64) -> Result<Self> {
        let u = ustar_of_gamma(params, gamma)?;
        Self::with_amplitude(params, gamma, u)
    }

    /// The profile selected by the matching condition for a supercritical
    /// threshold, scaled so that `Phi(alpha) = u*`.
    pub fn matched(params: &ModelParams) -> Result<Self> {
        let gamma = gamma_of_ustar(params)?;
        Self::with_amplitude(params, gamma, params.u_star)
    }

    /// `Phi_0`, the limit profile in the transitional regime.
    pub fn critical(params: &ModelParams) -> Result<Self> {
        Self::from_gamma(params, 0.0)
    }

    /// Shape of `Phi_gamma` with an arbitrary value at the source.
    pub fn with_amplitude(params: &ModelParams, gamma: f64, u_star_gamma: f64) -> Result<Self> {
        let kappa = kappa_of_gamma(gamma)?;
        let acc = Accuracy::default();
        let a = params.alpha;
        let m_alpha = kummer_m(kappa / 2.0, kappa + 0.5, -a * a / 4.0, acc)?;
        Ok(Self {
            gamma,
            kappa,
            u_star_gamma,
            c1: u_star_gamma / (a.powf(kappa) * m_alpha),
            c2: u_star_gamma / erfc(a / 2.0),
            alpha: a,
            m_alpha,
            acc,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn left_branch(&self, eta: f64) -> Result<f64> {
        let k = self.kappa;
        let m = kummer_m(k / 2.0, k + 0.5, -eta * eta / 4.0, self.acc)?;
        Ok(self.u_star_gamma * (eta / self.alpha).powf(k) * m / self.m_alpha)
    }

    pub fn right_branch(&self, eta: f64) -> f64 {
        self.c2 * erfc(eta / 2.0)
    }

    pub fn eval(&self, eta: f64) -> Result<f64> {
        if eta < self.alpha {
            self.left_branch(eta)
        } else {
            Ok(self.right_branch(eta))
        }
    }

    /// One-sided derivative. Away from `alpha` both sides agree.
    pub fn derivative(&self, eta: f64, side: Side) -> Result<f64> {
        if eta.is_nan() || eta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "derivative needs eta > 0, got {eta}"
            )));
        }
        let use_left = eta < self.alpha || (eta == self.alpha && side == Side::Left);
        if use_left {
            let k = self.kappa;
            let m_plus = kummer_m(k / 2.0 + 1.0, k + 0.5, -eta * eta / 4.0, self.acc)?;
            Ok(self.u_star_gamma * k * (eta / self.alpha).powf(k - 1.0) / self.alpha * m_plus
                / self.m_alpha)
        } else {
            Ok(-self.c2 * (-eta * eta / 4.0).exp() / PI.sqrt())
        }
    }

    /// `Phi'(alpha+) - Phi'(alpha-) + alpha beta / 2`; zero for a matched profile.
    pub fn jump_residual(&self, params: &ModelParams) -> Result<f64> {
        let right = self.derivative(self.alpha, Side::Right)?;
        let left = self.derivative(self.alpha, Side::Left)?;
        Ok(right - left + params.alpha * params.beta / 2.0)
    }
}

/// The conjectured long-time limit for a given regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetProfile {
    /// No precipitation: the limit is `Psi` itself.
    Psi(ModelParams),
    Phi(SelfSimilarProfile),
}

impl TargetProfile {
    /// `Psi` below the marginal threshold, `Phi_0` in the transitional and
    /// critical regimes, the matched `Phi_gamma` when supercritical.
    pub fn for_params(params: &ModelParams) -> Result<Self> {
        match params.regime() {
            Regime::Subcritical | Regime::Marginal => Ok(TargetProfile::Psi(*params)),
            Regime::Transitional | Regime::Critical => {
                Ok(TargetProfile::Phi(SelfSimilarProfile::critical(params)?))
            }
            Regime::Supercritical => Ok(TargetProfile::Phi(SelfSimilarProfile::matched(params)?)),
        }
    }

    pub fn eval(&self, eta: f64) -> Result<f64> {
        match self {
            TargetProfile::Psi(p) => Ok(psi(p, eta)),
            TargetProfile::Phi(profile) => profile.eval(eta),
        }
    }

    /// Precipitation strength of the target; zero for `Psi` and `Phi_0`.
    pub fn gamma(&self) -> f64 {
        match self {
            TargetProfile::Psi(_) => 0.0,
            TargetProfile::Phi(profile) => profile.gamma,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetProfile::Psi(_) => "Psi",
            TargetProfile::Phi(p) if p.gamma == 0.0 => "Phi_0",
            TargetProfile::Phi(_) => "Phi_gamma",
        }
    }
}
