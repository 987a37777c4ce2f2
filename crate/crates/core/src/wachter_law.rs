//! Limiting spectral law of the null Fisher matrix `S₂⁻¹S₁`.
//!
//! Everything here is a closed form in the two dimension ratios `c = p/T`
//! and `y = p/n`: the support edges, the continuous density, the atom at
//! the origin when `c > 1`, the Stieltjes transform and its companion, and
//! the moment integrals evaluated at an outlier location.
//!
//! [`integrate_against_law`] integrates a test function against the law by
//! quadrature. It shares no code with the closed forms and is what the test
//! suites use to check them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// The dimension-ratio pair `(c, y)` with `c > 0` and `0 < y < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct FisherParams {
    c: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    c: f64,
    y: f64,
}

impl TryFrom<RawParams> for FisherParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        FisherParams::new(raw.c, raw.y)
    }
}

impl From<FisherParams> for RawParams {
    fn from(p: FisherParams) -> Self {
        RawParams { c: p.c, y: p.y }
    }
}

impl FisherParams {
    pub fn new(c: f64, y: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::ParameterDomain(format!("c must be positive, got {c}")));
        }
        if !(y.is_finite() && y > 0.0 && y < 1.0) {
            return Err(Error::ParameterDomain(format!("y must lie in (0, 1), got {y}")));
        }
        Ok(Self { c, y })
    }

    /// Ratios from finite dimensions: `c = p/T`, `y = p/n`.
    pub fn from_dims(p: usize, n: usize, t: usize) -> Result<Self> {
        if t == 0 || n == 0 {
            return Err(Error::ParameterDomain("sample sizes must be positive".into()));
        }
        Self::new(p as f64 / t as f64, p as f64 / n as f64)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// `γ = 1/(1−y)`, the pole of the outlier map.
    pub fn gamma(&self) -> f64 {
        1.0 / (1.0 - self.y)
    }

    /// `c + y − cy`, written as `1 − (1−c)(1−y)` so that `c = 1` gives exactly 1.
    pub fn kappa(&self) -> f64 {
        1.0 - (1.0 - self.c) * (1.0 - self.y)
    }

    /// `√(c+y−cy)`.
    pub(crate) fn root_kappa(&self) -> f64 {
        self.kappa().sqrt()
    }
}

/// Support `[b1, b]` of the continuous part of the law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportEdges {
    pub b1: f64,
    pub b: f64,
}

impl SupportEdges {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.b1 && x <= self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.b1
    }
}

/// Stieltjes value and the four moment integrals at an outlier location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentValues {
    pub s: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

pub fn support_edges(params: &FisherParams) -> SupportEdges {
    let r = params.root_kappa();
    let scale = 1.0 - params.y;
    SupportEdges {
        b1: ((1.0 - r) / scale).powi(2),
        b: ((1.0 + r) / scale).powi(2),
    }
}

/// Continuous component of the law; zero outside `[b1, b]`.
pub fn density(params: &FisherParams, x: f64) -> f64 {
    let edges = support_edges(params);
    if !(x > edges.b1 && x < edges.b) {
        return 0.0;
    }
    let (c, y) = (params.c, params.y);
    (1.0 - y) * ((edges.b - x) * (x - edges.b1)).sqrt() / (2.0 * PI * x * (c + x * y))
}

/// Atom at the origin, `max(0, 1 − 1/c)`.
pub fn mass_at_zero(params: &FisherParams) -> f64 {
    (1.0 - 1.0 / params.c).max(0.0)
}

fn check_exterior(params: &FisherParams, z: f64) -> Result<()> {
    let edges = support_edges(params);
    if !z.is_finite() || edges.contains(z) {
        return Err(Error::Domain(format!(
            "z = {z} lies in the support [{}, {}]",
            edges.b1, edges.b
        )));
    }
    if z == 0.0 {
        return Err(Error::Domain("z = 0 is singular for the closed form".into()));
    }
    Ok(())
}

/// Companion transform evaluated by the quadratic it solves, with the branch
/// that behaves like `−1/z` above the support and continues through infinity
/// to the region below it.
fn companion_unchecked(params: &FisherParams, z: f64) -> f64 {
    let (c, y) = (params.c, params.y);
    let a = z * (c + z * y);
    let bq = c * (z * (1.0 - y) + 1.0 - c) + 2.0 * z * y;
    let cq = params.kappa();
    // (1−c+z(1−y))² − 4z = (1−y)²(z−b)(z−b1); the analytic root ~ (1−y)z.
    let disc = (1.0 - c + z * (1.0 - y)).powi(2) - 4.0 * z;
    let edges = support_edges(params);
    let sign = if z > edges.b { 1.0 } else { -1.0 };
    let root = sign * c * disc.max(0.0).sqrt();
    let plus = -bq + root;
    let minus = -bq - root;
    // plus·minus = 4·a·cq; divide by whichever factor carries no cancellation.
    if minus.abs() >= plus.abs() {
        2.0 * cq / minus
    } else {
        plus / (2.0 * a)
    }
}

/// Stieltjes transform `s(z) = ∫ (x − z)⁻¹ dF(x)` for real `z` off the support.
pub fn stieltjes(params: &FisherParams, z: f64) -> Result<f64> {
    check_exterior(params, z)?;
    let under = companion_unchecked(params, z);
    Ok((under + (1.0 - params.c) / z) / params.c)
}

/// Transform of the companion law, linked by `s̲(z) + (1−c)/z = c·s(z)`.
pub fn companion_stieltjes(params: &FisherParams, z: f64) -> Result<f64> {
    check_exterior(params, z)?;
    Ok(companion_unchecked(params, z))
}

/// True when `a` lies strictly outside the critical interval and so
/// produces an outlier.
pub(crate) fn is_separated(params: &FisherParams, a: f64) -> bool {
    let gamma = params.gamma();
    (a - gamma).abs() > gamma * params.root_kappa()
}

fn check_spike(params: &FisherParams, a: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) || a == 1.0 {
        return Err(Error::Precondition(format!(
            "spike must be positive and different from 1, got {a}"
        )));
    }
    if !is_separated(params, a) {
        return Err(Error::Precondition(format!(
            "spike {a} lies in the critical interval; no outlier is produced"
        )));
    }
    Ok(())
}

/// `s`, `m1`…`m4` at `λ = φ(a)` in closed form.
pub fn moment_values(params: &FisherParams, a: f64) -> Result<MomentValues> {
    check_spike(params, a)?;
    let (c, y) = (params.c, params.y);
    let u = a * (y - 1.0) + 1.0;
    let q = -1.0 + 2.0 * a + c + a * a * (y - 1.0);
    let am1 = a - 1.0;
    let acm1 = a + c - 1.0;
    Ok(MomentValues {
        s: u / (am1 * acm1),
        m1: u * u * (-1.0 + 2.0 * a + a * a * (y - 1.0) + y * (c - 1.0))
            / (am1 * am1 * acm1 * acm1 * q),
        m2: 1.0 / am1,
        m3: -u * u / (am1 * am1 * q),
        m4: (-1.0 + 2.0 * a + c + a * a * (-1.0 + c * (y - 1.0))) / (am1 * am1 * q),
    })
}

/// Limit of `p⁻¹ tr(λ·S₂' − S₁')⁻¹` over the non-spiked coordinates at an
/// outlier `λ = φ(a)`: the radical solution `m̃(z)` of the fixed-point
/// equation, evaluated at `z = 1/λ` on the branch matching the outlier's side.
/// The known value is `1/(a + c − 1)`.
pub fn outlier_trace_limit(params: &FisherParams, a: f64) -> Result<f64> {
    check_spike(params, a)?;
    let lambda = crate::spike_theory::phi(params, a)?;
    let (c, y) = (params.c, params.y);
    let z = 1.0 / lambda;
    let k = y * c - y - c;
    let base = -1.0 + y + z - z * c;
    let disc = (1.0 - y - z + z * c).powi(2) + 4.0 * z * k;
    let sign = if a > params.gamma() { 1.0 } else { -1.0 };
    Ok((base + sign * disc.max(0.0).sqrt()) / (2.0 * k))
}

/// `∫ g dF_{c,y}`, including the atom at zero when `c > 1`, by adaptive
/// quadrature after the substitution `x = b1 + (b − b1) sin²ϑ`, which turns
/// the square-root edge behaviour into a smooth integrand.
pub fn integrate_against_law<G: Fn(f64) -> f64>(params: &FisherParams, g: G) -> f64 {
    integrate_continuous(params, &g, std::f64::consts::FRAC_PI_2) + mass_at_zero(params) * g(0.0)
}

/// Same substitution, truncated at the angle that maps to `x_max`.
fn integrate_continuous<G: Fn(f64) -> f64>(params: &FisherParams, g: &G, theta_max: f64) -> f64 {
    let edges = support_edges(params);
    let (c, y) = (params.c, params.y);
    let w = edges.width();
    let integrand = |theta: f64| {
        let (s, co) = theta.sin_cos();
        let x = edges.b1 + w * s * s;
        if x <= 0.0 {
            return 0.0;
        }
        // f(x) dx = (1−y) w² 2 s² co² / (2π x (c + x y)) dϑ
        let weight = (1.0 - y) * w * w * s * s * co * co / (PI * x * (c + x * y));
        weight * g(x)
    };
    quadrature::integrate_default(integrand, 0.0, theta_max)
}

/// Distribution function of the law, atom included.
pub fn cdf(params: &FisherParams, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let edges = support_edges(params);
    let atom = mass_at_zero(params);
    if x <= edges.b1 {
        return atom;
    }
    if x >= edges.b {
        return 1.0;
    }
    let theta = ((x - edges.b1) / edges.width()).sqrt().asin();
    atom + integrate_continuous(params, &|_| 1.0, theta)
}
