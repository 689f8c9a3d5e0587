//! Loads and manufactured solutions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::spaces::Grad;

type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;
type GradFn = Arc<dyn Fn(Point) -> Grad + Send + Sync>;
type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Analytic velocity/pressure pair.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: VectorFn,
    pub grad_u: GradFn,
    pub p: ScalarFn,
    pub mu: f64,
}

impl ExactSolution {
    /// `σ = μ∇u + p Id`
    pub fn stress(&self, x: Point) -> Grad {
        let g = (self.grad_u)(x);
        let p = (self.p)(x);
        [
            [self.mu * g[0][0] + p, self.mu * g[0][1]],
            [self.mu * g[1][0], self.mu * g[1][1] + p],
        ]
    }
}

/// Right-hand side `g` of `-div σ = g`, optionally with a known solution.
#[derive(Clone)]
pub struct LoadFunction {
    g: VectorFn,
    exact: Option<ExactSolution>,
    name: String,
}

impl fmt::Debug for LoadFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LoadFunction")
            .field("name", &self.name)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl LoadFunction {
    pub fn from_fn(name: impl Into<String>, g: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        LoadFunction {
            g: Arc::new(g),
            exact: None,
            name: name.into(),
        }
    }

    pub fn zero() -> Self {
        Self::from_fn("zero", |_| [0.0, 0.0])
    }

    pub fn constant(c: [f64; 2]) -> Self {
        Self::from_fn("constant", move |_| c)
    }

    /// Rotational load `(-y, x)`; it is not a gradient, so it drives a
    /// nonzero velocity on every domain.
    pub fn vortex() -> Self {
        Self::from_fn("vortex", |x| [-x[1], x[0]])
    }

    /// Manufactured solution on the unit square: velocity is the curl of
    /// `x²(1-x)² y²(1-y)²`, pressure `x³ - 1/4`.
    pub fn smooth1(mu: f64) -> Self {
        let f = |t: f64| t * t * (1.0 - t) * (1.0 - t);
        let f1 = |t: f64| 2.0 * t - 6.0 * t * t + 4.0 * t * t * t;
        let f2 = |t: f64| 2.0 - 12.0 * t + 12.0 * t * t;
        let f3 = |t: f64| -12.0 + 24.0 * t;
        let g = move |x: Point| {
            let (a, b) = (x[0], x[1]);
            let lap1 = f2(a) * f1(b) + f(a) * f3(b);
            let lap2 = -f3(a) * f(b) - f1(a) * f2(b);
            [-mu * lap1 - 3.0 * a * a, -mu * lap2]
        };
        let exact = ExactSolution {
            u: Arc::new(move |x| [f(x[0]) * f1(x[1]), -f1(x[0]) * f(x[1])]),
            grad_u: Arc::new(move |x| {
                let (a, b) = (x[0], x[1]);
                [
                    [f1(a) * f1(b), f(a) * f2(b)],
                    [-f2(a) * f(b), -f1(a) * f1(b)],
                ]
            }),
            p: Arc::new(|x| x[0] * x[0] * x[0] - 0.25),
            mu,
        };
        LoadFunction {
            g: Arc::new(g),
            exact: Some(exact),
            name: "smooth1".into(),
        }
    }

    /// Corner-singular manufactured solution on the L-shape with its
    /// reentrant corner at the origin.
    ///
    /// The stream function is `χ(r) r^{1+λ} ψ(θ)`, the leading Stokes
    /// singular function of the 270° corner times the cutoff
    /// `χ(r) = (1 - r²)⁴` (zero for `r ≥ 1`). The velocity vanishes on the
    /// whole boundary and has gradient `~ r^{λ-1}` at the corner, while the
    /// load stays bounded.
    pub fn lshape_singular(mu: f64) -> Self {
        let c = CornerSingularity::new(mu);
        let cg = c.clone();
        let (cu, cgrad, cp) = (c.clone(), c.clone(), c.clone());
        let exact = ExactSolution {
            u: Arc::new(move |x| cu.velocity(x)),
            grad_u: Arc::new(move |x| cgrad.velocity_gradient(x)),
            p: Arc::new(move |x| cp.pressure(x)),
            mu,
        };
        LoadFunction {
            g: Arc::new(move |x| cg.load(x)),
            exact: Some(exact),
            name: "lshape_singular".into(),
        }
    }

    pub fn eval(&self, x: Point) -> [f64; 2] {
        (self.g)(x)
    }

    pub fn exact(&self) -> Option<&ExactSolution> {
        self.exact.as_ref()
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Leading singular exponent of the Stokes problem at a 270° corner, the
/// root of `sin(λω) + λ sin ω = 0` in `(0, 1)` for `ω = 3π/2`.
pub const CORNER_EXPONENT: f64 = 0.544_483_736_782_463_9;

const OMEGA: f64 = 1.5 * std::f64::consts::PI;

#[derive(Clone, Debug)]
struct CornerSingularity {
    mu: f64,
    /// Mean of the cut-off pressure over the L-shape (area 3).
    p_mean: f64,
}

impl CornerSingularity {
    fn new(mu: f64) -> Self {
        let l = CORNER_EXPONENT;
        // ∫_0^1 (1-r²)⁴ r^λ dr, expanded binomially
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        let radial: f64 = (0..5)
            .map(|k| binom[k] * (-1f64).powi(k as i32) / (l + 2.0 * k as f64 + 1.0))
            .sum();
        // ∫_0^ω B dθ with B' antiderivative ((1+λ)²ψ + ψ'')/(1-λ)
        let prim = |t: f64| {
            let d = angular(t);
            ((1.0 + l).powi(2) * d[0] + d[2]) / (1.0 - l)
        };
        let angular_int = prim(OMEGA) - prim(0.0);
        CornerSingularity {
            mu,
            p_mean: mu * radial * angular_int / 3.0,
        }
    }

    fn velocity(&self, x: Point) -> [f64; 2] {
        let Some(pc) = Polar::new(x) else { return [0.0; 2] };
        let a = 1.0 + CORNER_EXPONENT;
        let ch = cutoff(pc.r);
        let psi = angular(pc.t);
        let fr = (ch[1] * pc.r.powf(a) + a * ch[0] * pc.r.powf(a - 1.0)) * psi[0];
        let ft = ch[0] * pc.r.powf(a) * psi[1];
        let (dx, dy) = pc.cartesian(fr, ft);
        [dy, -dx]
    }

    fn velocity_gradient(&self, x: Point) -> Grad {
        let Some(pc) = Polar::new(x) else { return [[0.0; 2]; 2] };
        let a = 1.0 + CORNER_EXPONENT;
        let r = pc.r;
        let ch = cutoff(r);
        let psi = angular(pc.t);
        let f0 = ch[0] * r.powf(a);
        let f1 = ch[1] * r.powf(a) + a * ch[0] * r.powf(a - 1.0);
        let f2 = ch[2] * r.powf(a) + 2.0 * a * ch[1] * r.powf(a - 1.0) + a * (a - 1.0) * ch[0] * r.powf(a - 2.0);
        let (frr, frt, ftt, fr, ft) = (f2 * psi[0], f1 * psi[1], f0 * psi[2], f1 * psi[0], f0 * psi[1]);
        let (c, s) = (pc.t.cos(), pc.t.sin());
        let mixed = frt / r - ft / (r * r);
        let radial = fr / r + ftt / (r * r);
        let fxx = c * c * frr + s * s * radial - 2.0 * c * s * mixed;
        let fyy = s * s * frr + c * c * radial + 2.0 * c * s * mixed;
        let fxy = c * s * (frr - radial) + (c * c - s * s) * mixed;
        [[fxy, fyy], [-fxx, -fxy]]
    }

    /// `p = -(p̃ - mean)`: the stress here is `μ∇u + p Id`, so the
    /// pressure enters the momentum equation with the opposite sign of the
    /// classical singular pair.
    fn pressure(&self, x: Point) -> f64 {
        match Polar::new(x) {
            Some(pc) => self.p_mean - self.mu * cutoff(pc.r)[0] * pc.r.powf(CORNER_EXPONENT - 1.0) * pressure_angular(pc.t)[0],
            None => self.p_mean,
        }
    }

    /// `g = curl W + ∇p̃` with `W = -μΔΨ` and `p̃ = μχ p_s`.
    fn load(&self, x: Point) -> [f64; 2] {
        let Some(pc) = Polar::new(x) else { return [0.0; 2] };
        let (l, mu, r) = (CORNER_EXPONENT, self.mu, pc.r);
        let a = 1.0 + l;
        let ch = cutoff(r);
        let psi = angular(pc.t);
        let amp = a * a * psi[0] + psi[2];
        let amp_t = a * a * psi[1] + psi[3];
        let q = (2.0 * a + 1.0) * ch[1] + r * ch[2];
        let q_r = (2.0 * a + 2.0) * ch[2] + r * ch[3];
        let w_r = -mu
            * ((ch[1] * r.powf(a - 2.0) + (a - 2.0) * ch[0] * r.powf(a - 3.0)) * amp
                + (q_r * r.powf(a - 1.0) + (a - 1.0) * q * r.powf(a - 2.0)) * psi[0]);
        let w_t = -mu * (ch[0] * r.powf(a - 2.0) * amp_t + q * r.powf(a - 1.0) * psi[1]);
        let (wx, wy) = pc.cartesian(w_r, w_t);
        let b = pressure_angular(pc.t);
        let p_r = mu * (ch[1] * r.powf(l - 1.0) + (l - 1.0) * ch[0] * r.powf(l - 2.0)) * b[0];
        let p_t = mu * ch[0] * r.powf(l - 1.0) * b[1];
        let (px, py) = pc.cartesian(p_r, p_t);
        [wy + px, -wx + py]
    }
}

struct Polar {
    r: f64,
    /// Angle in `[0, 2π)`; the L-shape covers `[0, 3π/2]`.
    t: f64,
}

impl Polar {
    fn new(x: Point) -> Option<Self> {
        let r = x[0].hypot(x[1]);
        if r == 0.0 || r >= 1.0 {
            return None;
        }
        let mut t = x[1].atan2(x[0]);
        if t < 0.0 {
            t += 2.0 * std::f64::consts::PI;
        }
        Some(Polar { r, t })
    }

    /// Cartesian gradient from `∂_r` and `∂_θ`.
    fn cartesian(&self, fr: f64, ft: f64) -> (f64, f64) {
        let (c, s) = (self.t.cos(), self.t.sin());
        (c * fr - s * ft / self.r, s * fr + c * ft / self.r)
    }
}

/// `(1-r²)⁴` and its first three derivatives.
fn cutoff(r: f64) -> [f64; 4] {
    let u = 1.0 - r * r;
    [
        u.powi(4),
        -8.0 * r * u.powi(3),
        -8.0 * u.powi(3) + 48.0 * r * r * u * u,
        144.0 * r * u * u - 192.0 * r.powi(3) * u,
    ]
}

/// `ψ(θ)` and its first four derivatives.
fn angular(t: f64) -> [f64; 5] {
    let l = CORNER_EXPONENT;
    let cw = (l * OMEGA).cos();
    let (p, m) = (1.0 + l, 1.0 - l);
    let mut out = [0.0; 5];
    for (d, o) in out.iter_mut().enumerate() {
        // d-th derivative of sin(kθ) is k^d sin(kθ + dπ/2)
        let shift = d as f64 * std::f64::consts::FRAC_PI_2;
        let sp = p.powi(d as i32) * (p * t + shift).sin();
        let cp = p.powi(d as i32) * (p * t + shift).cos();
        let sm = m.powi(d as i32) * (m * t + shift).sin();
        let cm = m.powi(d as i32) * (m * t + shift).cos();
        *o = sp * cw / p - cp - sm * cw / m + cm;
    }
    out
}

/// Angular factor of the singular pressure and its derivative.
fn pressure_angular(t: f64) -> [f64; 2] {
    let l = CORNER_EXPONENT;
    let d = angular(t);
    [
        ((1.0 + l).powi(2) * d[1] + d[3]) / (1.0 - l),
        ((1.0 + l).powi(2) * d[2] + d[4]) / (1.0 - l),
    ]
}

/// Built-in problem selectors used by the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemId {
    Smooth1,
    Constant,
    Vortex,
    Zero,
    LshapeSingular,
}

impl ProblemId {
    pub fn load(self, mu: f64) -> LoadFunction {
        match self {
            ProblemId::Smooth1 => LoadFunction::smooth1(mu),
            ProblemId::Constant => LoadFunction::constant([1.0, 1.0]),
            ProblemId::Vortex => LoadFunction::vortex(),
            ProblemId::Zero => LoadFunction::zero(),
            ProblemId::LshapeSingular => LoadFunction::lshape_singular(mu),
        }
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth1" => Ok(ProblemId::Smooth1),
            "constant" => Ok(ProblemId::Constant),
            "vortex" => Ok(ProblemId::Vortex),
            "zero" => Ok(ProblemId::Zero),
            "lshape_singular" => Ok(ProblemId::LshapeSingular),
            _ => Err(Error::param(
                "solution",
                format!("unknown problem `{s}` (expected smooth1, constant, vortex, zero or lshape_singular)"),
            )),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemId::Smooth1 => "smooth1",
            ProblemId::Constant => "constant",
            ProblemId::Vortex => "vortex",
            ProblemId::Zero => "zero",
            ProblemId::LshapeSingular => "lshape_singular",
        })
    }
}
