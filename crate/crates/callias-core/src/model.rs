//! Experiment configurations: spatial domain, Clifford data, potential and
//! gauge families, and the validation of the standing assumptions
//! (static spatial metric, unit lapse, compactly supported time dependence,
//! temporal collar, strongly Callias potential).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

const I: C64 = C64::new(0.0, 1.0);
const ONE: C64 = C64::new(1.0, 0.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Spatial slice: a circle of given circumference or the real line
/// truncated to `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpatialDomain {
    Circle { circumference: f64 },
    Line { half_width: f64 },
}

impl SpatialDomain {
    pub fn is_circle(&self) -> bool {
        matches!(self, SpatialDomain::Circle { .. })
    }
}

/// Explicit Clifford module data. `beta` is the Clifford action of the unit
/// timelike normal, `gamma_space` the spatial generator, `phi_matrix` the
/// matrix direction of the Callias potential.
#[derive(Debug, Clone)]
pub struct CliffordModule {
    pub dim: usize,
    pub gamma_space: Array2<C64>,
    pub beta: Array2<C64>,
    pub phi_matrix: Array2<C64>,
    /// Second Hermitian direction anticommuting with both `gamma_space`
    /// and `phi_matrix`; carries the perturbation in the spinor model.
    pub perp_matrix: Option<Array2<C64>>,
}

impl CliffordModule {
    /// One-dimensional module for the circle model: gamma = i, beta = 1,
    /// no potential direction.
    pub fn scalar() -> Self {
        CliffordModule {
            dim: 1,
            gamma_space: Array2::from_elem((1, 1), I),
            beta: Array2::from_elem((1, 1), ONE),
            phi_matrix: Array2::from_elem((1, 1), ZERO),
            perp_matrix: None,
        }
    }

    /// Two-component module for the line model:
    /// gamma = -i sigma_1, phi direction sigma_3, perturbation direction sigma_2.
    pub fn spinor() -> Self {
        let gamma = Array2::from_shape_vec((2, 2), vec![ZERO, -I, -I, ZERO]).unwrap();
        let sigma3 = Array2::from_shape_vec((2, 2), vec![ONE, ZERO, ZERO, -ONE]).unwrap();
        let sigma2 = Array2::from_shape_vec((2, 2), vec![ZERO, -I, I, ZERO]).unwrap();
        CliffordModule {
            dim: 2,
            gamma_space: gamma,
            beta: sigma3.clone(),
            phi_matrix: sigma3,
            perp_matrix: Some(sigma2),
        }
    }

    /// Largest violation of the module algebra, all of which must vanish
    /// exactly: beta^2 = 1, gamma^2 = -1, gamma skew-Hermitian,
    /// phi Hermitian and anticommuting with gamma.
    pub fn algebra_defect(&self) -> f64 {
        let eye = Array2::<C64>::eye(self.dim);
        let b2 = self.beta.dot(&self.beta);
        let g2 = self.gamma_space.dot(&self.gamma_space);
        let g_skew = &self.gamma_space + &conj_t(&self.gamma_space);
        let phi_herm = &self.phi_matrix - &conj_t(&self.phi_matrix);
        let anti = self.gamma_space.dot(&self.phi_matrix) + self.phi_matrix.dot(&self.gamma_space);
        [
            max_abs(&(&b2 - &eye)),
            max_abs(&(&g2 + &eye)),
            max_abs(&g_skew),
            max_abs(&phi_herm),
            max_abs(&anti),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn conj_t(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Quintic smoothstep: 0 for u <= 0, 1 for u >= 1, C^2 monotone between.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
    }
}

fn smoothstep_deriv(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        0.0
    } else {
        30.0 * u * u * (1.0 - u) * (1.0 - u)
    }
}

/// Time profile of a coefficient family on `[0, 1]`.
///
/// `Ramp` is automatically composed with the collar reparameterization: it
/// is constant on `[0, delta]` and `[1 - delta, 1]` and interpolates with a
/// quintic smoothstep between, so every built-in family honors the temporal
/// collar by construction. `Sampled` profiles are taken literally and are
/// validated against the collar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeProfile {
    Constant { value: f64 },
    Ramp { from: f64, to: f64 },
    Sampled { points: Vec<(f64, f64)> },
}

impl TimeProfile {
    /// Evaluate at time `t` with collar half-width `delta`.
    pub fn eval(&self, t: f64, delta: f64) -> f64 {
        match self {
            TimeProfile::Constant { value } => *value,
            TimeProfile::Ramp { from, to } => {
                let u = (t - delta) / (1.0 - 2.0 * delta);
                from + (to - from) * smoothstep(u)
            }
            TimeProfile::Sampled { points } => interp_linear(points, t),
        }
    }

    /// d/dt of [`eval`](Self::eval).
    pub fn deriv(&self, t: f64, delta: f64) -> f64 {
        match self {
            TimeProfile::Constant { .. } => 0.0,
            TimeProfile::Ramp { from, to } => {
                let w = 1.0 - 2.0 * delta;
                let u = (t - delta) / w;
                (to - from) * smoothstep_deriv(u) / w
            }
            TimeProfile::Sampled { points } => {
                let h = 1e-6;
                (interp_linear(points, t + h) - interp_linear(points, t - h)) / (2.0 * h)
            }
        }
    }

    pub fn endpoint_values(&self, delta: f64) -> (f64, f64) {
        (self.eval(0.0, delta), self.eval(1.0, delta))
    }

    fn is_constant(&self) -> bool {
        match self {
            TimeProfile::Constant { .. } => true,
            TimeProfile::Ramp { from, to } => from == to,
            TimeProfile::Sampled { points } => {
                points.windows(2).all(|w| w[0].1 == w[1].1)
            }
        }
    }
}

fn interp_linear(points: &[(f64, f64)], t: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    if t <= points[0].0 {
        return points[0].1;
    }
    if t >= points[points.len() - 1].0 {
        return points[points.len() - 1].1;
    }
    for w in points.windows(2) {
        let ((t0, v0), (t1, v1)) = (w[0], w[1]);
        if t <= t1 {
            let a = (t - t0) / (t1 - t0);
            return v0 + a * (v1 - v0);
        }
    }
    points[points.len() - 1].1
}

/// Base scalar potential phi(x) on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BasePotential {
    Zero,
    Linear { slope: f64 },
    /// Bounded control potential; rejected by the strongly Callias check.
    Tanh { scale: f64 },
}

impl BasePotential {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            BasePotential::Zero => 0.0,
            BasePotential::Linear { slope } => slope * x,
            BasePotential::Tanh { scale } => scale * x.tanh(),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            BasePotential::Zero => 0.0,
            BasePotential::Linear { slope } => *slope,
            BasePotential::Tanh { scale } => scale / x.cosh().powi(2),
        }
    }
}

/// Smooth bump `height * exp(1 / (((x - center)/width)^2 - 1))`, exactly
/// supported on `|x - center| < width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub height: f64,
    pub width: f64,
    #[serde(default)]
    pub center: f64,
}

impl Bump {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            self.height * (1.0 / (u * u - 1.0)).exp()
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            let d = u * u - 1.0;
            self.eval(x) * (-2.0 * u / (d * d)) / self.width
        }
    }

    /// Support radius measured from the origin.
    pub fn support_radius(&self) -> f64 {
        self.center.abs() + self.width
    }
}

/// Matrix direction carrying the perturbation in the spinor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationDirection {
    /// Anticommutes with both the Clifford generator and the phi direction.
    Sigma2,
    /// Adds to the base potential along the phi direction.
    Sigma3,
}

/// Time-indexed compactly supported perturbation `p(t, x) = c(t) * bump(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: TimeProfile,
    pub bump: Bump,
    #[serde(default = "default_direction")]
    pub direction: PerturbationDirection,
}

fn default_direction() -> PerturbationDirection {
    PerturbationDirection::Sigma2
}

/// One spatial harmonic of the gauge coefficient on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeHarmonic {
    pub mode: i64,
    pub amplitude: TimeProfile,
    #[serde(default)]
    pub phase: f64,
}

/// Time-indexed connection coefficient `a(t, x)` on the circle:
/// a spatially constant part plus optional cosine harmonics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gauge {
    pub theta: TimeProfile,
    #[serde(default)]
    pub harmonics: Vec<GaugeHarmonic>,
}

/// Serializable model description; [`build_model`] validates it into a
/// [`CalliasModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub domain: SpatialDomain,
    pub clifford_dim: usize,
    #[serde(default = "default_base_potential")]
    pub base_potential: BasePotential,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub gauge: Option<Gauge>,
    pub collar_delta: f64,
}

fn default_base_potential() -> BasePotential {
    BasePotential::Zero
}

/// Validated experiment description.
#[derive(Debug, Clone)]
pub struct CalliasModel {
    pub domain: SpatialDomain,
    pub clifford: CliffordModule,
    pub base_potential: BasePotential,
    pub perturbation: Option<Perturbation>,
    pub gauge: Option<Gauge>,
    pub collar_delta: f64,
    /// Declared compact-support radius of all time-dependent perturbations.
    pub support_radius: f64,
}

impl CalliasModel {
    /// Scalar potential along the phi direction at (t, x): base plus any
    /// sigma_3-directed perturbation.
    pub fn potential_phi(&self, t: f64, x: f64) -> f64 {
        let mut v = self.base_potential.eval(x);
        if let Some(p) = &self.perturbation {
            if p.direction == PerturbationDirection::Sigma3 {
                v += p.amplitude.eval(t, self.collar_delta) * p.bump.eval(x);
            }
        }
        v
    }

    /// Scalar potential along the perpendicular (sigma_2) direction.
    pub fn potential_perp(&self, t: f64, x: f64) -> f64 {
        match &self.perturbation {
            Some(p) if p.direction == PerturbationDirection::Sigma2 => {
                p.amplitude.eval(t, self.collar_delta) * p.bump.eval(x)
            }
            _ => 0.0,
        }
    }

    /// Gauge coefficient a(t, x) on the circle.
    pub fn gauge_at(&self, t: f64, x: f64) -> f64 {
        match &self.gauge {
            Some(g) => {
                let circumference = match self.domain {
                    SpatialDomain::Circle { circumference } => circumference,
                    SpatialDomain::Line { .. } => unreachable!("gauge is circle-only"),
                };
                let mut a = g.theta.eval(t, self.collar_delta);
                for h in &g.harmonics {
                    let k = h.mode as f64;
                    a += h.amplitude.eval(t, self.collar_delta)
                        * (2.0 * std::f64::consts::PI * k * x / circumference + h.phase).cos();
                }
                a
            }
            None => 0.0,
        }
    }
}

/// Minimal symmetric interval outside which the strongly Callias
/// inequality holds with constant R.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialSupport {
    pub r: f64,
    /// Interval is `[-half_width, half_width]`.
    pub half_width: f64,
}

/// Validate a model description.
///
/// Checks the Clifford algebra, the compact-support requirement on the
/// time-dependent data (A4), the temporal collar, the domain margin for
/// line models, and basic parameter sanity. The spatial metric is flat and
/// static and the lapse is fixed to 1 by construction, which subsumes
/// (A1)-(A3).
pub fn build_model(spec: &ModelSpec) -> Result<CalliasModel> {
    let clifford = match (spec.clifford_dim, &spec.domain) {
        (1, SpatialDomain::Circle { .. }) => CliffordModule::scalar(),
        (2, SpatialDomain::Line { .. }) => CliffordModule::spinor(),
        (d, _) => {
            return Err(CoreError::AssumptionViolation {
                name: "A3",
                detail: format!(
                    "clifford_dim {d} does not match the domain; use 1 on the circle, 2 on the line"
                ),
            })
        }
    };
    let defect = clifford.algebra_defect();
    if defect != 0.0 {
        return Err(CoreError::AssumptionViolation {
            name: "A3",
            detail: format!("Clifford algebra defect {defect:.3e}"),
        });
    }

    match spec.domain {
        SpatialDomain::Circle { circumference } => {
            if circumference <= 0.0 {
                return Err(CoreError::AssumptionViolation {
                    name: "A1",
                    detail: "circumference must be positive".into(),
                });
            }
            if spec.perturbation.is_some() {
                return Err(CoreError::AssumptionViolation {
                    name: "A3",
                    detail: "Callias perturbations are line-only; use a gauge family on the circle"
                        .into(),
                });
            }
            if spec.base_potential != BasePotential::Zero {
                return Err(CoreError::AssumptionViolation {
                    name: "A5",
                    detail: "the scalar circle model carries no Callias potential".into(),
                });
            }
        }
        SpatialDomain::Line { half_width } => {
            if half_width <= 0.0 {
                return Err(CoreError::AssumptionViolation {
                    name: "A1",
                    detail: "half_width must be positive".into(),
                });
            }
            if spec.gauge.is_some() {
                return Err(CoreError::AssumptionViolation {
                    name: "A3",
                    detail: "gauge families are circle-only".into(),
                });
            }
        }
    }

    if !(spec.collar_delta > 0.0 && spec.collar_delta < 0.5) {
        return Err(CoreError::CollarViolation(format!(
            "collar_delta {} must lie in (0, 1/2)",
            spec.collar_delta
        )));
    }

    // A4: time-dependent data must be compactly supported with the declared
    // radius, and the line domain must exceed it by the required margin.
    let mut support_radius: f64 = 0.0;
    if let Some(p) = &spec.perturbation {
        if p.bump.width <= 0.0 {
            return Err(CoreError::SupportViolation(
                "bump width must be positive".into(),
            ));
        }
        if !p.bump.height.is_finite() || !p.bump.center.is_finite() {
            return Err(CoreError::SupportViolation("bump parameters must be finite".into()));
        }
        support_radius = p.bump.support_radius();
        if let SpatialDomain::Line { half_width } = spec.domain {
            if half_width < support_radius + 4.0 {
                return Err(CoreError::SupportViolation(format!(
                    "half_width {half_width} must exceed the support radius {support_radius} by at least 4"
                )));
            }
        }
        check_collar(&p.amplitude, spec.collar_delta, "perturbation amplitude")?;
    }
    if let Some(g) = &spec.gauge {
        check_collar(&g.theta, spec.collar_delta, "gauge theta")?;
        for h in &g.harmonics {
            check_collar(&h.amplitude, spec.collar_delta, "gauge harmonic amplitude")?;
        }
    }

    Ok(CalliasModel {
        domain: spec.domain,
        clifford,
        base_potential: spec.base_potential,
        perturbation: spec.perturbation.clone(),
        gauge: spec.gauge.clone(),
        collar_delta: spec.collar_delta,
        support_radius,
    })
}

fn check_collar(profile: &TimeProfile, delta: f64, what: &str) -> Result<()> {
    if profile.is_constant() {
        return Ok(());
    }
    // Ramp profiles are collar-exact by construction; sampled profiles are
    // checked pointwise.
    let probes = 9;
    for side in [0.0, 1.0 - delta] {
        let base = profile.eval(side, delta);
        for j in 0..=probes {
            let t = side + delta * j as f64 / probes as f64;
            let v = profile.eval(t, delta);
            if (v - base).abs() > 0.0 {
                return Err(CoreError::CollarViolation(format!(
                    "{what} varies inside the temporal collar (t = {t}, value {v} vs {base})"
                )));
            }
        }
    }
    Ok(())
}

/// Compute the minimal symmetric R-essential support of a line model at
/// time `t` from the closed-form potential and the anticommutator bound
/// `|d/dx (phi + p)|`.
pub fn essential_support(model: &CalliasModel, r: f64, t: f64) -> Result<EssentialSupport> {
    let half_width = match model.domain {
        SpatialDomain::Circle { .. } => return Err(CoreError::CompactDomain),
        SpatialDomain::Line { half_width } => half_width,
    };

    let g = |x: f64| -> f64 {
        let c = model.collar_delta;
        let (phi, dphi) = (model.base_potential.eval(x), model.base_potential.deriv(x));
        let (p2, dp2, p3, dp3) = match &model.perturbation {
            Some(p) => {
                let a = p.amplitude.eval(t, c);
                let (b, db) = (a * p.bump.eval(x), a * p.bump.deriv(x));
                match p.direction {
                    PerturbationDirection::Sigma2 => (b, db, 0.0, 0.0),
                    PerturbationDirection::Sigma3 => (0.0, 0.0, b, db),
                }
            }
            None => (0.0, 0.0, 0.0, 0.0),
        };
        let phi3 = phi + p3;
        phi3 * phi3 + p2 * p2 - (dphi + dp3).abs() - dp2.abs()
    };

    // The condition must hold on the whole tail of the domain; verify on a
    // fine sample first, then locate the minimal half-width by bisection.
    let samples = 4096;
    let holds_outside = |xr: f64| -> bool {
        (0..=samples).all(|j| {
            let x = xr + (half_width - xr) * j as f64 / samples as f64;
            g(x) >= r && g(-x) >= r
        })
    };
    if !holds_outside(half_width.min(model.support_radius + 2.0).max(half_width * 0.75)) {
        // Even the far tail fails: the potential is not strongly Callias.
        return Err(CoreError::NotCallias(format!(
            "no interval inside [-{half_width}, {half_width}] satisfies the bound for R = {r}"
        )));
    }
    if holds_outside(0.0) {
        return Ok(EssentialSupport { r, half_width: 0.0 });
    }
    let (mut lo, mut hi) = (0.0_f64, half_width);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds_outside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EssentialSupport { r, half_width: hi })
}

/// Canonical circle model: scalar module, gauge winding from `theta0`
/// to `theta1`.
pub fn circle_model(theta0: f64, theta1: f64) -> CalliasModel {
    let spec = ModelSpec {
        domain: SpatialDomain::Circle {
            circumference: 2.0 * std::f64::consts::PI,
        },
        clifford_dim: 1,
        base_potential: BasePotential::Zero,
        perturbation: None,
        gauge: Some(Gauge {
            theta: if theta0 == theta1 {
                TimeProfile::Constant { value: theta0 }
            } else {
                TimeProfile::Ramp {
                    from: theta0,
                    to: theta1,
                }
            },
            harmonics: vec![],
        }),
        collar_delta: 0.1,
    };
    build_model(&spec).expect("canonical circle model is valid")
}

/// Canonical line model: 2-spinor with phi(x) = x and a sigma_2 bump
/// perturbation ramping from `c0` to `c1`.
pub fn line_model(half_width: f64, bump: Bump, c0: f64, c1: f64) -> CalliasModel {
    let spec = ModelSpec {
        domain: SpatialDomain::Line { half_width },
        clifford_dim: 2,
        base_potential: BasePotential::Linear { slope: 1.0 },
        perturbation: Some(Perturbation {
            amplitude: if c0 == c1 {
                TimeProfile::Constant { value: c0 }
            } else {
                TimeProfile::Ramp { from: c0, to: c1 }
            },
            bump,
            direction: PerturbationDirection::Sigma2,
        }),
        gauge: None,
        collar_delta: 0.1,
    };
    build_model(&spec).expect("canonical line model is valid")
}
