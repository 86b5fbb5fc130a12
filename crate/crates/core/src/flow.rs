//! Hitchin flow in invariant coefficients: the generic cocalibrated flow on a
//! seven-dimensional homogeneous space and the degenerate system on a circle
//! bundle that collapses onto a singular orbit.

use thiserror::Error;

use crate::exterior::{ExteriorError, KForm, Signature, Vector};
use crate::g2spin7::{bundle_big_phi, BundleSplitData, G2Error, SevenStructure};
use crate::homogeneous::{HomogeneousError, HomogeneousSpace, InvariantBasis};
use crate::linalg::{max_abs, Matrix};
use crate::stable::{
    assoc_metric, classify_pair, j_star_rho, solve_wedge_omega, SixStructureClass, StableError, StructureKind,
};

/// Coefficient norm beyond which a run is reported as blowing up.
pub const BLOW_UP_NORM: f64 = 1e8;
/// Largest accepted condition number of the star-coefficient Jacobian.
pub const MAX_CONDITION: f64 = 1e12;
/// Steps shorter than this (relative to `max(1, |t|)`) end the run.
pub const MIN_STEP: f64 = 1e-13;
const FIT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Precondition {
    #[error("(omega0, rho0) is not an SU(3) or SU(1,2) pair: {0}")]
    NotAStructure(String),
    #[error("d omega0 ^ omega0 = 0 fails (residual {0:e})")]
    OmegaClosedWedge(f64),
    #[error("|c| = {} != 1 for smooth extension (c = {c})", c.abs())]
    NotSmooth { c: f64 },
    #[error("c = {0} must be positive")]
    NonpositiveC(f64),
    #[error("L_e_phi omega0 = 0 fails (residual {0:e})")]
    OmegaNotInvariant(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Stable(#[from] StableError),
    #[error(transparent)]
    G2(#[from] G2Error),
    #[error(transparent)]
    Homogeneous(#[from] HomogeneousError),
    #[error("star-coefficient Jacobian is singular (condition number {0:e})")]
    SingularJacobian(f64),
    #[error("f = {0} must be nonzero")]
    NonpositiveF(f64),
    #[error("precondition failed: {0}")]
    PreconditionFailed(Precondition),
    #[error("L_e_phi rho0 is not proportional to J*rho0 (fit residual {0:e})")]
    NotProportional(f64),
    #[error("trajectory has {0} samples, need at least 3")]
    InsufficientSamples(usize),
    #[error("{0}")]
    Setup(String),
    #[error("step rejected: {0}")]
    Rejected(String),
}

pub type Result<T> = std::result::Result<T, FlowError>;

#[derive(Clone, Debug, PartialEq)]
pub struct GenericFlowState {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateFlowState {
    pub t: f64,
    pub f: f64,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegenerateDerivative {
    pub f: f64,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Integrator {
    Rk4Fixed { step: f64 },
    /// Dormand–Prince 5(4) with mixed absolute/relative tolerance `tol`.
    Rk45 { tol: f64, initial_step: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub space: String,
    pub t_end: f64,
    pub integrator: Integrator,
    /// Startup offset for degenerate runs; `None` picks `1e-4 / |c|`.
    pub startup_epsilon: Option<f64>,
    /// Spacing of the monitor grid. Steps are clipped to land on it.
    pub sample_dt: f64,
    pub max_retries: usize,
}

impl FlowConfig {
    pub fn new(space: &str, t_end: f64, integrator: Integrator) -> Self {
        Self {
            space: space.to_string(),
            t_end,
            integrator,
            startup_epsilon: None,
            sample_dt: 0.01,
            max_retries: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Monitors {
    pub cocalibration: f64,
    pub normalization: f64,
    /// Filled in by [`Trajectory::fill_torsion`].
    pub torsion: Option<f64>,
    /// `⟨s, s⟩_g`, degenerate runs only.
    pub s_norm: Option<f64>,
    /// Of `g₈` for degenerate runs and `g₇` for generic runs.
    pub signature: Signature,
    pub class: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S> {
    pub state: S,
    pub t: f64,
    /// `φ` and `∗φ` on the seven-dimensional slice.
    pub phi: KForm<f64>,
    pub star_phi: KForm<f64>,
    pub monitors: Monitors,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StopReason {
    Completed,
    BlowUp { t: f64, norm: f64 },
    /// The adaptive step collapsed below [`MIN_STEP`] although the
    /// coefficients stay bounded; the derivative diverges at `t`.
    Singular { t: f64, step: f64 },
    StepFailure { t: f64, reason: String },
    MonitorFailure { t: f64, reason: String },
}

impl StopReason {
    /// Completed runs and runs ending at a singularity of the flow are
    /// outcomes; the others are numerical failures.
    pub fn is_outcome(&self) -> bool {
        matches!(self, StopReason::Completed | StopReason::BlowUp { .. } | StopReason::Singular { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::BlowUp { .. } => "blow-up",
            StopReason::Singular { .. } => "singular",
            StopReason::StepFailure { .. } => "step-failure",
            StopReason::MonitorFailure { .. } => "monitor-failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub samples: Vec<Sample<S>>,
    pub stop: StopReason,
}

impl<S> Trajectory<S> {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn max_monitor(&self, pick: impl Fn(&Monitors) -> Option<f64>) -> f64 {
        self.samples
            .iter()
            .filter_map(|s| pick(&s.monitors))
            .fold(0.0, f64::max)
    }

    /// Sample at time `t`, if the grid contains it.
    pub fn at(&self, t: f64) -> Option<&Sample<S>> {
        self.samples.iter().find(|s| (s.t - t).abs() < 1e-12 * t.abs().max(1.0))
    }

    pub fn fill_torsion(&mut self, space: &HomogeneousSpace) -> Result<()> {
        let series = torsion_residual(self, space)?;
        for (s, r) in self.samples.iter_mut().zip(series) {
            s.monitors.torsion = Some(r);
        }
        Ok(())
    }
}

/// A flow in packed coordinates.
pub trait FlowSystem {
    type State: Clone;
    fn pack(&self, state: &Self::State) -> (f64, Vec<f64>);
    fn unpack(&self, t: f64, y: &[f64]) -> Self::State;
    fn derivative(&self, t: f64, y: &[f64]) -> Result<Vec<f64>>;
    /// Checked on every candidate step; an error rejects the step.
    fn admissible(&self, t: f64, y: &[f64]) -> Result<()>;
    fn sample(&self, state: &Self::State) -> Result<Sample<Self::State>>;
}

/// `‖∂_t(∗φ) − dφ‖ + ‖d∗φ‖` per sample, with the time derivative from
/// three-point differences on the stored grid (one-sided at the ends).
pub fn torsion_residual<S>(traj: &Trajectory<S>, space: &HomogeneousSpace) -> Result<Vec<f64>> {
    let n = traj.samples.len();
    if n < 3 {
        return Err(FlowError::InsufficientSamples(n));
    }
    let t: Vec<f64> = traj.times();
    let stars: Vec<&KForm<f64>> = traj.samples.iter().map(|s| &s.star_phi).collect();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = match i {
            0 => (0, 1, 2),
            i if i == n - 1 => (n - 3, n - 2, n - 1),
            i => (i - 1, i, i + 1),
        };
        // derivative at t[i] of the quadratic through the three samples
        let weights = lagrange_derivative(t[a], t[b], t[c], t[i]);
        // the weights sum to zero, so difference against the centre sample
        let dt_star = stars[a]
            .sub(stars[i])
            .scale(weights[0])
            .add(&stars[b].sub(stars[i]).scale(weights[1]))
            .add(&stars[c].sub(stars[i]).scale(weights[2]));
        let d_phi = space.d(&traj.samples[i].phi)?;
        let d_star = space.d(stars[i])?;
        out.push(dt_star.sub(&d_phi).max_abs() + d_star.max_abs());
    }
    Ok(out)
}

fn lagrange_derivative(a: f64, b: f64, c: f64, x: f64) -> [f64; 3] {
    [
        ((x - b) + (x - c)) / ((a - b) * (a - c)),
        ((x - a) + (x - c)) / ((b - a) * (b - c)),
        ((x - a) + (x - b)) / ((c - a) * (c - b)),
    ]
}

fn sample_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let dir = (t_end - t0).signum();
    let mut out = Vec::new();
    let mut k = (t0 / dt).floor() as i64;
    loop {
        let t = k as f64 * dt;
        if dir * (t - t0) > 1e-12 * dt && dir * (t_end - t) > 1e-12 * dt {
            out.push(t);
        }
        if dir * (t - t_end) >= 0.0 {
            break;
        }
        k += dir as i64;
    }
    out.push(t_end);
    out
}

struct Attempt {
    y: Vec<f64>,
    error: Option<f64>,
}

fn rk4_step<S: FlowSystem>(sys: &S, t: f64, y: &[f64], h: f64) -> Result<Attempt> {
    let shift = |k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let k1 = sys.derivative(t, y)?;
    let k2 = sys.derivative(t + h / 2.0, &shift(&k1, h / 2.0))?;
    let k3 = sys.derivative(t + h / 2.0, &shift(&k2, h / 2.0))?;
    let k4 = sys.derivative(t + h, &shift(&k3, h))?;
    let y = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Ok(Attempt { y, error: None })
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dp_step<S: FlowSystem>(sys: &S, t: f64, y: &[f64], h: f64, tol: f64) -> Result<Attempt> {
    let n = y.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    for stage in 0..7 {
        let yi: Vec<f64> = (0..n)
            .map(|i| y[i] + h * (0..stage).map(|j| DP_A[stage][j] * k[j][i]).sum::<f64>())
            .collect();
        k.push(sys.derivative(t + DP_C[stage] * h, &yi)?);
    }
    let y5: Vec<f64> = (0..n)
        .map(|i| y[i] + h * (0..7).map(|j| DP_B5[j] * k[j][i]).sum::<f64>())
        .collect();
    let mut err = 0.0f64;
    for i in 0..n {
        let y4 = y[i] + h * (0..7).map(|j| DP_B4[j] * k[j][i]).sum::<f64>();
        let scale = tol + tol * y[i].abs().max(y5[i].abs());
        err = err.max((y5[i] - y4).abs() / scale);
    }
    Ok(Attempt { y: y5, error: Some(err) })
}

/// Advance `seed` to `config.t_end`, sampling on the monitor grid.
pub fn integrate<S: FlowSystem>(sys: &S, config: &FlowConfig, seed: &S::State) -> Result<Trajectory<S::State>> {
    let (t0, mut y) = sys.pack(seed);
    let mut samples = vec![sys.sample(seed)?];
    if config.t_end == t0 {
        return Ok(Trajectory {
            samples,
            stop: StopReason::Completed,
        });
    }
    let dir = (config.t_end - t0).signum();
    let mut t = t0;
    let mut h_adapt = match config.integrator {
        Integrator::Rk4Fixed { step } => step,
        Integrator::Rk45 { initial_step, .. } => initial_step,
    };
    for target in sample_grid(t0, config.t_end, config.sample_dt) {
        let mut retries = 0usize;
        let mut h_local = h_adapt;
        while t != target {
            let remaining = (target - t).abs();
            let clipped = remaining <= h_local * (1.0 + 1e-9);
            let step = if clipped { remaining } else { h_local };
            let t_new = if clipped { target } else { t + dir * step };
            if step < MIN_STEP * t.abs().max(1.0) {
                return Ok(Trajectory {
                    samples,
                    stop: StopReason::Singular { t, step },
                });
            }
            let attempt = match config.integrator {
                Integrator::Rk4Fixed { .. } => rk4_step(sys, t, &y, dir * step),
                Integrator::Rk45 { tol, .. } => dp_step(sys, t, &y, dir * step, tol),
            }
            .and_then(|a| sys.admissible(t_new, &a.y).map(|_| a));
            let rejection = match &attempt {
                Err(e) => Some(e.to_string()),
                Ok(Attempt { error: Some(e), .. }) if !(*e <= 1.0) => Some(format!("error estimate {e:e}")),
                Ok(_) => None,
            };
            if let Some(reason) = rejection {
                retries += 1;
                if retries > config.max_retries {
                    return Ok(Trajectory {
                        samples,
                        stop: StopReason::StepFailure { t, reason },
                    });
                }
                let shrink = match &attempt {
                    Ok(Attempt { error: Some(e), .. }) if e.is_finite() => (0.9 * e.powf(-0.2)).clamp(0.1, 0.5),
                    _ => 0.5,
                };
                h_local = step * shrink;
                if matches!(config.integrator, Integrator::Rk45 { .. }) {
                    h_adapt = h_local;
                }
                continue;
            }
            let attempt = attempt.expect("accepted step");
            if let Some(e) = attempt.error {
                let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                if !clipped || factor < 1.0 {
                    h_adapt = step * factor;
                }
                h_local = h_adapt;
            }
            retries = 0;
            t = t_new;
            y = attempt.y;
            let norm = max_abs(&y);
            if !(norm <= BLOW_UP_NORM) {
                return Ok(Trajectory {
                    samples,
                    stop: StopReason::BlowUp { t, norm },
                });
            }
        }
        match sys.sample(&sys.unpack(t, &y)) {
            Ok(s) => samples.push(s),
            Err(e) => {
                return Ok(Trajectory {
                    samples,
                    stop: StopReason::MonitorFailure { t, reason: e.to_string() },
                })
            }
        }
    }
    Ok(Trajectory {
        samples,
        stop: StopReason::Completed,
    })
}

/// Generic cocalibrated flow `∂_t ∗φ = dφ` on the invariant 3-forms of a
/// seven-dimensional space.
#[derive(Clone, Debug)]
pub struct GenericProblem {
    space: HomogeneousSpace,
    phi_frame: InvariantBasis,
    star_frame: InvariantBasis,
}

impl GenericProblem {
    pub fn new(space: HomogeneousSpace) -> Result<Self> {
        if space.dim() != 7 {
            return Err(FlowError::Setup(format!("space {} has dimension {}, need 7", space.name(), space.dim())));
        }
        let all: Vec<usize> = (0..7).collect();
        let phi_frame = space.invariant_frame(3, &all)?;
        let star_frame = space.invariant_frame(4, &all)?;
        if phi_frame.len() != star_frame.len() {
            return Err(FlowError::Setup("invariant 3-forms and 4-forms differ in dimension".into()));
        }
        Ok(Self {
            space,
            phi_frame,
            star_frame,
        })
    }

    pub fn space(&self) -> &HomogeneousSpace {
        &self.space
    }

    pub fn phi_frame(&self) -> &InvariantBasis {
        &self.phi_frame
    }

    pub fn phi(&self, x: &[f64]) -> KForm<f64> {
        self.phi_frame.combine(x)
    }

    /// Coordinates of an invariant 3-form; errors if it leaves the span.
    pub fn coords(&self, phi: &KForm<f64>) -> Result<Vec<f64>> {
        let r = self.phi_frame.span_residual(phi);
        if r > 1e-10 * phi.max_abs().max(1.0) {
            return Err(HomogeneousError::NotInvariant(r).into());
        }
        Ok(self.phi_frame.coords(phi))
    }

    pub fn structure(&self, x: &[f64]) -> Result<SevenStructure<f64>> {
        Ok(SevenStructure::from_phi(self.phi(x))?)
    }

    pub fn star_coords(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.star_frame.coords(&self.structure(x)?.star_phi))
    }

    pub fn cocal_residual(&self, state: &GenericFlowState) -> Result<f64> {
        let s = self.structure(&state.x)?;
        Ok(self.space.d(&s.star_phi)?.max_abs())
    }

    /// Centered-difference Jacobian of `x ↦ coefficients(∗φ(x))`.
    pub fn star_jacobian(&self, x: &[f64]) -> Result<Matrix<f64>> {
        let n = x.len();
        let h = 1e-6 * max_abs(x).max(1.0);
        let mut columns = Vec::with_capacity(n);
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (sp, sm) = (self.star_coords(&xp)?, self.star_coords(&xm)?);
            columns.push(sp.iter().zip(&sm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<f64>>());
        }
        Ok(Matrix::from_fn(n, n, |r, c| columns[c][r]))
    }

    pub fn rhs(&self, state: &GenericFlowState) -> Result<Vec<f64>> {
        let jac = self.star_jacobian(&state.x)?;
        let cond = jac.condition_number();
        if !(cond <= MAX_CONDITION) {
            return Err(FlowError::SingularJacobian(cond));
        }
        let d_phi = self.space.d(&self.phi(&state.x))?;
        jac.solve(&self.star_frame.coords(&d_phi))
            .ok_or(FlowError::SingularJacobian(f64::INFINITY))
    }

    pub fn integrate(&self, config: &FlowConfig, seed: &GenericFlowState) -> Result<Trajectory<GenericFlowState>> {
        let class = self.structure(&seed.x)?.class;
        integrate(&GenericSystem { problem: self, class }, config, seed)
    }
}

struct GenericSystem<'a> {
    problem: &'a GenericProblem,
    class: crate::g2spin7::SevenClass,
}

impl FlowSystem for GenericSystem<'_> {
    type State = GenericFlowState;

    fn pack(&self, state: &GenericFlowState) -> (f64, Vec<f64>) {
        (state.t, state.x.clone())
    }

    fn unpack(&self, t: f64, y: &[f64]) -> GenericFlowState {
        GenericFlowState { t, x: y.to_vec() }
    }

    fn derivative(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        self.problem.rhs(&GenericFlowState { t, x: y.to_vec() })
    }

    fn admissible(&self, _t: f64, y: &[f64]) -> Result<()> {
        let class = self.problem.structure(y)?.class;
        if class != self.class {
            return Err(FlowError::Rejected(format!("class changed to {}", class.name())));
        }
        Ok(())
    }

    fn sample(&self, state: &GenericFlowState) -> Result<Sample<GenericFlowState>> {
        let s = self.problem.structure(&state.x)?;
        let cocalibration = self.problem.space.d(&s.star_phi)?.max_abs();
        Ok(Sample {
            t: state.t,
            state: state.clone(),
            monitors: Monitors {
                cocalibration,
                normalization: self.problem.star_frame.span_residual(&s.star_phi),
                torsion: None,
                s_norm: None,
                signature: s.g7.signature(),
                class: s.class.name().to_string(),
            },
            phi: s.phi,
            star_phi: s.star_phi,
        })
    }
}

/// Result of [`DegenerateProblem::smoothness_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct Smoothness {
    pub c: f64,
    pub ok: bool,
    pub fit_residual: f64,
    pub omega_residual: f64,
}

/// The system for `(f, ω, J*ρ)` on a seven-dimensional space fibred by the
/// direction `e_φ = e_phi_scale · e_fiber`. `ω` and `s = J*ρ` are stored in
/// invariant bases of forms on the complement of the fiber.
#[derive(Clone, Debug)]
pub struct DegenerateProblem {
    space: HomogeneousSpace,
    fiber: usize,
    e_phi_scale: f64,
    horizontal: Vec<usize>,
    w_frame: InvariantBasis,
    s_frame: InvariantBasis,
    w_basis: Vec<KForm<f64>>,
    s_basis: Vec<KForm<f64>>,
    de_phi: KForm<f64>,
}

impl DegenerateProblem {
    pub fn new(space: HomogeneousSpace, fiber: usize, e_phi_scale: f64) -> Result<Self> {
        if space.dim() != 7 || fiber >= 7 {
            return Err(FlowError::Setup(format!(
                "need a 7-dimensional space and a fiber position below 7, got {} and {fiber}",
                space.dim()
            )));
        }
        if e_phi_scale == 0.0 || !e_phi_scale.is_finite() {
            return Err(FlowError::Setup(format!("bad fiber scale {e_phi_scale}")));
        }
        let horizontal: Vec<usize> = (0..7).filter(|&i| i != fiber).collect();
        let w_frame = space.invariant_frame(2, &horizontal)?;
        let s_frame = space.invariant_frame(3, &horizontal)?;
        let w_basis = w_frame.restricted(&horizontal)?;
        let s_basis = s_frame.restricted(&horizontal)?;
        let de_phi = space.d_coframe()[fiber].restrict(&horizontal)?.scale(1.0 / e_phi_scale);
        Ok(Self {
            space,
            fiber,
            e_phi_scale,
            horizontal,
            w_frame,
            s_frame,
            w_basis,
            s_basis,
            de_phi,
        })
    }

    pub fn space(&self) -> &HomogeneousSpace {
        &self.space
    }

    pub fn e_phi_scale(&self) -> f64 {
        self.e_phi_scale
    }

    /// Index tuples labelling the ω and s coordinates, in coframe numbering.
    pub fn labels(&self) -> (Vec<u8>, Vec<u8>) {
        (self.w_frame.labels.clone(), self.s_frame.labels.clone())
    }

    fn e_phi(&self) -> Vector<f64> {
        Vector::basis(7, self.fiber).scale(self.e_phi_scale)
    }

    fn lift(&self, a: &KForm<f64>) -> Result<KForm<f64>> {
        Ok(a.embed(7, &self.horizontal)?)
    }

    fn combine(basis: &[KForm<f64>], x: &[f64], degree: usize) -> KForm<f64> {
        basis
            .iter()
            .zip(x)
            .fold(KForm::zero(6, degree), |acc, (b, &c)| acc.add(&b.scale(c)))
    }

    pub fn omega(&self, w: &[f64]) -> KForm<f64> {
        Self::combine(&self.w_basis, w, 2)
    }

    pub fn s_form(&self, s: &[f64]) -> KForm<f64> {
        Self::combine(&self.s_basis, s, 3)
    }

    /// Coordinates of an invariant 2- or 3-form on the distribution.
    pub fn coords(&self, a: &KForm<f64>) -> Result<Vec<f64>> {
        let frame = match a.degree() {
            2 => &self.w_frame,
            3 => &self.s_frame,
            k => return Err(ExteriorError::BadDegree { dim: 6, degree: k }.into()),
        };
        let lifted = self.lift(a)?;
        let r = frame.span_residual(&lifted);
        if r > 1e-9 * a.max_abs().max(1.0) {
            return Err(HomogeneousError::NotInvariant(r).into());
        }
        Ok(frame.coords(&lifted))
    }

    /// `ρ = −J_s* s`.
    pub fn rho(&self, omega: &KForm<f64>, s: &KForm<f64>) -> Result<KForm<f64>> {
        Ok(j_star_rho(omega, s)?.neg())
    }

    fn d_horizontal(&self, a: &KForm<f64>) -> Result<KForm<f64>> {
        Ok(self.space.d(&self.lift(a)?)?)
    }

    /// `L_{e_φ} α` for a form on the distribution.
    pub fn lie(&self, a: &KForm<f64>) -> Result<KForm<f64>> {
        Ok(self
            .space
            .lie_derivative_raw(&self.e_phi(), &self.lift(a)?)?
            .restrict(&self.horizontal)?)
    }

    pub fn rhs(&self, state: &DegenerateFlowState) -> Result<DegenerateDerivative> {
        let f = state.f;
        if f == 0.0 || !f.is_finite() {
            return Err(FlowError::NonpositiveF(f));
        }
        let omega = self.omega(&state.w);
        let s = self.s_form(&state.s);
        let rho = self.rho(&omega, &s)?;
        let d_rho = self.d_horizontal(&rho)?;
        let rhs1 = d_rho
            .restrict(&self.horizontal)?
            .add(&omega.wedge(&self.de_phi)?.scale(f));
        let lie_rho = d_rho.interior(&self.e_phi())?.restrict(&self.horizontal)?;
        let d_omega = self.d_horizontal(&omega)?.restrict(&self.horizontal)?;
        let rhs2 = lie_rho.sub(&d_omega.scale(f));
        let w_dot = solve_wedge_omega(&omega, &rhs1)?;
        // ḟ from differentiating J*ρ∧ρ = (2/3)ω³ along the flow
        let om2 = omega.wedge(&omega)?;
        let volume = om2.wedge(&omega)?.coeffs()[0] * 2.0 / 3.0;
        let f_dot = -(rho.wedge(&rhs2)?.coeffs()[0] + f * w_dot.wedge(&om2)?.coeffs()[0]) / volume;
        let s_dot = rhs2.sub(&s.scale(f_dot)).scale(1.0 / f);
        Ok(DegenerateDerivative {
            f: f_dot,
            w: self.coords(&w_dot)?,
            s: self.coords(&s_dot)?,
        })
    }

    pub fn smoothness_check(&self, omega0: &KForm<f64>, rho0: &KForm<f64>) -> Result<Smoothness> {
        let lie_rho = self.lie(rho0)?;
        let jr = j_star_rho(omega0, rho0)?;
        let dot = |a: &KForm<f64>, b: &KForm<f64>| a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x * y).sum::<f64>();
        let c = dot(&lie_rho, &jr) / dot(&jr, &jr);
        let fit_residual = lie_rho.sub(&jr.scale(c)).max_abs();
        if fit_residual > FIT_TOL {
            return Err(FlowError::NotProportional(fit_residual));
        }
        let omega_residual = self.lie(omega0)?.max_abs();
        Ok(Smoothness {
            c,
            ok: (c.abs() - 1.0).abs() < FIT_TOL && omega_residual < FIT_TOL,
            fit_residual,
            omega_residual,
        })
    }

    /// First-order seed at `t = ε`: `f = cε`, `s = J*ρ₀`, `ω = ω₀ + εẇ₀`.
    /// A negative `ε` seeds the continuation to negative times.
    pub fn startup_seed(
        &self,
        omega0: &KForm<f64>,
        rho0: &KForm<f64>,
        epsilon: Option<f64>,
    ) -> Result<DegenerateFlowState> {
        let fail = |p| Err(FlowError::PreconditionFailed(p));
        match classify_pair(omega0, rho0) {
            SixStructureClass::Structure(StructureKind::Su3 | StructureKind::Su12) => {}
            other => return fail(Precondition::NotAStructure(other.label())),
        }
        let lifted = self.lift(omega0)?;
        let closed = self.space.d(&lifted)?.wedge(&lifted)?.max_abs();
        if closed > FIT_TOL {
            return fail(Precondition::OmegaClosedWedge(closed));
        }
        let sm = self.smoothness_check(omega0, rho0)?;
        if sm.omega_residual > FIT_TOL {
            return fail(Precondition::OmegaNotInvariant(sm.omega_residual));
        }
        if (sm.c.abs() - 1.0).abs() > FIT_TOL {
            return fail(Precondition::NotSmooth { c: sm.c });
        }
        if sm.c <= 0.0 {
            return fail(Precondition::NonpositiveC(sm.c));
        }
        let eps = epsilon.unwrap_or(1e-4 / sm.c);
        if eps == 0.0 || !eps.is_finite() {
            return Err(FlowError::Setup(format!("startup epsilon must be nonzero, got {eps}")));
        }
        let w_dot = solve_wedge_omega(omega0, &self.d_horizontal(rho0)?.restrict(&self.horizontal)?)?;
        Ok(DegenerateFlowState {
            t: eps,
            f: sm.c * eps,
            w: self.coords(&omega0.add(&w_dot.scale(eps)))?,
            s: self.coords(&j_star_rho(omega0, rho0)?)?,
        })
    }

    /// Bundle data on `R^8`, with the radial direction last. For negative `f`
    /// the fiber covector is flipped so that `f e^φ` is unchanged.
    pub fn bundle_data(&self, state: &DegenerateFlowState) -> Result<BundleSplitData<f64>> {
        let omega = self.omega(&state.w);
        let rho = self.rho(&omega, &self.s_form(&state.s))?;
        let sign = if state.f < 0.0 { -1.0 } else { 1.0 };
        Ok(BundleSplitData {
            f: state.f.abs(),
            omega: omega.embed(8, &self.horizontal)?,
            rho: rho.embed(8, &self.horizontal)?,
            e_phi_dual: KForm::monomial(8, &[self.fiber], sign / self.e_phi_scale)?,
            e_r_dual: KForm::monomial(8, &[7], 1.0)?,
        })
    }

    pub fn integrate(&self, config: &FlowConfig, seed: &DegenerateFlowState) -> Result<Trajectory<DegenerateFlowState>> {
        let omega = self.omega(&seed.w);
        let rho = self.rho(&omega, &self.s_form(&seed.s))?;
        let kind = classify_pair(&omega, &rho)
            .kind()
            .ok_or_else(|| FlowError::Setup("seed is not a structure".into()))?;
        let system = DegenerateSystem {
            problem: self,
            kind,
            f_sign: seed.f.signum(),
        };
        integrate(&system, config, seed)
    }
}

struct DegenerateSystem<'a> {
    problem: &'a DegenerateProblem,
    kind: StructureKind,
    f_sign: f64,
}

impl DegenerateSystem<'_> {
    fn split(&self, y: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let nw = self.problem.w_basis.len();
        (y[0], y[1..1 + nw].to_vec(), y[1 + nw..].to_vec())
    }
}

impl FlowSystem for DegenerateSystem<'_> {
    type State = DegenerateFlowState;

    fn pack(&self, state: &DegenerateFlowState) -> (f64, Vec<f64>) {
        let mut y = vec![state.f];
        y.extend(&state.w);
        y.extend(&state.s);
        (state.t, y)
    }

    fn unpack(&self, t: f64, y: &[f64]) -> DegenerateFlowState {
        let (f, w, s) = self.split(y);
        DegenerateFlowState { t, f, w, s }
    }

    fn derivative(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.problem.rhs(&self.unpack(t, y))?;
        let mut out = vec![d.f];
        out.extend(d.w);
        out.extend(d.s);
        Ok(out)
    }

    fn admissible(&self, _t: f64, y: &[f64]) -> Result<()> {
        let (f, w, s) = self.split(y);
        if f * self.f_sign <= 0.0 {
            return Err(FlowError::NonpositiveF(f));
        }
        let omega = self.problem.omega(&w);
        let rho = self.problem.rho(&omega, &self.problem.s_form(&s))?;
        match classify_pair(&omega, &rho) {
            SixStructureClass::Structure(k) if k == self.kind => Ok(()),
            other => Err(FlowError::Rejected(format!("pair became {}", other.label()))),
        }
    }

    fn sample(&self, state: &DegenerateFlowState) -> Result<Sample<DegenerateFlowState>> {
        let p = self.problem;
        let data = p.bundle_data(state)?;
        let (big_phi, g8) = bundle_big_phi(&data)?;
        let frame = data.frame()?;
        let first7: Vec<usize> = (0..7).collect();
        let phi = big_phi.interior(&frame.e_r)?.restrict(&first7)?;
        let star_phi = big_phi.restrict(&first7)?;
        let omega = p.omega(&state.w);
        let s = p.s_form(&state.s);
        let rho = p.rho(&omega, &s)?;
        let om3 = omega.wedge(&omega)?.wedge(&omega)?;
        let normalization = s.wedge(&rho)?.sub(&om3.scale(2.0 / 3.0)).max_abs() + omega.wedge(&rho)?.max_abs();
        let g6 = assoc_metric(&omega, &rho)?;
        Ok(Sample {
            t: state.t,
            state: state.clone(),
            monitors: Monitors {
                cocalibration: p.space.d(&star_phi)?.max_abs(),
                normalization,
                torsion: None,
                s_norm: Some(s.inner(&s, &g6)?),
                signature: g8.signature(),
                class: classify_pair(&omega, &rho).label(),
            },
            phi,
            star_phi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_grid_hits_the_end_points() {
        let g = sample_grid(1e-4, 0.05, 0.01);
        assert_eq!(g.len(), 5);
        assert!((g[0] - 0.01).abs() < 1e-15);
        assert_eq!(*g.last().unwrap(), 0.05);
        let back = sample_grid(-1e-4, -0.03, 0.01);
        assert_eq!(back.len(), 3);
        assert!((back[1] + 0.02).abs() < 1e-15);
    }

    #[test]
    fn three_point_derivative_is_exact_on_quadratics() {
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let (a, b, c) = (0.1, 0.25, 0.3);
        for x in [a, b, c] {
            let w = lagrange_derivative(a, b, c, x);
            let d = w[0] * f(a) + w[1] * f(b) + w[2] * f(c);
            assert!((d - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }
}
