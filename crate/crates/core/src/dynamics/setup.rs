use crate::error::{usage, Result};
use crate::fields::GridField;
use crate::kernel::RieszParams;
use std::fmt;
use std::sync::Arc;

type FieldFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// External vector field `V^t(x)`.
#[derive(Clone, Default)]
pub enum External {
    #[default]
    Zero,
    /// Spatially and temporally constant drift.
    Constant(Vec<f64>),
    /// Time-independent grid field, interpolated cubically off the nodes.
    Grid(GridField),
    /// `f(t, x, out)`.
    Custom(FieldFn),
}

impl fmt::Debug for External {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c:?})"),
            Self::Grid(g) => write!(f, "Grid(n = {}, L = {})", g.spec.n, g.spec.l),
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl External {
    pub fn custom(f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Constant(c) => c.iter().all(|&v| v == 0.0),
            _ => false,
        }
    }

    /// Writes `V^t(x)` into `out`.
    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            Self::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Self::Constant(c) => out.copy_from_slice(c),
            Self::Grid(g) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = g.interpolate(k, x)?;
                }
            }
            Self::Custom(f) => f(t, x, out),
        }
        Ok(())
    }
}

/// Shared configuration of the particle and mean-field solvers.
///
/// The particle system is `x_i' = (1/N) sum_{j != i} M grad g(x_i - x_j) - V^t(x_i)`
/// and the mean-field equation `d_t mu = div(mu (V - M grad g * mu))`.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub params: RieszParams,
    /// `d x d` mobility matrix, row-major.
    pub m: Vec<f64>,
    pub external: External,
    pub dt: f64,
    pub t_end: f64,
    pub collision_floor: f64,
    /// Snapshot every `stride` steps.
    pub stride: usize,
    /// Coefficient of the optional `nu |D|^4` damping in the mean-field solver.
    pub hyperviscosity: f64,
}

impl SimSetup {
    pub fn new(params: RieszParams, m: Vec<f64>, dt: f64, t_end: f64, collision_floor: f64) -> Result<Self> {
        let d = params.d;
        if m.len() != d * d || m.iter().any(|v| !v.is_finite()) {
            return usage(format!("mobility matrix must have {} finite entries", d * d));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return usage(format!("time step {dt} must be positive"));
        }
        if !(t_end >= dt) || !t_end.is_finite() {
            return usage(format!("horizon {t_end} must be at least the time step {dt}"));
        }
        if !(collision_floor > 0.0) {
            return usage(format!("collision floor {collision_floor} must be positive"));
        }
        Ok(Self {
            params,
            m,
            external: External::Zero,
            dt,
            t_end,
            collision_floor,
            stride: 1,
            hyperviscosity: 0.0,
        })
    }

    /// `M = -I`.
    pub fn gradient_flow(params: RieszParams, dt: f64, t_end: f64, collision_floor: f64) -> Result<Self> {
        let d = params.d;
        let m = (0..d * d).map(|k| if k % (d + 1) == 0 { -1.0 } else { 0.0 }).collect();
        Self::new(params, m, dt, t_end, collision_floor)
    }

    pub fn with_external(mut self, external: External) -> Result<Self> {
        if let External::Constant(c) = &external {
            if c.len() != self.params.d {
                return usage(format!("constant drift has {} components, expected {}", c.len(), self.params.d));
            }
        }
        if let External::Grid(g) = &external {
            if g.ncomp != self.params.d || g.spec.d != self.params.d {
                return usage("grid drift must be a d-component field in d dimensions");
            }
        }
        self.external = external;
        Ok(self)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return usage("snapshot stride must be positive");
        }
        self.stride = stride;
        Ok(self)
    }

    pub fn with_hyperviscosity(mut self, nu: f64) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return usage(format!("hyperviscosity {nu} must be nonnegative"));
        }
        self.hyperviscosity = nu;
        Ok(self)
    }

    /// Number of steps and the step actually used, `t_end / steps`.
    pub fn steps(&self) -> (usize, f64) {
        let steps = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }

    pub fn interacting(&self) -> bool {
        self.m.iter().any(|&v| v != 0.0)
    }

    /// `out = M z`.
    #[inline]
    pub(crate) fn apply_m(&self, z: &[f64], out: &mut [f64]) {
        let d = z.len();
        for (a, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..d).map(|b| self.m[a * d + b] * z[b]).sum();
        }
    }
}
