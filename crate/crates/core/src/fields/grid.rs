use crate::error::{usage, Error, Result};
use rustfft::num_complex::Complex64;
use serde::Serialize;
use std::sync::OnceLock;

/// Uniform periodic grid on the box `[-L/2, L/2)^d`.
///
/// Node `j` along an axis sits at `-L/2 + j h` with `h = L / n`, so the
/// origin is node `n / 2`. Data meant for linear (non-circular)
/// convolution must be supported in the inner box of half-width
/// `L / (2 padding)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    pub l: f64,
    pub padding: usize,
}

impl GridSpec {
    pub fn new(d: usize, n: usize, l: f64) -> Result<Self> {
        Self::with_padding(d, n, l, 2)
    }

    pub fn with_padding(d: usize, n: usize, l: f64, padding: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return usage(format!("grid dimension {d} outside 1..=3"));
        }
        if n < 4 || !n.is_power_of_two() {
            return usage(format!("n_per_axis = {n} must be a power of two >= 4"));
        }
        if !(l > 0.0) || !l.is_finite() {
            return usage(format!("box length L = {l} must be positive"));
        }
        if padding < 2 {
            return usage(format!("padding factor {padding} must be >= 2"));
        }
        Ok(Self { d, n, l, padding })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Volume element `h^d`.
    #[inline]
    pub fn cell(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.l + j as f64 * self.h()
    }

    /// Signed frequency index of DFT bin `m` (Nyquist counted negative).
    #[inline]
    pub fn signed_index(&self, m: usize) -> i64 {
        if m < self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    /// Frequency `xi` of DFT bin `m` in the `e^{-2 pi i xi x}` convention.
    #[inline]
    pub fn freq(&self, m: usize) -> f64 {
        self.signed_index(m) as f64 / self.l
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.d {
            1 => [idx, 0, 0],
            2 => [idx / n, idx % n, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    #[inline]
    pub fn ravel(&self, ix: &[usize]) -> usize {
        ix[..self.d].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Coordinates of node `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = self.coord(ix[k]);
        }
        x
    }

    /// Frequency vector of bin `idx`.
    #[inline]
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = self.freq(ix[k]);
        }
        x
    }

    /// True when some axis of bin `idx` is the Nyquist bin.
    #[inline]
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let ix = self.unravel(idx);
        ix[..self.d].iter().any(|&m| m == self.n / 2)
    }

    /// Half-width of the box in which data must live for linear convolution.
    pub fn active_half_width(&self) -> f64 {
        0.5 * self.l / self.padding as f64
    }

    /// Grid with twice the spacing on the same box.
    pub fn coarsened(&self) -> Result<Self> {
        Self::with_padding(self.d, self.n / 2, self.l, self.padding)
    }
}

/// Scalar or vector field sampled on a [`GridSpec`].
///
/// Values are stored component-major: component `c` occupies
/// `values[c * len .. (c + 1) * len]` in row-major node order.
#[derive(Debug, Clone)]
pub struct GridField {
    pub spec: GridSpec,
    pub ncomp: usize,
    values: Vec<f64>,
    spectral: OnceLock<Vec<Complex64>>,
}

impl GridField {
    pub fn from_values(spec: GridSpec, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        if ncomp == 0 || values.len() != ncomp * spec.len() {
            return usage(format!(
                "field has {} values, expected {} x {}",
                values.len(),
                ncomp,
                spec.len()
            ));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite field value at flat index {k}")));
        }
        Ok(Self { spec, ncomp, values, spectral: OnceLock::new() })
    }

    pub fn zeros(spec: GridSpec, ncomp: usize) -> Self {
        Self { spec, ncomp, values: vec![0.0; ncomp * spec.len()], spectral: OnceLock::new() }
    }

    /// Scalar field sampled from `f(x)`.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let d = spec.d;
        let values = (0..spec.len()).map(|i| f(&spec.point(i)[..d])).collect();
        Self::from_values(spec, 1, values)
    }

    /// Vector field sampled from `f(x, out)`.
    pub fn vector_from_fn(
        spec: GridSpec,
        ncomp: usize,
        f: impl Fn(&[f64], &mut [f64]),
    ) -> Result<Self> {
        let m = spec.len();
        let d = spec.d;
        let mut values = vec![0.0; ncomp * m];
        let mut out = vec![0.0; ncomp];
        for i in 0..m {
            f(&spec.point(i)[..d], &mut out);
            for c in 0..ncomp {
                values[c * m + i] = out[c];
            }
        }
        Self::from_values(spec, ncomp, values)
    }

    /// The identity vector field `v(x) = x`.
    pub fn identity(spec: GridSpec) -> Self {
        Self::vector_from_fn(spec, spec.d, |x, out| out.copy_from_slice(x))
            .expect("identity field is finite")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let m = self.spec.len();
        &self.values[c * m..(c + 1) * m]
    }

    /// Builds a new field from per-node values, reusing the grid.
    pub fn with_values(&self, ncomp: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_values(self.spec, ncomp, values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        let values = self.values.iter().map(|v| a * v).collect();
        Self::from_values(self.spec, self.ncomp, values).expect("scaling keeps values finite")
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &GridField) -> Result<Self> {
        if other.spec != self.spec || other.ncomp != self.ncomp {
            return usage("axpy on incompatible fields");
        }
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect();
        Self::from_values(self.spec, self.ncomp, values)
    }

    /// Riemann sum `sum f h^d` per component.
    pub fn integral(&self, c: usize) -> f64 {
        crate::numeric::neumaier_sum(self.component(c).iter().copied()) * self.spec.cell()
    }

    pub fn max_abs(&self) -> f64 {
        self.pointwise_norms().into_iter().fold(0.0, f64::max)
    }

    /// Euclidean norm of the component vector at every node.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        let m = self.spec.len();
        (0..m)
            .map(|i| (0..self.ncomp).map(|c| self.values[c * m + i].powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// Unnormalized DFT of every component, computed once.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectral.get_or_init(|| {
            let m = self.spec.len();
            let mut out: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for c in 0..self.ncomp {
                super::spectral::fft_nd(&self.spec, &mut out[c * m..(c + 1) * m], false);
            }
            out
        })
    }

    /// Cubic (4-point Lagrange per axis) interpolation of component `c` at `x`.
    pub fn interpolate(&self, c: usize, x: &[f64]) -> Result<f64> {
        let st = Stencil::new(&self.spec, x)?;
        Ok(st.apply(&self.spec, self.component(c)))
    }

    /// Fourth-order central difference of component `c` along `axis` at node
    /// `idx`, falling back to second order next to the boundary.
    pub fn fd_partial(&self, c: usize, idx: usize, axis: usize) -> f64 {
        fd_partial(&self.spec, self.component(c), idx, axis)
    }

    /// Subsample every other node onto the coarsened grid.
    pub fn coarsened(&self) -> Result<Self> {
        let coarse = self.spec.coarsened()?;
        let m = coarse.len();
        let mut values = vec![0.0; self.ncomp * m];
        for c in 0..self.ncomp {
            let src = self.component(c);
            for i in 0..m {
                let ix = coarse.unravel(i);
                let fine = [2 * ix[0], 2 * ix[1], 2 * ix[2]];
                values[c * m + i] = src[self.spec.ravel(&fine)];
            }
        }
        Self::from_values(coarse, self.ncomp, values)
    }
}

pub(crate) fn fd_partial(spec: &GridSpec, v: &[f64], idx: usize, axis: usize) -> f64 {
    let ix = spec.unravel(idx);
    let n = spec.n;
    let h = spec.h();
    let at = |off: i64| -> f64 {
        let mut j = ix;
        j[axis] = (ix[axis] as i64 + off) as usize;
        v[spec.ravel(&j)]
    };
    let i = ix[axis];
    if i >= 2 && i + 2 < n {
        (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
    } else if i >= 1 && i + 1 < n {
        (at(1) - at(-1)) / (2.0 * h)
    } else if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else {
        (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
    }
}

/// Interpolation stencil: 4^d node indices and tensor Lagrange weights.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub nodes: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn new(spec: &GridSpec, x: &[f64]) -> Result<Self> {
        let h = spec.h();
        let d = spec.d;
        let mut base = [0usize; 3];
        let mut w1 = [[0.0; 4]; 3];
        for k in 0..d {
            let u = (x[k] + 0.5 * spec.l) / h;
            let j = u.floor();
            if !(j >= 1.0 && j + 2.0 <= (spec.n - 1) as f64) {
                return Err(Error::Precondition(format!(
                    "point coordinate {} lies outside the interpolation range of the grid",
                    x[k]
                )));
            }
            let t = u - j;
            base[k] = j as usize - 1;
            w1[k] = [
                -t * (t - 1.0) * (t - 2.0) / 6.0,
                (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
                -(t + 1.0) * t * (t - 2.0) / 2.0,
                (t + 1.0) * t * (t - 1.0) / 6.0,
            ];
        }
        let count = 4usize.pow(d as u32);
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for q in 0..count {
            let mut ix = [0usize; 3];
            let mut w = 1.0;
            let mut r = q;
            for k in 0..d {
                let o = r % 4;
                r /= 4;
                ix[k] = base[k] + o;
                w *= w1[k][o];
            }
            nodes.push(spec.ravel(&ix));
            weights.push(w);
        }
        Ok(Self { nodes, weights })
    }

    #[inline]
    pub fn apply(&self, _spec: &GridSpec, v: &[f64]) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&i, &w)| w * v[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(1, 100, 1.0).unwrap_err().is_usage());
        assert!(GridSpec::new(1, 64, 0.0).unwrap_err().is_usage());
        assert!(GridSpec::with_padding(1, 64, 1.0, 1).unwrap_err().is_usage());
        let g = GridSpec::new(2, 8, 4.0).unwrap();
        assert_eq!(g.point(g.ravel(&[4, 4])), [0.0, 0.0, 0.0]);
        assert_eq!(g.unravel(g.ravel(&[3, 5])), [3, 5, 0]);
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let spec = GridSpec::new(2, 16, 2.0).unwrap();
        let f = |x: &[f64]| 1.0 + x[0] - 2.0 * x[1] + x[0] * x[0] * x[1] - 0.5 * x[1].powi(3);
        let field = GridField::from_fn(spec, f).unwrap();
        let x = [0.137, -0.291];
        assert!((field.interpolate(0, &x).unwrap() - f(&x)).abs() < 1e-13);
    }

    #[test]
    fn interpolation_outside_range_is_rejected() {
        let spec = GridSpec::new(1, 16, 2.0).unwrap();
        let field = GridField::from_fn(spec, |x| x[0]).unwrap();
        assert!(field.interpolate(0, &[0.99]).is_err());
    }

    #[test]
    fn fd_partial_is_exact_on_cubics() {
        let spec = GridSpec::new(1, 32, 2.0).unwrap();
        let field = GridField::from_fn(spec, |x| x[0].powi(3) - x[0]).unwrap();
        let i = 20;
        let x = spec.coord(i);
        assert!((field.fd_partial(0, i, 0) - (3.0 * x * x - 1.0)).abs() < 1e-12);
    }
}
