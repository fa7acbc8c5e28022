use super::grid::{GridField, GridSpec};
use crate::error::{Error, Result};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;
use std::f64::consts::PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place d-dimensional DFT along every axis. The inverse is normalized
/// by `1 / n^d`.
pub(crate) fn fft_nd(spec: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = spec.n;
    let d = spec.d;
    let fft = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    });
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let outer = data.len() / (n * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * n * stride + s;
                for k in 0..n {
                    line[k] = data[base + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for k in 0..n {
                    data[base + k * stride] = line[k];
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Spectral representation of a grid field: the unnormalized DFT of each
/// component in row-major bin order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub spec: GridSpec,
    pub ncomp: usize,
    pub data: Vec<Complex64>,
}

impl Spectrum {
    /// Factor turning DFT coefficients into samples of the continuous
    /// Fourier transform (up to a unimodular phase): `h^d`.
    pub fn continuous_scale(&self) -> f64 {
        self.spec.cell()
    }
}

/// Forward transform of every component.
pub fn forward(field: &GridField) -> Spectrum {
    Spectrum { spec: field.spec, ncomp: field.ncomp, data: field.spectrum().to_vec() }
}

/// Inverse transform, returning the real part. Fails when the imaginary
/// residue exceeds `1e-9` of the field's magnitude.
pub fn inverse(spectrum: &Spectrum) -> Result<GridField> {
    let m = spectrum.spec.len();
    let mut data = spectrum.data.clone();
    for c in 0..spectrum.ncomp {
        fft_nd(&spectrum.spec, &mut data[c * m..(c + 1) * m], true);
    }
    let scale = data.iter().map(|z| z.re.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let resid = data.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if resid > 1e-9 * scale {
        return Err(Error::Data(format!(
            "inverse transform has imaginary residue {resid:.3e} (non-Hermitian spectrum)"
        )));
    }
    GridField::from_values(spectrum.spec, spectrum.ncomp, data.into_iter().map(|z| z.re).collect())
}

/// Forward or inverse transform through a physical-space round trip.
///
/// `Forward` returns a field whose spectral cache is filled; `Inverse`
/// re-synthesizes the physical values from that cache.
pub fn spectral_transform(field: &GridField, direction: Direction) -> Result<GridField> {
    match direction {
        Direction::Forward => {
            let _ = field.spectrum();
            Ok(field.clone())
        }
        Direction::Inverse => inverse(&forward(field)),
    }
}

/// Multiply the spectrum of component `c` by `m(xi)` and return the
/// complex physical-space result.
pub(crate) fn multiply_component(
    field: &GridField,
    c: usize,
    m: impl Fn(&[f64; 3], usize) -> Complex64,
) -> Vec<Complex64> {
    let spec = field.spec;
    let len = spec.len();
    let src = &field.spectrum()[c * len..(c + 1) * len];
    let mut out: Vec<Complex64> = (0..len).map(|i| src[i] * m(&spec.xi(i), i)).collect();
    fft_nd(&spec, &mut out, true);
    out
}

/// Real scalar field obtained from a real, even multiplier applied to every
/// component.
pub fn apply_multiplier(field: &GridField, m: impl Fn(&[f64; 3]) -> f64) -> Result<GridField> {
    let len = field.spec.len();
    let mut values = Vec::with_capacity(field.ncomp * len);
    for c in 0..field.ncomp {
        let out = multiply_component(field, c, |xi, _| Complex64::new(m(xi), 0.0));
        values.extend(out.into_iter().map(|z| z.re));
    }
    field.with_values(field.ncomp, values)
}

/// Spectral partial derivative of component `c` along `axis`. The Nyquist
/// bin is dropped so the result stays real.
pub fn spectral_partial(field: &GridField, c: usize, axis: usize) -> Vec<f64> {
    let spec = field.spec;
    let out = multiply_component(field, c, |xi, i| {
        if spec.is_nyquist(i) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * xi[axis])
        }
    });
    out.into_iter().map(|z| z.re).collect()
}

/// Jacobian field `(d_j v_c)` with `d * ncomp` components, ordered
/// component-major (`c * d + j`).
pub fn spectral_jacobian(field: &GridField) -> Result<GridField> {
    let d = field.spec.d;
    let mut values = Vec::with_capacity(field.ncomp * d * field.spec.len());
    for c in 0..field.ncomp {
        for j in 0..d {
            values.extend(spectral_partial(field, c, j));
        }
    }
    field.with_values(field.ncomp * d, values)
}

/// DFT of a kernel sampled at signed node offsets, so that bin 0 holds
/// `k(0)` and the product with a field spectrum is a circular convolution.
pub(crate) fn wrapped_kernel_spectrum(
    spec: &GridSpec,
    k: impl Fn(&[f64]) -> f64,
) -> Vec<Complex64> {
    let len = spec.len();
    let h = spec.h();
    let d = spec.d;
    let mut data = Vec::with_capacity(len);
    for i in 0..len {
        let ix = spec.unravel(i);
        let mut z = [0.0; 3];
        for a in 0..d {
            z[a] = spec.signed_index(ix[a]) as f64 * h;
        }
        data.push(Complex64::new(k(&z[..d]), 0.0));
    }
    fft_nd(spec, &mut data, false);
    data
}

/// Discrete convolution `sum_b K(x_a - x_b) w_b` of node values `w` with a
/// kernel given by its wrapped spectrum.
pub(crate) fn convolve_nodes(spec: &GridSpec, kernel: &[Complex64], w: &[f64]) -> Vec<f64> {
    let mut data: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(spec, &mut data, false);
    for (z, k) in data.iter_mut().zip(kernel) {
        *z *= k;
    }
    fft_nd(spec, &mut data, true);
    data.into_iter().map(|z| z.re).collect()
}

/// `|xi|` for bin index `i`.
#[inline]
pub(crate) fn xi_norm(spec: &GridSpec, i: usize) -> f64 {
    let xi = spec.xi(i);
    xi[..spec.d].iter().map(|v| v * v).sum::<f64>().sqrt()
}
