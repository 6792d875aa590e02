//! Weight schemes and the weighted functional statistics
//! `sum_t w_{t,T} f(s, X_{t,T})`: local ECF, realized volatility and friends.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::process::Path;

/// Weight constant `C_w` above which a weight scheme is reported as suspicious.
pub const WEIGHT_CONSTANT_WARN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `0.75 (1 - x^2)` on `[-1, 1]`.
    Epanechnikov,
    /// `0.5` on `[-1, 1]`.
    Uniform,
}

impl Kernel {
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - x * x),
            Kernel::Uniform => 0.5,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::param(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind {
    KernelLocal {
        u: f64,
        bandwidth: f64,
        kernel: Kernel,
    },
    /// `w = T^{-1/2}` everywhere.
    GlobalRoot,
    /// Anything else (unit weights, point masses, ...).
    Custom,
}

/// Non-negative weights `w_{1,T}, ..., w_{T,T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    weights: Vec<f64>,
    d_t: usize,
    c_w: f64,
    kind: WeightKind,
}

impl WeightScheme {
    fn build(weights: Vec<f64>, kind: WeightKind) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::param(format!(
                "weights must be finite and >= 0, found {w}"
            )));
        }
        let d_t = weights.iter().filter(|&&w| w > 0.0).count();
        let max = weights.iter().copied().fold(0.0, f64::max);
        let c_w = if d_t == 0 {
            0.0
        } else {
            max * (d_t as f64).sqrt()
        };
        if c_w > WEIGHT_CONSTANT_WARN {
            log::warn!("weight scheme has C_w = {c_w:.3} > {WEIGHT_CONSTANT_WARN}");
        }
        Ok(WeightScheme {
            weights,
            d_t,
            c_w,
            kind,
        })
    }

    /// Arbitrary weights. All-zero weights are allowed here (they give a zero
    /// statistic); the kernel and global constructors guarantee `d_T >= 1`.
    pub fn from_values(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("weight vector is empty"));
        }
        Self::build(weights, WeightKind::Custom)
    }

    pub fn unit(t_len: usize) -> Result<Self> {
        Self::from_values(vec![1.0; t_len])
    }

    pub fn global_root(t_len: usize) -> Result<Self> {
        if t_len == 0 {
            return Err(Error::param("T must be >= 1"));
        }
        Self::build(
            vec![1.0 / (t_len as f64).sqrt(); t_len],
            WeightKind::GlobalRoot,
        )
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Number of strictly positive weights.
    pub fn d_t(&self) -> usize {
        self.d_t
    }

    /// Smallest `C_w` with `max_t w_t <= C_w d_T^{-1/2}`.
    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    /// Range `lo..hi` (0-based, exclusive) containing every positive weight.
    pub fn support(&self) -> std::ops::Range<usize> {
        let lo = self.weights.iter().position(|&w| w > 0.0);
        let hi = self.weights.iter().rposition(|&w| w > 0.0);
        match (lo, hi) {
            (Some(lo), Some(hi)) => lo..hi + 1,
            _ => 0..0,
        }
    }
}

/// `w_{t,T} = (b_T T)^{-1/2} K((t/T - u) / b_T)` for `t = 1..=T`.
pub fn kernel_weights(
    u: f64,
    bandwidth: f64,
    t_len: usize,
    kernel: Kernel,
) -> Result<WeightScheme> {
    if t_len == 0 {
        return Err(Error::param("T must be >= 1"));
    }
    if !(bandwidth > 0.0 && bandwidth < 1.0) {
        return Err(Error::param(format!(
            "bandwidth must lie in (0, 1), got {bandwidth}"
        )));
    }
    if !u.is_finite() || u + bandwidth <= 0.0 || u - bandwidth >= 1.0 {
        return Err(Error::param(format!(
            "kernel window {u} +/- {bandwidth} does not intersect (0, 1)"
        )));
    }
    if u - bandwidth < 0.0 || u + bandwidth > 1.0 {
        log::warn!("kernel window {u} +/- {bandwidth} is cut by the boundary");
    }
    let t = t_len as f64;
    let norm = (bandwidth * t).powf(-0.5);
    let weights = (1..=t_len)
        .map(|i| norm * kernel.eval((i as f64 / t - u) / bandwidth))
        .collect();
    let scheme = WeightScheme::build(
        weights,
        WeightKind::KernelLocal {
            u,
            bandwidth,
            kernel,
        },
    )?;
    if scheme.d_t == 0 {
        return Err(Error::param(format!(
            "kernel window {u} +/- {bandwidth} contains no grid point t/T"
        )));
    }
    Ok(scheme)
}

/// The functions `f(s, x)` plugged into weighted statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    /// `cos(<s, x>)`
    Cos(Vec<f64>),
    /// `sin(<s, x>)`
    Sin(Vec<f64>),
    /// `|x|^2`
    Square,
    /// `|exp(i <s, x>) - center|`
    EcfModulusDiff { s: Vec<f64>, center: Complex64 },
}

impl Functional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Functional::Cos(s) => dot(s, x).cos(),
            Functional::Sin(s) => dot(s, x).sin(),
            Functional::Square => x.iter().map(|v| v * v).sum(),
            Functional::EcfModulusDiff { s, center } => {
                (Complex64::from_polar(1.0, dot(s, x)) - center).norm()
            }
        }
    }

    /// `sup |f| < infinity`; unbounded families need moment conditions instead.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, Functional::Square)
    }

    pub fn from_name(name: &str, s: &[f64]) -> Result<Self> {
        match name {
            "cos" => Ok(Functional::Cos(s.to_vec())),
            "sin" => Ok(Functional::Sin(s.to_vec())),
            "square" => Ok(Functional::Square),
            other => Err(Error::param(format!("unknown functional `{other}`"))),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let s_len = match self {
            Functional::Cos(s) | Functional::Sin(s) | Functional::EcfModulusDiff { s, .. } => {
                s.len()
            }
            Functional::Square => return Ok(()),
        };
        if s_len != dim {
            return Err(Error::ShapeMismatch(format!(
                "functional parameter has dimension {s_len}, path has {dim}"
            )));
        }
        Ok(())
    }

    /// `f(s, X_t)` for every `t`.
    pub fn values(&self, path: &Path) -> Result<Vec<f64>> {
        self.check_dim(path.dim())?;
        Ok((0..path.len()).map(|t| self.eval(path.at(t))).collect())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn check_lengths(path: &Path, weights: &WeightScheme) -> Result<()> {
    if path.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "path has T = {} but weights have length {}",
            path.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// `sum_t w_{t,T} f(s, X_{t,T})`, uncentred.
pub fn weighted_statistic(path: &Path, weights: &WeightScheme, f: &Functional) -> Result<f64> {
    check_lengths(path, weights)?;
    f.check_dim(path.dim())?;
    let range = weights.support();
    Ok(range
        .map(|t| {
            let w = weights.weights[t];
            if w == 0.0 {
                0.0
            } else {
                w * f.eval(path.at(t))
            }
        })
        .sum())
}

/// Local empirical characteristic function
/// `(b_T T)^{-1} sum_t K((t/T - u)/b_T) exp(i <s, X_{t,T}>)`.
pub fn local_ecf(path: &Path, weights: &WeightScheme, s: &[f64]) -> Result<Complex64> {
    check_lengths(path, weights)?;
    let WeightKind::KernelLocal { bandwidth, .. } = weights.kind else {
        return Err(Error::param("local_ecf needs kernel-local weights"));
    };
    if s.len() != path.dim() {
        return Err(Error::ShapeMismatch(format!(
            "s has dimension {}, path has {}",
            s.len(),
            path.dim()
        )));
    }
    // weights carry (b_T T)^{-1/2} K, so one more factor (b_T T)^{-1/2} normalises
    let norm = (bandwidth * path.len() as f64).powf(-0.5);
    let mut acc = Complex64::new(0.0, 0.0);
    for t in weights.support() {
        let w = weights.weights[t];
        if w > 0.0 {
            acc += w * Complex64::from_polar(1.0, dot(s, path.at(t)));
        }
    }
    Ok(acc * norm)
}

/// Kernel mass `(b_T T)^{-1} sum_t K(...)`, i.e. the local ECF at `s = 0`.
pub fn kernel_mass(weights: &WeightScheme) -> Result<f64> {
    let WeightKind::KernelLocal { bandwidth, .. } = weights.kind else {
        return Err(Error::param("kernel_mass needs kernel-local weights"));
    };
    let norm = (bandwidth * weights.len() as f64).powf(-0.5);
    Ok(norm * weights.weights.iter().sum::<f64>())
}

/// `RV = sum_t X_{t,T}^2` for a univariate path.
pub fn realized_volatility(path: &Path) -> Result<f64> {
    let x = path
        .scalars()
        .ok_or_else(|| Error::param("realized volatility needs a univariate path"))?;
    Ok(x.iter().map(|v| v * v).sum())
}

/// Characteristic function of the stationary AR(1) companion with
/// coefficient `a(u)` driven by symmetric stable noise of scale `gamma`:
/// `exp(-gamma^alpha |s|^alpha / (1 - |a(u)|^alpha))`.
pub fn true_cf_tvar1(
    u: f64,
    s: f64,
    a_fn: &dyn Fn(f64) -> f64,
    gamma: f64,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::param(format!(
            "alpha must lie in (0, 2], got {alpha}"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::param(format!("gamma must be > 0, got {gamma}")));
    }
    let a = a_fn(u).abs();
    if !(a < 1.0) {
        return Err(Error::param(format!("|a({u})| = {a} is not < 1")));
    }
    Ok((-gamma.powf(alpha) * s.abs().powf(alpha) / (1.0 - a.powf(alpha))).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_shapes() {
        assert_eq!(Kernel::Epanechnikov.eval(0.0), 0.75);
        assert_eq!(Kernel::Epanechnikov.eval(1.0), 0.0);
        assert_eq!(Kernel::Epanechnikov.eval(1.5), 0.0);
        assert_eq!(Kernel::Uniform.eval(1.0), 0.5);
        assert_eq!(Kernel::Uniform.eval(-1.01), 0.0);
    }

    #[test]
    fn epanechnikov_support_count() {
        let t_len = 2000usize;
        let b = (t_len as f64).powf(-0.4);
        let w = kernel_weights(0.4, b, t_len, Kernel::Epanechnikov).unwrap();
        let brute = (1..=t_len)
            .filter(|&t| (t as f64 / t_len as f64 - 0.4).abs() < b)
            .count();
        assert_eq!(w.d_t(), brute);
        assert!((w.d_t() as f64 - 2.0 * (t_len as f64).powf(0.6)).abs() < 3.0);
    }

    #[test]
    fn uniform_full_window() {
        let t_len = 100;
        let w = kernel_weights(0.5, 0.5, t_len, Kernel::Uniform).unwrap();
        assert_eq!(w.d_t(), t_len);
        let expected = (0.5 * t_len as f64).powf(-0.5) * 0.5;
        assert!(w.weights().iter().all(|&x| (x - expected).abs() < 1e-15));
    }

    #[test]
    fn kernel_mode_is_max_weight() {
        let t_len = 1000;
        let b = 0.1;
        let w = kernel_weights(0.3, b, t_len, Kernel::Epanechnikov).unwrap();
        let at_mode = w.weights()[299];
        assert!((at_mode - 0.75 * (b * t_len as f64).powf(-0.5)).abs() < 1e-15);
        assert!(w.weights().iter().all(|&x| x <= at_mode));
        assert!((w.c_w() - at_mode * (w.d_t() as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn kernel_window_outside_rejected() {
        assert!(kernel_weights(1.5, 0.2, 100, Kernel::Epanechnikov).is_err());
        assert!(kernel_weights(-0.3, 0.2, 100, Kernel::Epanechnikov).is_err());
        assert!(kernel_weights(0.5, 1.2, 100, Kernel::Epanechnikov).is_err());
        // a partial window is allowed
        assert!(kernel_weights(0.05, 0.1, 100, Kernel::Epanechnikov).is_ok());
    }

    #[test]
    fn ecf_of_constant_path() {
        let t_len = 500;
        let c = 0.7;
        let path = Path::from_scalars(vec![c; t_len]).unwrap();
        let w = kernel_weights(0.5, 0.1, t_len, Kernel::Epanechnikov).unwrap();
        let mass = kernel_mass(&w).unwrap();
        let s = 2.0;
        let ecf = local_ecf(&path, &w, &[s]).unwrap();
        let expected = Complex64::from_polar(mass, s * c);
        assert!((ecf - expected).norm() < 1e-12);
        let at_zero = local_ecf(&path, &w, &[0.0]).unwrap();
        assert_eq!(at_zero.im, 0.0);
        assert!((at_zero.re - mass).abs() < 1e-12);
    }

    #[test]
    fn rv_hand_values() {
        assert_eq!(
            realized_volatility(&Path::from_scalars(vec![0.0; 5]).unwrap()).unwrap(),
            0.0
        );
        assert_eq!(
            realized_volatility(&Path::from_scalars(vec![1.0; 10]).unwrap()).unwrap(),
            10.0
        );
        let p2 = Path::new(vec![1.0, 2.0], 2, "x", 0).unwrap();
        assert!(realized_volatility(&p2).is_err());
    }

    #[test]
    fn weighted_statistic_cases() {
        let path = Path::from_scalars(vec![0.5, -2.0, 3.0]).unwrap();
        let w = WeightScheme::from_values(vec![0.2, 0.3, 0.4]).unwrap();
        let cos0 = weighted_statistic(&path, &w, &Functional::Cos(vec![0.0])).unwrap();
        assert!((cos0 - 0.9).abs() < 1e-15);
        let point = WeightScheme::from_values(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(
            weighted_statistic(&path, &point, &Functional::Square).unwrap(),
            4.0
        );
        let short = WeightScheme::unit(2).unwrap();
        assert!(weighted_statistic(&path, &short, &Functional::Square).is_err());
        assert!(weighted_statistic(&path, &w, &Functional::Cos(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn global_root_square_is_scaled_rv() {
        let path = Path::from_scalars(vec![0.3, -1.2, 0.8, 2.0]).unwrap();
        let w = WeightScheme::global_root(4).unwrap();
        let stat = weighted_statistic(&path, &w, &Functional::Square).unwrap();
        let rv = realized_volatility(&path).unwrap();
        assert!((stat - rv / 2.0).abs() < 1e-14);
    }

    #[test]
    fn functional_families() {
        let x = [0.4];
        assert_eq!(Functional::Cos(vec![2.0]).eval(&x), 0.8f64.cos());
        assert_eq!(Functional::Sin(vec![2.0]).eval(&x), 0.8f64.sin());
        let f = Functional::EcfModulusDiff {
            s: vec![1.0],
            center: Complex64::new(0.0, 0.0),
        };
        assert!((f.eval(&x) - 1.0).abs() < 1e-15);
        assert!(f.is_bounded());
        assert!(!Functional::Square.is_bounded());
    }

    #[test]
    fn true_cf_cases() {
        let amp = |u: f64| 0.9 * (2.0 * std::f64::consts::PI * u).sin();
        assert_eq!(true_cf_tvar1(0.4, 0.0, &amp, 0.5, 1.5).unwrap(), 1.0);
        let zero = |_: f64| 0.0;
        let innov = true_cf_tvar1(0.4, 2.0, &zero, 0.5, 1.5).unwrap();
        assert!((innov - (-(0.5f64.powf(1.5)) * 2.0f64.powf(1.5)).exp()).abs() < 1e-15);
        let one = |_: f64| 1.0;
        assert!(true_cf_tvar1(0.4, 1.0, &one, 0.5, 1.5).is_err());
    }
}
