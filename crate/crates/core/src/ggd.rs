//! Generalized Gaussian source family.
//!
//! The density is parameterized by a shape `alpha` and variance `sigma2`
//! (the mean is fixed at zero throughout):
//!
//! ```text
//! f(x) = alpha * eta / (2 * Gamma(1/alpha)) * exp(-(eta * |x|)^alpha)
//! ```
//!
//! where `eta` couples shape and variance so that the second moment is
//! exactly `sigma2`. `alpha = 1` is the Laplacian, `alpha = 2` the Gaussian,
//! and `alpha -> inf` tends to the uniform density.
//!
//! # Example
//!
//! ```
//! use ezzq::ggd::GgdParams;
//!
//! let p = GgdParams::new(1.0, 1.0).unwrap();
//! let xs = p.sample(40_000, 7);
//! let est = ezzq::ggd::estimate_params(&xs).unwrap();
//! assert!((est.params.alpha() - 1.0).abs() < 0.05);
//! ```

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

/// Smallest shape the estimator will report. Below this the central spike
/// of the density is too sharp for double-precision moment work.
pub const ALPHA_MIN: f64 = 0.1;
/// Largest shape the estimator will report. The moment ratio flattens
/// toward its uniform-limit value of 4/3 beyond this.
pub const ALPHA_MAX: f64 = 10.0;

const RATIO_TOL: f64 = 1e-9;
const BISECT_MAX_ITERS: usize = 200;

/// Shape/variance pair describing one generalized Gaussian source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdParams {
    alpha: f64,
    sigma2: f64,
}

/// Raw second and first absolute moments backing a parameter estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    /// Mean of `x^2` (the data is treated as zero-mean).
    pub sigma2_hat: f64,
    /// Mean of `|x|`.
    pub mu_hat: f64,
    /// Number of samples the moments were taken over.
    pub n: usize,
}

/// Result of [`estimate_params`]: fitted parameters plus the moments they
/// came from, with a flag recording whether the shape hit a clamp bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamEstimate {
    pub params: GgdParams,
    pub moments: MomentEstimates,
    /// True when the moment ratio fell outside what shapes in
    /// `[ALPHA_MIN, ALPHA_MAX]` can produce and the result was clamped.
    pub clamped: bool,
}

/// Mass and centroid of the density over one interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub mass: f64,
    pub centroid: f64,
}

/// Ratio `E[x^2] / E[|x|]^2` as a function of shape alone:
/// `Gamma(1/a) * Gamma(3/a) / Gamma(2/a)^2`. Strictly decreasing in `a`,
/// approaching 4/3 in the uniform limit.
pub fn moment_ratio(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let a = alpha;
    Ok((ln_gamma(1.0 / a) + ln_gamma(3.0 / a) - 2.0 * ln_gamma(2.0 / a)).exp())
}

/// Inverse scale `eta(alpha, sigma) = sqrt(Gamma(3/alpha)/Gamma(1/alpha)) / sigma`.
pub fn eta(alpha: f64, sigma: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok((0.5 * (ln_gamma(3.0 / alpha) - ln_gamma(1.0 / alpha))).exp() / sigma)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && (ALPHA_MIN..=ALPHA_MAX).contains(&alpha)) {
        return Err(Error::domain(format!(
            "alpha must lie in [{ALPHA_MIN}, {ALPHA_MAX}], got {alpha}"
        )));
    }
    Ok(())
}

impl GgdParams {
    /// Validates `alpha` in `[ALPHA_MIN, ALPHA_MAX]` and `sigma2 > 0`.
    pub fn new(alpha: f64, sigma2: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::domain(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        Ok(GgdParams { alpha, sigma2 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// The location parameter; fixed at zero for this source family.
    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn eta(&self) -> f64 {
        eta(self.alpha, self.sigma()).expect("validated at construction")
    }

    /// Normalization constant `alpha * eta / (2 * Gamma(1/alpha))`, which is
    /// also the density's value at the mode.
    fn norm(&self) -> f64 {
        let a = self.alpha;
        (a.ln() + self.eta().ln() - std::f64::consts::LN_2 - ln_gamma(1.0 / a)).exp()
    }

    /// Density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        let u = (self.eta() * x.abs()).powf(self.alpha);
        self.norm() * (-u).exp()
    }

    /// Differential entropy in bits:
    /// `-log2(alpha*eta/(2*Gamma(1/alpha))) + log2(e)/alpha`.
    pub fn differential_entropy(&self) -> f64 {
        -self.norm().log2() + std::f64::consts::LOG2_E / self.alpha
    }

    /// Exponent argument `(eta * x)^alpha` for `x >= 0`.
    fn u_of(&self, x: f64) -> f64 {
        (self.eta() * x).powf(self.alpha)
    }

    /// Moments of the density restricted to `[lo, hi)` on the positive axis:
    /// `(mass, first, second)` as plain integrals (not conditional values).
    /// `hi` may be infinite. Requires `0 <= lo < hi`.
    pub(crate) fn half_moments(&self, lo: f64, hi: f64) -> (f64, f64, f64) {
        debug_assert!(lo >= 0.0 && hi > lo);
        let a = self.alpha;
        let u_lo = self.u_of(lo);
        let u_hi = if hi.is_finite() { self.u_of(hi) } else { f64::INFINITY };
        let m0 = 0.5 * reg_diff(1.0 / a, u_lo, u_hi);
        let c1 = (ln_gamma(2.0 / a) - ln_gamma(1.0 / a) - std::f64::consts::LN_2
            - self.eta().ln())
        .exp();
        let m1 = c1 * reg_diff(2.0 / a, u_lo, u_hi);
        let m2 = 0.5 * self.sigma2 * reg_diff(3.0 / a, u_lo, u_hi);
        (m0, m1, m2)
    }

    /// Probability mass and centroid of `[lo, hi)`. Either bound may be
    /// infinite. If the interval's mass underflows to zero the centroid
    /// falls back to the midpoint (or the finite edge for half-lines).
    pub fn cell_stats(&self, lo: f64, hi: f64) -> Result<CellStats> {
        if !(lo < hi) {
            return Err(Error::domain(format!("empty cell [{lo}, {hi})")));
        }
        // Mirror cells on the negative axis; split cells spanning zero.
        let (mass, first) = if lo >= 0.0 {
            let (m0, m1, _) = self.half_moments(lo, hi);
            (m0, m1)
        } else if hi <= 0.0 {
            let (m0, m1, _) = self.half_moments(-hi, -lo);
            (m0, -m1)
        } else {
            let (m0n, m1n, _) = self.half_moments(0.0, -lo);
            let (m0p, m1p, _) = self.half_moments(0.0, hi);
            (m0n + m0p, m1p - m1n)
        };
        if mass <= 0.0 {
            let centroid = if lo.is_infinite() {
                hi
            } else if hi.is_infinite() {
                lo
            } else {
                0.5 * (lo + hi)
            };
            return Ok(CellStats { mass: 0.0, centroid });
        }
        let mut centroid = first / mass;
        // Guard against rounding pushing the ratio just outside the cell.
        if centroid < lo {
            centroid = lo;
        } else if hi.is_finite() && centroid > hi {
            centroid = hi;
        }
        Ok(CellStats { mass, centroid })
    }

    /// Two-sided tail mass `P(|X| >= x)`.
    pub fn tail_mass(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        reg_upper(1.0 / self.alpha, self.u_of(x))
    }

    /// Two-sided tail second moment `E[X^2; |X| >= x]` (absolute, not a
    /// fraction). Divide by `sigma2` for the fraction of variance out there.
    pub fn tail_second_moment(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        self.sigma2 * reg_upper(3.0 / self.alpha, self.u_of(x))
    }

    /// Magnitude `m` with `P(|X| > m) = q`, found by bisection on the
    /// monotone tail mass.
    pub fn abs_quantile(&self, q: f64) -> Result<f64> {
        if !(0.0 < q && q < 1.0) {
            return Err(Error::domain(format!("quantile level {q} outside (0, 1)")));
        }
        let mut hi = self.sigma();
        let mut doublings = 0;
        while self.tail_mass(hi) > q {
            hi *= 2.0;
            doublings += 1;
            if doublings > 200 {
                return Err(Error::domain(format!("quantile level {q} too small")));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.tail_mass(mid) > q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Draws `n` samples deterministically from the given seed. Magnitudes
    /// come from a Gamma(1/alpha) draw raised to `1/alpha` and divided by
    /// `eta`; signs are independent fair flips.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = Gamma::new(1.0 / self.alpha, 1.0).expect("valid shape");
        let inv_alpha = 1.0 / self.alpha;
        let inv_eta = 1.0 / self.eta();
        (0..n)
            .map(|_| {
                let w: f64 = gamma.sample(&mut rng);
                let mag = w.powf(inv_alpha) * inv_eta;
                if rng.gen::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    }
}

/// Regularized-gamma mass of `(u_lo, u_hi]` for shape `a`, choosing the
/// better-conditioned side of the incomplete-gamma pair.
fn reg_diff(a: f64, u_lo: f64, u_hi: f64) -> f64 {
    let d = if reg_lower(a, u_lo) > 0.5 {
        reg_upper(a, u_lo) - reg_upper(a, u_hi)
    } else {
        reg_lower(a, u_hi) - reg_lower(a, u_lo)
    };
    d.max(0.0)
}

fn reg_lower(a: f64, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u.is_infinite() {
        1.0
    } else {
        gamma_lr(a, u)
    }
}

fn reg_upper(a: f64, u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u.is_infinite() {
        0.0
    } else {
        gamma_ur(a, u)
    }
}

/// Fits shape and variance by the method of moments: `sigma2_hat = mean(x^2)`,
/// `mu_hat = mean(|x|)`, then the shape solves
/// `moment_ratio(alpha) = sigma2_hat / mu_hat^2` by bisection on a log grid.
/// Ratios outside the representable band clamp to `ALPHA_MIN` / `ALPHA_MAX`
/// and set the `clamped` flag.
pub fn estimate_params(samples: &[f64]) -> Result<ParamEstimate> {
    if samples.len() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 samples, got {}",
            samples.len()
        )));
    }
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    for &x in samples {
        if !x.is_finite() {
            return Err(Error::domain(format!("non-finite sample {x}")));
        }
        sum_sq += x * x;
        sum_abs += x.abs();
    }
    let n = samples.len();
    let sigma2_hat = sum_sq / n as f64;
    let mu_hat = sum_abs / n as f64;
    if mu_hat == 0.0 {
        return Err(Error::degenerate("all samples are zero"));
    }
    let moments = MomentEstimates { sigma2_hat, mu_hat, n };
    let ratio = sigma2_hat / (mu_hat * mu_hat);

    let ratio_min_alpha = moment_ratio(ALPHA_MIN)?;
    let ratio_max_alpha = moment_ratio(ALPHA_MAX)?;
    let (alpha, clamped) = if ratio >= ratio_min_alpha {
        (ALPHA_MIN, true)
    } else if ratio <= ratio_max_alpha {
        (ALPHA_MAX, true)
    } else {
        let mut lo = ALPHA_MIN.ln();
        let mut hi = ALPHA_MAX.ln();
        let mut mid = 0.5 * (lo + hi);
        for _ in 0..BISECT_MAX_ITERS {
            mid = 0.5 * (lo + hi);
            let r = moment_ratio(mid.exp())?;
            if (r - ratio).abs() < RATIO_TOL {
                break;
            }
            // moment_ratio decreases in alpha.
            if r > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (mid.exp(), false)
    };

    Ok(ParamEstimate {
        params: GgdParams::new(alpha, sigma2_hat)?,
        moments,
        clamped,
    })
}
