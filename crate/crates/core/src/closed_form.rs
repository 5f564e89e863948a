//! Closed-form quantities of the biased walk on the random ladder tree.
//!
//! Everything here is a pure function of `(alpha, beta)` and is the ground
//! truth that the Monte Carlo harness is checked against. Regimes where a
//! quantity is infinite (the speed vanishing, `E[beta^F]` diverging) are
//! reported through [`Extended`] rather than raw floating infinities.

use serde::Serialize;

use crate::error::{domain, Result};

/// A value that is either finite or `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Extended {
    Finite(f64),
    Infinite,
}

impl Extended {
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Extended::Infinite)
    }

    /// Lossy conversion for output formats that have `inf`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ParamSource {
    C,
    Alpha,
}

/// Full experiment configuration: rung weight `c` (or `alpha`), bias `beta`
/// and the root seed. Exactly one of `c`/`alpha` is the user-provided source,
/// the other is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    c: f64,
    alpha: f64,
    beta: f64,
    seed: u64,
    source: ParamSource,
}

impl ModelParams {
    pub fn from_c(c: f64, beta: f64, seed: u64) -> Result<Self> {
        let alpha = alpha_from_c(c)?;
        check_beta(beta)?;
        Ok(ModelParams { c, alpha, beta, seed, source: ParamSource::C })
    }

    pub fn from_alpha(alpha: f64, beta: f64, seed: u64) -> Result<Self> {
        let c = c_from_alpha(alpha)?;
        check_beta(beta)?;
        Ok(ModelParams { c, alpha, beta, seed, source: ParamSource::Alpha })
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(ModelParams { beta, ..self })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ModelParams { seed, ..self }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source(&self) -> ParamSource {
        self.source
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("beta must be finite and >= 1, got {beta}")))
    }
}

fn check_alpha_beta(alpha: f64, beta: f64) -> Result<()> {
    check_alpha(alpha)?;
    check_beta(beta)
}

/// `alpha = c + 1 - sqrt(c^2 + 2c)`, evaluated as `1 / (c + 1 + sqrt(c^2 + 2c))`
/// (the two roots of `x^2 - 2(c+1)x + 1` multiply to one).
pub fn alpha_from_c(c: f64) -> Result<f64> {
    if !(c.is_finite() && c > 0.0) {
        return Err(domain(format!("c must be finite and positive, got {c}")));
    }
    Ok(1.0 / (c + 1.0 + (c * (c + 2.0)).sqrt()))
}

/// Inverse of [`alpha_from_c`]: `c = (1 - alpha)^2 / (2 alpha)`.
pub fn c_from_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 - alpha) * (1.0 - alpha) / (2.0 * alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalValues {
    /// Ballistic threshold `1/alpha`: the speed vanishes for `beta >= beta_c1`.
    pub beta_c1: f64,
    /// Second-moment threshold `1/sqrt(alpha)`.
    pub beta_c2: f64,
    /// Trap-time tail exponent `-ln(alpha)/ln(beta)`, when a bias was given.
    pub rho: Option<f64>,
}

pub fn critical_values(alpha: f64, beta: Option<f64>) -> Result<CriticalValues> {
    check_alpha(alpha)?;
    let rho = match beta {
        None => None,
        Some(b) => Some(tail_exponent(alpha, b)?),
    };
    Ok(CriticalValues { beta_c1: 1.0 / alpha, beta_c2: 1.0 / alpha.sqrt(), rho })
}

/// `rho = -ln(alpha) / ln(beta)`, undefined at `beta = 1`.
pub fn tail_exponent(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if beta == 1.0 {
        return Err(domain("the tail exponent is undefined at beta = 1"));
    }
    Ok(-alpha.ln() / beta.ln())
}

/// `s_+ = E[beta^F]` and `s_- = E[beta^-F]` for `F ~ Geom(1 - alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SBounds {
    pub s_plus: Extended,
    pub s_minus: f64,
}

pub fn s_bounds(alpha: f64, beta: f64) -> Result<SBounds> {
    check_alpha_beta(alpha, beta)?;
    let s_plus = if alpha * beta < 1.0 {
        Extended::Finite((1.0 - alpha) / (1.0 - alpha * beta))
    } else {
        Extended::Infinite
    };
    Ok(SBounds { s_plus, s_minus: s_minus(alpha, beta) })
}

#[inline]
fn s_minus(alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha) * beta / (beta - alpha)
}

/// `s_+ - s_- = alpha (1-alpha)(beta^2 - 1) / ((1 - alpha beta)(beta - alpha))`,
/// which avoids the cancellation of the naive difference near `beta = 1`.
#[inline]
fn s_gap(alpha: f64, beta: f64) -> f64 {
    alpha * (1.0 - alpha) * (beta * beta - 1.0) / ((1.0 - alpha * beta) * (beta - alpha))
}

/// Expected conductance to the left of a missing horizontal edge,
/// `C = 2b/(b-1) - (b - a)/(b - a^2)`.
pub fn weight_sum_c(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if beta == 1.0 {
        return Err(domain("the left conductance series diverges at beta = 1"));
    }
    let c = 2.0 * beta / (beta - 1.0) - (beta - alpha) / (beta - alpha * alpha);
    debug_assert!({
        let other = weight_sum_c_from_s_minus(alpha, beta);
        (c - other).abs() <= 1e-12 * c.abs()
    });
    Ok(c)
}

/// The same constant written through `s_-`: `2b/(b-1) - (1 - s_-/b)/(1 - s_-^2/b)`.
pub fn weight_sum_c_from_s_minus(alpha: f64, beta: f64) -> f64 {
    let sm = s_minus(alpha, beta);
    2.0 * beta / (beta - 1.0) - (1.0 - sm / beta) / (1.0 - sm * sm / beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum TrapKind {
    /// Dead end to the right of the point where the ray switches rows.
    A,
    /// Dead end to the left of the point where the ray has just switched rows.
    B,
    /// A rung hanging off a straight piece of ray, with arms on the far row.
    C,
}

impl TrapKind {
    pub fn label(self) -> &'static str {
        match self {
            TrapKind::A => "a",
            TrapKind::B => "b",
            TrapKind::C => "c",
        }
    }
}

impl std::str::FromStr for TrapKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(TrapKind::A),
            "b" | "B" => Ok(TrapKind::B),
            "c" | "C" => Ok(TrapKind::C),
            other => Err(domain(format!("unknown trap kind {other:?}"))),
        }
    }
}

/// Shape of a trap: `k` horizontal edges to the right, `l` to the left.
/// Kind (a) only has a right arm, kind (b) only a left arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct TrapShape {
    pub kind: TrapKind,
    pub k: u32,
    pub l: u32,
}

impl TrapShape {
    pub fn new(kind: TrapKind, k: i64, l: i64) -> Result<Self> {
        if k < 0 || l < 0 {
            return Err(domain(format!("trap arms must be non-negative, got k={k}, l={l}")));
        }
        let ok = match kind {
            TrapKind::A => k >= 1 && l == 0,
            TrapKind::B => l >= 1 && k == 0,
            TrapKind::C => true,
        };
        if !ok {
            return Err(domain(format!("invalid arms k={k}, l={l} for trap kind ({})", kind.label())));
        }
        let k = u32::try_from(k).map_err(|_| domain("arm too long"))?;
        let l = u32::try_from(l).map_err(|_| domain("arm too long"))?;
        Ok(TrapShape { kind, k, l })
    }

    /// Number of tree edges in the trap (the rung included for kind (c)).
    pub fn edge_count(&self) -> u64 {
        match self.kind {
            TrapKind::A => self.k as u64,
            TrapKind::B => self.l as u64,
            TrapKind::C => self.k as u64 + self.l as u64 + 1,
        }
    }
}

/// `sum_{j<n} beta^j`, continuous through `beta = 1`.
fn geometric_sum(beta: f64, n: u32) -> f64 {
    let h = beta - 1.0;
    if h == 0.0 {
        n as f64
    } else {
        (n as f64 * h.ln_1p()).exp_m1() / h
    }
}

/// Mean time spent in a trap before the walk takes its next step along the
/// ray, started at the trap's anchor; the final ray step is not counted.
pub fn trap_mean_time(shape: TrapShape, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let TrapShape { kind, k, l } = shape;
    Ok(match kind {
        // beta (beta^k - 1)/(beta - 1)
        TrapKind::A => beta * geometric_sum(beta, k),
        // (2 beta/(beta + 1)) (1 - beta^-l)/(beta - 1)
        TrapKind::B => 2.0 * beta / (beta + 1.0) * beta.powi(-(l as i32)) * geometric_sum(beta, l),
        // (2/(1 + beta)) (1 + beta/(beta - 1) (beta^k - beta^-l))
        TrapKind::C => {
            let right = geometric_sum(beta, k);
            let left = beta.powi(-(l as i32)) * geometric_sum(beta, l);
            2.0 / (1.0 + beta) * (1.0 + beta * (right + left))
        }
    })
}

/// Probability that a given rung belongs to the tree, `(1 - alpha)/(1 + alpha)`.
pub fn rung_density(alpha: f64) -> f64 {
    (1.0 - alpha) / (1.0 + alpha)
}

/// Kind (c) trap time averaged over independent `Geom(1 - alpha)` arms.
pub fn mean_trap_time_avg(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if alpha * beta >= 1.0 {
        return Err(domain(format!("mean trap time diverges for beta >= 1/alpha (beta={beta})")));
    }
    // beta/(beta - 1) (s_+ - s_-) with the (beta - 1) factor cancelled
    let scaled_gap =
        alpha * (1.0 - alpha) * beta * (beta + 1.0) / ((1.0 - alpha * beta) * (beta - alpha));
    Ok(2.0 / (beta + 1.0) * (1.0 + scaled_gap))
}

/// Speed on the tree whose ray never leaves one row.
pub fn speed_uniform(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if beta == 1.0 || alpha * beta >= 1.0 {
        return Ok(0.0);
    }
    let mean_trap = mean_trap_time_avg(alpha, beta)?;
    Ok((beta - 1.0) / (beta + 1.0) / (1.0 + rung_density(alpha) * mean_trap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedBreakdown {
    pub s_plus: Extended,
    pub s_minus: f64,
    /// Left conductance constant; undefined at `beta = 1`.
    pub big_c: Option<f64>,
    pub v_uniform: f64,
    /// Mean time for the ray projection to advance one column.
    pub e_tau1: Extended,
    pub v: f64,
}

/// Right-hand side of the speed formula, `1/v`, without any regime clamping.
/// Analytic in `beta` on `(alpha, 1) U (1, 1/alpha)`.
pub fn inverse_speed(alpha: f64, beta: f64) -> f64 {
    let p = rung_density(alpha);
    let sm = s_minus(alpha, beta);
    let c = 2.0 * beta / (beta - 1.0) - (beta - alpha) / (beta - alpha * alpha);
    let bm1 = beta - 1.0;
    (beta + 1.0) / bm1
        + p * ((beta + 3.0) / (2.0 * bm1)
            + beta * (beta + 1.0) / (bm1 * bm1) * s_gap(alpha, beta)
            + c * sm)
}

/// `v` continued analytically through `beta = 1` (zero there); used for
/// derivative checks.
pub fn speed_continued(alpha: f64, beta: f64) -> f64 {
    if beta == 1.0 {
        0.0
    } else {
        1.0 / inverse_speed(alpha, beta)
    }
}

/// `E_0[tau_1]` assembled from the uniform-ray part plus the correction for
/// crossing the origin block's rung when the missing edges alternate rows.
pub fn expected_tau1(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if beta == 1.0 || alpha * beta >= 1.0 {
        return Err(domain("E_0[tau_1] is infinite outside 1 < beta < 1/alpha"));
    }
    let p = rung_density(alpha);
    let sm = s_minus(alpha, beta);
    let sp = (1.0 - alpha) / (1.0 - alpha * beta);
    let c = weight_sum_c(alpha, beta)?;
    let r = beta / (beta - 1.0);
    let crossing = 0.5 * p * (1.0 + 2.0 * (c - r) * sm + 2.0 * r * sp);
    Ok(1.0 / speed_uniform(alpha, beta)? + crossing)
}

pub fn speed(alpha: f64, beta: f64) -> Result<SpeedBreakdown> {
    let sb = s_bounds(alpha, beta)?;
    let v_uniform = speed_uniform(alpha, beta)?;
    if beta == 1.0 || alpha * beta >= 1.0 {
        let big_c = if beta > 1.0 { Some(weight_sum_c(alpha, beta)?) } else { None };
        return Ok(SpeedBreakdown {
            s_plus: sb.s_plus,
            s_minus: sb.s_minus,
            big_c,
            v_uniform,
            e_tau1: Extended::Infinite,
            v: 0.0,
        });
    }
    let e_tau1 = expected_tau1(alpha, beta)?;
    let v = 1.0 / inverse_speed(alpha, beta);
    debug_assert!((1.0 / v - e_tau1).abs() <= 1e-10 * e_tau1);
    Ok(SpeedBreakdown {
        s_plus: sb.s_plus,
        s_minus: sb.s_minus,
        big_c: Some(weight_sum_c(alpha, beta)?),
        v_uniform,
        e_tau1: Extended::Finite(e_tau1),
        v,
    })
}

/// Block event `A_{a,b,k,sigma}`: the origin block has `F'_0 = a`, `F_0 = b`,
/// its rung at column `-k`, and `sigma = |W_1 - W_0|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BlockEvent {
    pub a: u32,
    pub b: u32,
    pub k: i64,
    pub sigma: u8,
}

impl BlockEvent {
    pub fn new(a: u32, b: u32, k: i64, sigma: u8) -> Result<Self> {
        if k < -(a as i64) || k > b as i64 {
            return Err(domain(format!("need -a <= k <= b, got a={a}, b={b}, k={k}")));
        }
        if sigma > 1 {
            return Err(domain(format!("sigma must be 0 or 1, got {sigma}")));
        }
        Ok(BlockEvent { a, b, k, sigma })
    }
}

/// `P[A_{a,b,k,sigma}] = (1/2) p (1-alpha)^2 alpha^(a+b)`, for `-a <= k <= b`.
pub fn block_probability(alpha: f64, a: u32, b: u32, k: i64, sigma: u8) -> Result<f64> {
    check_alpha(alpha)?;
    BlockEvent::new(a, b, k, sigma)?;
    Ok(0.5 * rung_density(alpha) * (1.0 - alpha).powi(2) * alpha.powf(a as f64 + b as f64))
}

/// Annealed `E_0[tau_1 | A_{a,b,k,sigma}]` from the three-case analysis of the
/// conductance to the left of the walker.
pub fn conditional_tau1(alpha: f64, beta: f64, event: BlockEvent) -> Result<f64> {
    check_alpha_beta(alpha, beta)?;
    if beta == 1.0 {
        return Err(domain("conditional passage time is infinite at beta = 1"));
    }
    let c = weight_sum_c(alpha, beta)?;
    let BlockEvent { a, b, k, sigma } = event;
    let (a, b) = (a as i32, b as i32);
    let k = i32::try_from(k).map_err(|_| domain("k out of range"))?;
    let bm1 = beta - 1.0;
    let r = beta / bm1;
    let f1 = 2.0 * (c / beta - 1.0 / bm1) * beta.powi(-a - k);
    let mut t = (beta + 1.0) / bm1 + f1;
    if k >= 0 {
        t += 2.0 * beta.powi(-k) * (1.0 / beta + (beta.powi(b) - beta.powi(-a)) / bm1);
    }
    if k == 0 && sigma == 1 {
        t += 1.0 + 2.0 * (c - r) * beta.powi(-a) + 2.0 * r * beta.powi(b);
    }
    Ok(t)
}

/// Variance of the unbiased walk's diffusive limit, `(1 + alpha)/(3 + alpha)`.
pub fn einstein_sigma2(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 + alpha) / (3.0 + alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RayStatistics {
    /// Limit of ray column over ray index.
    pub ray_ratio: f64,
    /// Mean holding time per ray vertex of the unbiased walk.
    pub holding_mean: f64,
}

pub fn ray_statistics(alpha: f64) -> Result<RayStatistics> {
    check_alpha(alpha)?;
    let ray_ratio = 2.0 * (1.0 + alpha) / (3.0 + alpha);
    Ok(RayStatistics { ray_ratio, holding_mean: 2.0 * ray_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallAlphaLimits {
    pub v_limit: f64,
    pub dv_dalpha_limit: f64,
}

/// Speed and its `alpha`-derivative as `alpha -> 0` (every rung present).
pub fn small_alpha_limits(beta: f64) -> Result<SmallAlphaLimits> {
    if !(beta.is_finite() && beta > 1.0) {
        return Err(domain(format!("beta must exceed 1, got {beta}")));
    }
    let d = 5.0 * beta + 7.0;
    Ok(SmallAlphaLimits {
        v_limit: 2.0 * (beta - 1.0) / d,
        dv_dalpha_limit: 4.0 * (beta - 1.0) * (beta + 1.0) * (3.0 - beta) / (d * d),
    })
}

/// `P[F = k]` for the gap variables `F, F' ~ Geom(1 - alpha)`.
pub fn geometric_pmf(alpha: f64, k: u64) -> f64 {
    (1.0 - alpha) * alpha.powf(k as f64)
}

/// Law of an interior block length `G = F + F' + 1`.
pub fn gap_pmf(alpha: f64, g: u64) -> f64 {
    if g == 0 {
        return 0.0;
    }
    g as f64 * (1.0 - alpha).powi(2) * alpha.powf(g as f64 - 1.0)
}

/// Size-biased law of the block covering the origin.
pub fn origin_gap_pmf(alpha: f64, g: u64) -> f64 {
    if g == 0 {
        return 0.0;
    }
    let g = g as f64;
    rung_density(alpha) * (1.0 - alpha).powi(2) * alpha.powf(g - 1.0) * g * g
}

#[cfg(test)]
mod tests {
    use super::*;

    const A_UST: f64 = 0.267_949_192_431_122_7; // 2 - sqrt(3)

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn alpha_from_c_values() {
        assert!(rel(alpha_from_c(1.0).unwrap(), 2.0 - 3f64.sqrt()) < 1e-15);
        assert!(alpha_from_c(1e6).unwrap() < 1e-3);
        let a = alpha_from_c(0.5).unwrap();
        assert!((a - 0.381_966_011_250_105).abs() < 1e-12);
        // alpha solves (c + 1 - alpha)^2 = c^2 + 2c
        assert!(((1.5 - a).powi(2) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn alpha_from_c_rejects_bad_input() {
        for c in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(alpha_from_c(c).is_err());
        }
    }

    #[test]
    fn alpha_decreasing_in_c() {
        let mut prev = 1.0;
        for i in 1..200 {
            let a = alpha_from_c(i as f64 * 0.1).unwrap();
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn c_alpha_roundtrip() {
        for c in [1e-3, 0.5, 1.0, 7.0, 1e4] {
            let a = alpha_from_c(c).unwrap();
            assert!(rel(c_from_alpha(a).unwrap(), c) < 1e-9);
        }
    }

    #[test]
    fn critical_values_examples() {
        let cv = critical_values(A_UST, None).unwrap();
        assert!(rel(cv.beta_c1, 2.0 + 3f64.sqrt()) < 1e-14);
        assert!((cv.beta_c2 - 1.931_851_652_578_136_6).abs() < 1e-12);
        assert!((cv.beta_c2 * cv.beta_c2 * A_UST - 1.0).abs() < 1e-14);
        let cv = critical_values(0.25, Some(2.0)).unwrap();
        assert_eq!(cv.rho, Some(2.0));
        assert!(critical_values(0.25, Some(1.0)).is_err());
    }

    #[test]
    fn rho_exceeds_two_iff_below_beta_c2() {
        let alpha: f64 = 0.3;
        let b2 = 1.0 / alpha.sqrt();
        for beta in [1.01, 1.5, b2 * 0.999, b2 * 1.001, 2.5, 3.3] {
            let rho = tail_exponent(alpha, beta).unwrap();
            assert_eq!(rho > 2.0, beta < b2, "beta={beta}");
        }
    }

    #[test]
    fn s_bounds_examples() {
        let s = s_bounds(0.3, 1.0).unwrap();
        assert_eq!(s.s_plus, Extended::Finite(1.0));
        assert!((s.s_minus - 1.0).abs() < 1e-15);
        assert!(s_bounds(0.5, 3.0).unwrap().s_plus.is_infinite());
        let s = s_bounds(0.5, 1.5).unwrap();
        assert!((s.s_plus.finite().unwrap() - 2.0).abs() < 1e-14);
        assert!((s.s_minus - 0.75).abs() < 1e-14);
        // partial sums of sum (1-a) a^k beta^(+-k)
        let (mut sp, mut sm) = (0.0, 0.0);
        for k in 0..=200 {
            sp += 0.5 * 0.5f64.powi(k) * 1.5f64.powi(k);
            sm += 0.5 * 0.5f64.powi(k) * 1.5f64.powi(-k);
        }
        assert!((sp - 2.0).abs() < 1e-10 && (sm - 0.75).abs() < 1e-12);
    }

    #[test]
    fn s_minus_below_one_below_s_plus() {
        for alpha in [0.1, 0.4, 0.8] {
            for beta in [1.0, 1.1, 0.9 / alpha] {
                let s = s_bounds(alpha, beta).unwrap();
                assert!(s.s_minus <= 1.0 + 1e-15);
                assert!(s.s_plus.finite().unwrap() >= 1.0 - 1e-15);
            }
        }
    }

    #[test]
    fn weight_sum_examples() {
        assert!(rel(weight_sum_c(0.5, 2.0).unwrap(), 22.0 / 7.0) < 1e-14);
        // 2b/(b-1) -> 2 and (b-a)/(b-a^2) -> 1
        let big = weight_sum_c(0.4, 1e6).unwrap();
        assert!(big > 0.999 && big < 1.001);
        let c1 = weight_sum_c(A_UST, 2.0).unwrap();
        assert!(rel(c1, weight_sum_c_from_s_minus(A_UST, 2.0)) < 1e-12);
        assert!(weight_sum_c(0.5, 1.0).is_err());
    }

    #[test]
    fn trap_mean_time_examples() {
        let a = |k| TrapShape::new(TrapKind::A, k, 0).unwrap();
        let b = |l| TrapShape::new(TrapKind::B, 0, l).unwrap();
        let c = |k, l| TrapShape::new(TrapKind::C, k, l).unwrap();
        assert_eq!(trap_mean_time(a(7), 1.0).unwrap(), 7.0);
        assert_eq!(trap_mean_time(b(4), 1.0).unwrap(), 4.0);
        assert_eq!(trap_mean_time(c(3, 2), 1.0).unwrap(), 6.0);
        assert!((trap_mean_time(a(3), 2.0).unwrap() - 14.0).abs() < 1e-12);
        assert!((trap_mean_time(c(0, 0), 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        // (4/3)(1 - 1/4) = 1
        assert!((trap_mean_time(b(2), 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trap_mean_time_matches_unsimplified_formulas() {
        for beta in [1.1f64, 1.5, 2.0, 3.0] {
            for k in 0..10i64 {
                for l in 0..10i64 {
                    let bk = beta.powi(k as i32);
                    let bl = beta.powi(-(l as i32));
                    let c = 2.0 / (1.0 + beta) * (1.0 + beta / (beta - 1.0) * (bk - bl));
                    let got = trap_mean_time(TrapShape::new(TrapKind::C, k, l).unwrap(), beta).unwrap();
                    assert!(rel(got, c) < 1e-12);
                    if k >= 1 {
                        let a = beta * (bk - 1.0) / (beta - 1.0);
                        let got = trap_mean_time(TrapShape::new(TrapKind::A, k, 0).unwrap(), beta).unwrap();
                        assert!(rel(got, a) < 1e-12);
                    }
                    if l >= 1 {
                        let b = 2.0 * beta / (beta + 1.0) * (1.0 - bl) / (beta - 1.0);
                        let got = trap_mean_time(TrapShape::new(TrapKind::B, 0, l).unwrap(), beta).unwrap();
                        assert!(rel(got, b) < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn trap_mean_time_continuous_at_one() {
        for (kind, k, l) in [(TrapKind::A, 5, 0), (TrapKind::B, 0, 6), (TrapKind::C, 4, 3)] {
            let s = TrapShape::new(kind, k, l).unwrap();
            let at_one = trap_mean_time(s, 1.0).unwrap();
            let above = trap_mean_time(s, 1.0 + 1e-8).unwrap();
            assert!((above - at_one).abs() < 1e-6, "{kind:?}: {above} vs {at_one}");
        }
    }

    #[test]
    fn trap_shape_validation() {
        assert!(TrapShape::new(TrapKind::A, -1, 0).is_err());
        assert!(TrapShape::new(TrapKind::A, 0, 0).is_err());
        assert!(TrapShape::new(TrapKind::B, 0, 0).is_err());
        assert!(TrapShape::new(TrapKind::C, 0, -2).is_err());
        assert!(TrapShape::new(TrapKind::C, 0, 0).is_ok());
    }

    #[test]
    fn mean_trap_time_examples() {
        assert!((mean_trap_time_avg(0.5, 1.0).unwrap() - 3.0).abs() < 1e-14);
        assert!((mean_trap_time_avg(0.5, 1.5).unwrap() - 3.8).abs() < 1e-13);
        // about 667.6 at beta = 0.999/alpha, and unbounded as beta -> 1/alpha
        assert!(mean_trap_time_avg(0.5, 0.999 / 0.5).unwrap() > 600.0);
        assert!(mean_trap_time_avg(0.5, 0.99999 / 0.5).unwrap() > 6e4);
        assert!(mean_trap_time_avg(0.5, 2.0).is_err());
    }

    #[test]
    fn mean_trap_time_is_double_series() {
        for (alpha, beta) in [(0.5f64, 1.0), (0.5, 1.5), (0.3, 2.5)] {
            let mut acc = 0.0;
            for k in 0..400i64 {
                for l in 0..400i64 {
                    let w = (1.0 - alpha).powi(2) * alpha.powi((k + l) as i32);
                    if w < 1e-300 {
                        continue;
                    }
                    let s = TrapShape::new(TrapKind::C, k, l).unwrap();
                    acc += w * trap_mean_time(s, beta).unwrap();
                }
            }
            assert!(rel(mean_trap_time_avg(alpha, beta).unwrap(), acc) < 1e-10);
        }
    }

    #[test]
    fn speed_uniform_examples() {
        assert_eq!(speed_uniform(0.5, 1.0).unwrap(), 0.0);
        assert_eq!(speed_uniform(0.5, 2.0).unwrap(), 0.0);
        assert_eq!(speed_uniform(0.5, 2.5).unwrap(), 0.0);
        let v = speed_uniform(0.5, 1.5).unwrap();
        assert!((v - 0.2 / (1.0 + 3.8 / 3.0)).abs() < 1e-15);
        assert!((v - 0.088_235_294_117_647).abs() < 1e-12);
    }

    #[test]
    fn speed_regimes() {
        let at_c1 = speed(0.25, 4.0).unwrap();
        assert_eq!(at_c1.v, 0.0);
        assert!(at_c1.e_tau1.is_infinite());
        let at_one = speed(0.25, 1.0).unwrap();
        assert_eq!(at_one.v, 0.0);
        assert_eq!(at_one.big_c, None);
        assert!(speed(0.25, 0.999 * 4.0).unwrap().v > 0.0);
    }

    #[test]
    fn speed_small_alpha() {
        let v = speed(1e-6, 3.0).unwrap().v;
        assert!((v - 2.0 / 11.0).abs() < 1e-4);
        let v = speed(1e-8, 3.0).unwrap().v;
        assert!((small_alpha_limits(3.0).unwrap().v_limit - v).abs() < 1e-6);
    }

    #[test]
    fn speed_breakdown_consistent() {
        let s = speed(A_UST, 2.0).unwrap();
        assert!(s.v > 0.0);
        let e = s.e_tau1.finite().unwrap();
        assert!(rel(1.0 / s.v, e) < 1e-12);
        assert!(s.big_c.unwrap() > 0.0);
        assert!(s.s_minus <= 1.0 && s.s_plus.finite().unwrap() >= 1.0);
    }

    #[test]
    fn block_probability_examples() {
        let p = block_probability(0.5, 0, 0, 0, 0).unwrap();
        assert!((p - 1.0 / 24.0).abs() < 1e-15);
        assert!(block_probability(0.5, 2, 1, 2, 0).is_err());
        assert!(block_probability(0.5, 2, 1, -3, 0).is_err());
        assert!(block_probability(0.5, 2, 1, 0, 2).is_err());
        let base = block_probability(0.3, 3, 2, -3, 0).unwrap();
        for k in -3..=2 {
            for s in 0..=1 {
                assert_eq!(block_probability(0.3, 3, 2, k, s).unwrap(), base);
            }
        }
    }

    #[test]
    fn block_probability_total_mass() {
        for (alpha, cut) in [(0.1, 60u32), (0.5, 60), (0.7, 200)] {
            let mut total = 0.0;
            for a in 0..=cut {
                for b in 0..=cut {
                    // (a + b + 1) values of k, two of sigma
                    total += 2.0 * (a + b + 1) as f64 * block_probability(alpha, a, b, 0, 0).unwrap();
                }
            }
            assert!((total - 1.0).abs() < 1e-10, "alpha={alpha}: {total}");
        }
    }

    #[test]
    fn einstein_sigma2_examples() {
        assert!((einstein_sigma2(A_UST).unwrap() - 0.387_995_381_130_102).abs() < 1e-12);
        assert!((einstein_sigma2(1e-12).unwrap() - 1.0 / 3.0).abs() < 1e-11);
        assert!((einstein_sigma2(1.0 / 3.0).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn einstein_is_twice_slope_at_one() {
        let h = 1e-5;
        for alpha in [0.05, 1.0 / 3.0, A_UST, 0.6, 0.9] {
            let d = (speed_continued(alpha, 1.0 + h) - speed_continued(alpha, 1.0 - h)) / (2.0 * h);
            let s2 = einstein_sigma2(alpha).unwrap();
            assert!((2.0 * d - s2).abs() < 1e-6 * s2, "alpha={alpha}: {} vs {s2}", 2.0 * d);
        }
    }

    #[test]
    fn ray_statistics_examples() {
        let r = ray_statistics(A_UST).unwrap();
        assert!((r.ray_ratio - 0.775_990_762_260_204).abs() < 1e-12);
        assert!((r.holding_mean - 1.551_981_524_520_408).abs() < 1e-12);
        assert_eq!(r.holding_mean, 2.0 * r.ray_ratio);
        assert!((ray_statistics(1.0 - 1e-12).unwrap().ray_ratio - 1.0).abs() < 1e-11);
    }

    #[test]
    fn small_alpha_limit_examples() {
        let l3 = small_alpha_limits(3.0).unwrap();
        assert_eq!(l3.dv_dalpha_limit, 0.0);
        assert!((l3.v_limit - 2.0 / 11.0).abs() < 1e-15);
        let l2 = small_alpha_limits(2.0).unwrap();
        assert!((l2.dv_dalpha_limit - 12.0 / 289.0).abs() < 1e-15);
        // central difference of the closed form near alpha = 0
        let (a, h) = (1e-5, 1e-6);
        let d = (speed(a + h, 2.0).unwrap().v - speed(a - h, 2.0).unwrap().v) / (2.0 * h);
        assert!((d - 12.0 / 289.0).abs() < 1e-3, "{d}");
        assert!(small_alpha_limits(1.0).is_err());
    }

    #[test]
    fn conditional_tau1_cases() {
        let (alpha, beta) = (0.5, 1.5);
        let c = weight_sum_c(alpha, beta).unwrap();
        let base = (beta + 1.0) / (beta - 1.0);
        // Case 1: k = -1, a = 2 -> beta^(-1)
        let e = BlockEvent::new(2, 1, -1, 0).unwrap();
        let want = base + 2.0 * (c / beta - 1.0 / (beta - 1.0)) * beta.powi(-1);
        assert!(rel(conditional_tau1(alpha, beta, e).unwrap(), want) < 1e-14);
        // sigma only matters at k = 0
        let e0 = conditional_tau1(alpha, beta, BlockEvent::new(1, 1, 0, 0).unwrap()).unwrap();
        let e1 = conditional_tau1(alpha, beta, BlockEvent::new(1, 1, 0, 1).unwrap()).unwrap();
        let f3 = 1.0 + 2.0 * (c - 3.0) / 1.5 + 2.0 * 3.0 * 1.5;
        assert!(rel(e1 - e0, f3) < 1e-13);
        let k1 = conditional_tau1(alpha, beta, BlockEvent::new(1, 1, 1, 0).unwrap()).unwrap();
        let k1s = conditional_tau1(alpha, beta, BlockEvent::new(1, 1, 1, 1).unwrap()).unwrap();
        assert_eq!(k1, k1s);
    }

    #[test]
    fn laws_normalize() {
        let alpha = 0.6;
        let g: f64 = (0..2000).map(|k| geometric_pmf(alpha, k)).sum();
        let gap: f64 = (1..2000).map(|k| gap_pmf(alpha, k)).sum();
        let origin: f64 = (1..2000).map(|k| origin_gap_pmf(alpha, k)).sum();
        for s in [g, gap, origin] {
            assert!((s - 1.0).abs() < 1e-12, "{s}");
        }
        let mean_gap: f64 = (1..2000).map(|k| k as f64 * gap_pmf(alpha, k)).sum();
        assert!(rel(mean_gap, (1.0 + alpha) / (1.0 - alpha)) < 1e-12);
    }
}
