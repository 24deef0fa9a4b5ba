//! Globally adaptive Gauss-Kronrod integration (10-point Gauss embedded in
//! the 21-point Kronrod rule, exact for polynomials of degree 31 per panel).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::AnalysisError;

/// Tolerances for the adaptive integrator and the upper gain cutoff used
/// when integrating over the fading distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Gain beyond which the exponential tail is dropped (`e^-h_up` bound).
    pub upper_gain_cutoff: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            upper_gain_cutoff: 50.0,
        }
    }
}

impl QuadratureSettings {
    pub(crate) fn check(&self) -> Result<(), AnalysisError> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(AnalysisError::InvalidSettings(
                "rel_tol and abs_tol must be > 0".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(AnalysisError::InvalidSettings(
                "max_subdivisions must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208606327069,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);

    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut abs_sum = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let abs_sum = abs_sum * half.abs();
    let asc = asc * half.abs();
    let error = rescale_error((kronrod - gauss) * half, abs_sum, asc);
    Panel { lo, hi, value, error }
}

// QUADPACK's heuristic: the raw |K - G| difference grossly overestimates
// the error of the Kronrod result on smooth panels.
fn rescale_error(err: f64, abs_sum: f64, asc: f64) -> f64 {
    let mut err = err.abs();
    if asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / asc).powf(1.5);
        err = if scale < 1.0 { asc * scale } else { asc };
    }
    if abs_sum > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_sum);
    }
    err
}

/// Integrates `f` over `[lo, hi]` until the summed error estimate drops to
/// `max(abs_tol, rel_tol * |value|)`, bisecting the worst panel each step.
pub fn integrate_adaptive<F>(
    f: F,
    lo: f64,
    hi: f64,
    q: &QuadratureSettings,
) -> Result<Integral, AnalysisError>
where
    F: Fn(f64) -> f64,
{
    q.check()?;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(AnalysisError::InvalidSettings(format!(
            "integration bounds must satisfy lo < hi, got [{lo}, {hi}]"
        )));
    }

    let mut heap = BinaryHeap::new();
    heap.push(gk21(&f, lo, hi));
    loop {
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(AnalysisError::QuadratureNonConvergence {
                lo,
                hi,
                estimate: value,
                error,
                subdivisions: heap.len(),
            });
        }
        if error <= q.abs_tol.max(q.rel_tol * value.abs()) {
            return Ok(Integral {
                value,
                error,
                subdivisions: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if heap.len() + 2 > q.max_subdivisions || !(worst.lo < mid && mid < worst.hi) {
            heap.push(worst);
            return Err(AnalysisError::QuadratureNonConvergence {
                lo,
                hi,
                estimate: value,
                error,
                subdivisions: heap.len(),
            });
        }
        heap.push(gk21(&f, worst.lo, mid));
        heap.push(gk21(&f, mid, worst.hi));
    }
}
