//! Closed-form error bounds and the parameter searches built on them.
//!
//! Every evaluator returns a [`BoundReport`] carrying the raw value of the
//! formula next to its clamp to `[0, 1]`; small parameters routinely give
//! raw values far above one and those are flagged as vacuous rather than
//! hidden. Values are computed in log space so that vacuous bounds such as
//! `10^24` stay representable. Natural logarithms throughout.

use std::collections::BTreeMap;
use std::f64::consts::E;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Theorem1,
    Theorem1Opt,
    Theorem2,
    Corollary2,
    Proposition2,
    RequiredK,
    RequiredL,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d: u32,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub big_d: Option<u32>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl BoundInputs {
    fn new(d: u32) -> Self {
        BoundInputs { d, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub formula: Formula,
    pub inputs: BoundInputs,
    /// Serialized as `null` when it overflows `f64`.
    #[serde(with = "nonfinite")]
    pub raw: f64,
    pub ln_raw: f64,
    pub clamped: f64,
    pub vacuous: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl BoundReport {
    fn from_ln(formula: Formula, inputs: BoundInputs, ln_raw: f64) -> Self {
        let raw = ln_raw.exp();
        BoundReport {
            formula,
            inputs,
            raw,
            ln_raw,
            clamped: raw.min(1.0),
            vacuous: raw >= 1.0,
            details: BTreeMap::new(),
        }
    }

    fn detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_owned(), value);
        self
    }
}

/// `f64` fields that may hold `+inf`, written as JSON `null`.
pub mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn check_d(d: u32) -> Result<()> {
    if d < 3 {
        return Err(Error::domain(format!("bounds need d >= 3, got {d}")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// `C1 = 2(d-2) / ((d-1) β(a, a))` with `a = (d-1)/(d-2)`.
pub fn c1(d: u32) -> f64 {
    let d = f64::from(d);
    let a = (d - 1.0) / (d - 2.0);
    2.0 * (d - 2.0) / (d - 1.0) * (-ln_beta(a, a)).exp()
}

/// Constant `C2` with `β(c1k, c2k)^{-1} <= C2 K^{1 + 1/(d-2)}` for every
/// `K >= 4`, from the Stirling bounds on the gamma function.
///
/// With `a = d/(d-2)` and `r = 1/(d-2)`:
/// `C2 = (8/7) e^{1/36} e^a (1 + (a-1)/4)^a (4/3)^r`.
/// The factors bound, in turn, the Stirling correction `e^{1/(12(K-1))}`,
/// `(1 + a/(K-1))^{K-1}`, `((K-1+a)/K)^a` and `(K/(K-1))^r`.
pub fn c2_stirling(d: u32) -> f64 {
    let d = f64::from(d);
    let a = d / (d - 2.0);
    let r = 1.0 / (d - 2.0);
    8.0 / 7.0 * (1.0f64 / 36.0).exp() * a.exp() * (1.0 + (a - 1.0) / 4.0).powf(a) * (4.0f64 / 3.0).powf(r)
}

/// The pieces of the `ψ` top-`K` bound at one `(d, K, η)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Terms {
    pub c1: f64,
    pub c2: f64,
    /// `C1 η^{1 + 1/(d-2)}`.
    pub first: f64,
    /// `K max_j (1-η)^{K-1+1/(d-2)} / ((K-1) β(K-1+j/(d-2), (d-j)/(d-2)))`,
    /// the union bound over the `K` candidates with the exact beta function,
    /// maximised over the unknown degree `j` of each candidate in `T_K`.
    pub second_exact: f64,
    /// `C2 K^{2 + 1/(d-2)} (1-η)^{K-1+1/(d-2)}`.
    pub second_stirling: f64,
}

impl Theorem1Terms {
    pub fn exact(&self) -> f64 {
        self.first + self.second_exact
    }

    pub fn stirling(&self) -> f64 {
        self.first + self.second_stirling
    }
}

fn check_theorem1(d: u32, k: u32) -> Result<()> {
    check_d(d)?;
    if k <= 3 {
        return Err(Error::domain(format!("the psi top-K bound needs K > 3, got {k}")));
    }
    Ok(())
}

pub fn theorem1_terms(d: u32, k: u32, eta: f64) -> Result<Theorem1Terms> {
    check_theorem1(d, k)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::domain(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(terms_unchecked(d, k, eta))
}

fn terms_unchecked(d: u32, k: u32, eta: f64) -> Theorem1Terms {
    let df = f64::from(d);
    let kf = f64::from(k);
    let r = 1.0 / (df - 2.0);
    let c1 = c1(d);
    let c2 = c2_stirling(d);
    let ln_tail = (kf - 1.0 + r) * (-eta).ln_1p();
    let worst = (1..d)
        .map(|j| {
            let j = f64::from(j);
            -ln_beta(kf - 1.0 + j * r, (df - j) * r)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Theorem1Terms {
        c1,
        c2,
        first: c1 * eta.powf(1.0 + r),
        second_exact: (kf.ln() - (kf - 1.0).ln() + worst + ln_tail).exp(),
        second_stirling: (c2.ln() + (2.0 + r) * kf.ln() + ln_tail).exp(),
    }
}

/// Bound on `P{1 outside the K smallest ψ}` at a fixed `η`. `raw` is the exact-sum variant; the
/// Stirling-constant variant is in `details["raw_stirling"]`.
pub fn bound_theorem1(d: u32, k: u32, eta: f64) -> Result<BoundReport> {
    let t = theorem1_terms(d, k, eta)?;
    let inputs = BoundInputs { k: Some(k), eta: Some(eta), ..BoundInputs::new(d) };
    Ok(theorem1_report(Formula::Theorem1, inputs, &t))
}

fn theorem1_report(formula: Formula, inputs: BoundInputs, t: &Theorem1Terms) -> BoundReport {
    BoundReport::from_ln(formula, inputs, t.exact().ln())
        .detail("c1", t.c1)
        .detail("c2", t.c2)
        .detail("first_term", t.first)
        .detail("second_term_exact", t.second_exact)
        .detail("second_term_stirling", t.second_stirling)
        .detail("raw_stirling", t.stirling())
}

const GOLDEN_TOLERANCE: f64 = 1e-6;

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// `bound_theorem1` (exact-sum variant) minimised over `η`. The bound is convex in
/// `η`, so golden-section search finds the minimiser; the result is also
/// compared with the grid `η ∈ {0.01, ..., 0.99}` and the better is kept.
pub fn bound_theorem1_opt(d: u32, k: u32) -> Result<(f64, BoundReport)> {
    check_theorem1(d, k)?;
    let f = |eta: f64| terms_unchecked(d, k, eta).exact();
    let mut eta = golden_section(f, 0.0, 1.0, GOLDEN_TOLERANCE);
    let (grid_eta, grid_min) = (1..100)
        .map(|i| f64::from(i) / 100.0)
        .map(|e| (e, f(e)))
        .fold((0.5, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    if grid_min < f(eta) {
        eta = grid_eta;
    }
    let t = terms_unchecked(d, k, eta);
    let inputs = BoundInputs { k: Some(k), eta: Some(eta), ..BoundInputs::new(d) };
    let report = theorem1_report(Formula::Theorem1Opt, inputs, &t)
        .detail("eta_star", eta)
        .detail("grid_min", grid_min);
    Ok((eta, report))
}

/// `ln of 7 exp(-(x/2) ln min{x(d-2)/(4e s ln x), x/(2s)})` with `s` the
/// extra scale (1 for a single vertex, `d^2` for a whole ball).
fn ln_distance_bound(d: u32, x: u32, scale: f64) -> f64 {
    let (d, x) = (f64::from(d), f64::from(x));
    let arg = (x * (d - 2.0) / (4.0 * E * scale * x.ln())).min(x / (2.0 * scale));
    7f64.ln() - x / 2.0 * arg.ln()
}

/// Bound on `P{φ(v) <= φ(1)}` for a host vertex at distance `ℓ`
/// from the source.
pub fn bound_theorem2(d: u32, ell: u32) -> Result<BoundReport> {
    check_d(d)?;
    if ell <= 1 {
        return Err(Error::domain(format!("the distance bound needs ell > 1, got {ell}")));
    }
    let inputs = BoundInputs { ell: Some(ell), ..BoundInputs::new(d) };
    Ok(BoundReport::from_ln(Formula::Theorem2, inputs, ln_distance_bound(d, ell, 1.0)))
}

fn check_radius(radius: u32) -> Result<()> {
    if radius < 2 {
        return Err(Error::domain(format!("the ball bound needs L >= 2, got {radius}")));
    }
    Ok(())
}

/// Bound on the probability that the source lies farther than
/// `L` from the rumor center.
pub fn bound_cor2(d: u32, radius: u32) -> Result<BoundReport> {
    check_d(d)?;
    check_radius(radius)?;
    let inputs = BoundInputs { radius: Some(radius), ..BoundInputs::new(d) };
    let scale = f64::from(d).powi(2);
    Ok(BoundReport::from_ln(Formula::Corollary2, inputs, ln_distance_bound(d, radius, scale)))
}

/// The ball bound with the larger degree `D`, for the
/// union of the balls of the two halves of a glued tree.
pub fn bound_prop2(d: u32, big_d: u32, radius: u32) -> Result<BoundReport> {
    check_d(d)?;
    if big_d <= d {
        return Err(Error::domain(format!("need d < D, got d = {d}, D = {big_d}")));
    }
    let mut report = bound_cor2(big_d, radius)?;
    report.formula = Formula::Proposition2;
    report.inputs = BoundInputs { big_d: Some(big_d), radius: Some(radius), ..BoundInputs::new(d) };
    Ok(report)
}

/// Result of a parameter search: the smallest `K` (or `L`) whose bound is at
/// most `ε`, with the sufficient closed form alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub formula: Formula,
    pub d: u32,
    pub eps: f64,
    pub value: u32,
    /// The bound at `value`.
    pub bound: BoundReport,
    /// The bound at `value - 1`, when that is still in the formula's domain.
    #[serde(default, with = "nonfinite_opt")]
    pub bound_below: Option<f64>,
    /// The sufficient value from the closed form; `null` if not finite.
    #[serde(with = "nonfinite")]
    pub closed_form: f64,
    /// Conditions the closed form relies on, each checked at the reported
    /// value.
    pub closed_form_checks: BTreeMap<String, bool>,
}

impl Threshold {
    /// True when every recorded condition of the closed form holds.
    pub fn closed_form_valid(&self) -> bool {
        self.closed_form_checks.values().all(|&ok| ok)
    }
}

mod nonfinite_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::nonfinite::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

const SEARCH_LIMIT: u32 = 1 << 30;

/// Smallest `K > 3` with `bound_theorem1_opt(d, K) <= ε`, by doubling and
/// then bisection.
///
/// The closed form is
/// `K = max{(2C1/ε) 12^{(d-1)/(d-2)}, (4/ε)(2C1)^{(d-2)/(d-1)}(2C2)^{1/(d-1)}}`,
/// which leans on `ε < 2C1`, `ln K <= K^{1/(d-1)}` and
/// `ln(2C2/ε) <= (2C2/ε)^{1/(d-1)}`. Those are checked, as is the bound
/// itself at the closed-form `K` with `η = (ε/(2C1))^{(d-2)/(d-1)}`.
pub fn required_k(d: u32, eps: f64) -> Result<Threshold> {
    check_d(d)?;
    check_eps(eps)?;
    let value_at = |k: u32| terms_at_opt(d, k);
    let mut hi = 4u32;
    while value_at(hi) > eps {
        if hi >= SEARCH_LIMIT {
            return Err(Error::domain(format!("no K below {SEARCH_LIMIT} reaches epsilon {eps}")));
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // bound(lo) > eps unless hi == 4
    if hi == 4 {
        lo = 3;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if value_at(mid) <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = hi;
    let (_, mut bound) = bound_theorem1_opt(d, k)?;
    bound.formula = Formula::RequiredK;
    bound.inputs.eps = Some(eps);
    let bound_below = (k > 4).then(|| value_at(k - 1));

    let df = f64::from(d);
    let (c1, c2) = (c1(d), c2_stirling(d));
    let p = (df - 2.0) / (df - 1.0);
    let k1 = 2.0 * c1 / eps * 12f64.powf(1.0 / p);
    let k2 = 4.0 / eps * (2.0 * c1).powf(p) * (2.0 * c2).powf(1.0 / (df - 1.0));
    let closed = k1.max(k2);
    let mut checks = BTreeMap::new();
    checks.insert("eps_below_2c1".to_owned(), eps < 2.0 * c1);
    checks.insert("log_k_below_root".to_owned(), closed.ln() <= closed.powf(1.0 / (df - 1.0)));
    let x = 2.0 * c2 / eps;
    checks.insert("log_c2_below_root".to_owned(), x.ln() <= x.powf(1.0 / (df - 1.0)));
    let direct = eps < 2.0 * c1 && closed < f64::from(u32::MAX) && {
        let eta = (eps / (2.0 * c1)).powf(p);
        terms_unchecked(d, closed.ceil() as u32, eta).stirling() <= eps
    };
    checks.insert("bound_holds_at_closed_form".to_owned(), direct);

    Ok(Threshold {
        formula: Formula::RequiredK,
        d,
        eps,
        value: k,
        bound,
        bound_below,
        closed_form: closed,
        closed_form_checks: checks,
    })
}

fn terms_at_opt(d: u32, k: u32) -> f64 {
    bound_theorem1_opt(d, k).map(|(_, r)| r.raw).unwrap_or(f64::INFINITY)
}

/// Smallest `L >= 2` with `bound_cor2(d, L) <= ε`, by a linear scan.
///
/// The closed form is
/// `L = max{C · 8 ln(7/ε) / ln(4 ln(7/ε)), 4 ln(7/ε) / ln(ln(7/ε)/d^2)}`
/// with `C = 16 e^2 d^4`; the second branch needs `ln(7/ε) > d^2` and is
/// dropped (and flagged) otherwise.
pub fn required_l(d: u32, eps: f64) -> Result<Threshold> {
    check_d(d)?;
    check_eps(eps)?;
    let ln_eps = eps.ln();
    let mut radius = 2u32;
    while ln_distance_bound(d, radius, f64::from(d).powi(2)) > ln_eps {
        radius += 1;
        if radius >= SEARCH_LIMIT {
            return Err(Error::domain(format!("no L below {SEARCH_LIMIT} reaches epsilon {eps}")));
        }
    }
    let mut bound = bound_cor2(d, radius)?;
    bound.formula = Formula::RequiredL;
    bound.inputs.eps = Some(eps);
    let bound_below = (radius > 2).then(|| bound_cor2(d, radius - 1).map(|r| r.raw).unwrap_or(f64::INFINITY));

    let df = f64::from(d);
    let big_c = 16.0 * E * E * df.powi(4);
    let log7 = (7.0 / eps).ln();
    let l1 = big_c * 8.0 * log7 / (4.0 * log7).ln();
    let l2_valid = log7 > df * df;
    let l2 = if l2_valid { 4.0 * log7 / (log7 / (df * df)).ln() } else { 0.0 };
    let closed = l1.max(l2);
    let mut checks = BTreeMap::new();
    checks.insert("second_branch_defined".to_owned(), l2_valid);
    let direct = closed < f64::from(u32::MAX)
        && ln_distance_bound(d, closed.ceil() as u32, df * df) <= ln_eps;
    checks.insert("bound_holds_at_closed_form".to_owned(), direct);

    Ok(Threshold {
        formula: Formula::RequiredL,
        d,
        eps,
        value: radius,
        bound,
        bound_below,
        closed_form: closed,
        closed_form_checks: checks,
    })
}
