//! Closed-form constants, sequences and bounds controlling the probability
//! that the truncated Euler iterate is non-positive.
//!
//! Everything here is deterministic and cheap except the truncated Hurwitz
//! zeta sum, which adds a million terms.

use crate::error::{Error, Result};
use crate::model::CirParams;
use crate::summation::CompensatedSum;

/// Slack constant of the negativity bound.
pub const EPSILON: f64 = 0.002;

/// Absolute bisection tolerance for [`nu_bar`].
pub const NU_BAR_TOLERANCE: f64 = 1e-10;

/// Upper end of the ν̄ bisection bracket.
pub const NU_BAR_UPPER: f64 = 0.5;

/// Largest sequence length accepted by the streaming sequence API.
pub const MAX_SEQUENCE_LEN: usize = 10_000_000;

/// Largest sequence length returned as a materialised `Vec`.
pub const MAX_MATERIALIZED_LEN: usize = 100_000;

/// Terms in the truncated Hurwitz zeta sum.
pub const ZETA_TERMS: usize = 1_000_000;

/// Feller-ratio dependent constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerDerived {
    pub nu: f64,
    pub nu_bar: f64,
    /// `φ_ν = 1 − ν̄/ν`
    pub phi_nu: f64,
    /// `η_ν = (ν − ν̄)(4ν̄ ∨ ν)/(ν ν̄)`
    pub eta_nu: f64,
    pub epsilon: f64,
}

/// Left-hand side `(4x ∨ ν)(ν − x)/(ν x (ν − x − 1))` of the defining
/// inequality of ν̄.
pub fn nu_bar_lhs(x: f64, nu: f64) -> f64 {
    (4.0 * x).max(nu) * (nu - x) / (nu * x * (nu - x - 1.0))
}

/// Right-hand side `1.99 √(νπ) e^{ν/2} − 1`.
pub fn nu_bar_rhs(nu: f64) -> f64 {
    1.99 * (nu * std::f64::consts::PI).sqrt() * (0.5 * nu).exp() - 1.0
}

/// `ν̄ = inf{x > 0 : lhs(x) < rhs(ν)}` for `ν > 2`, by bisection.
///
/// The returned root is checked to be a genuine infimum: the inequality
/// fails just below it and on a scan of the interval below it, and holds
/// just above it. A failed check is reported as an error.
pub fn nu_bar(nu: f64) -> Result<f64> {
    if !(nu.is_finite() && nu > 2.0) {
        return Err(Error::param("nu", nu, "nu-bar requires nu > 2"));
    }
    let rhs = nu_bar_rhs(nu);
    if !rhs.is_finite() {
        return Err(Error::param("nu", nu, "e^{nu/2} overflows"));
    }
    // x = 1/2 keeps 4x ≤ ν and stays clear of the pole at ν − 1
    let mut hi = NU_BAR_UPPER.min(nu - 1.0 - 1e-9);
    if !(nu_bar_lhs(hi, nu) < rhs) {
        return Err(Error::RootNotBracketed {
            nu,
            detail: format!("inequality fails at the upper end x = {hi}"),
        });
    }
    // for large ν the root sits below the nominal lower end
    let mut lo = 1e-12;
    while nu_bar_lhs(lo, nu) < rhs {
        lo *= 1e-6;
        if lo < 1e-290 {
            return Err(Error::RootNotBracketed {
                nu,
                detail: "no lower bracket above 1e-290".into(),
            });
        }
    }
    let tol = NU_BAR_TOLERANCE.min(1e-3 * hi);
    for _ in 0..4096 {
        if hi - lo <= tol.min(1e-6 * hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if nu_bar_lhs(mid, nu) < rhs {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = hi;
    verify_infimum(nu, root, rhs)?;
    Ok(root)
}

fn verify_infimum(nu: f64, root: f64, rhs: f64) -> Result<()> {
    let h = 1e-8_f64.min(0.5 * root);
    let below = nu_bar_lhs(root - h, nu);
    let above = nu_bar_lhs(root + h, nu);
    if !(below >= rhs && rhs >= above) {
        return Err(Error::RootNotBracketed {
            nu,
            detail: format!(
                "lhs({}) = {below}, lhs({}) = {above}, rhs = {rhs}",
                root - h,
                root + h
            ),
        });
    }
    const SCAN: usize = 10_000;
    let upper = root - h;
    for i in 1..=SCAN {
        let x = upper * i as f64 / SCAN as f64;
        if nu_bar_lhs(x, nu) < rhs {
            return Err(Error::RootNotBracketed {
                nu,
                detail: format!("inequality already holds at x = {x} below the root {root}"),
            });
        }
    }
    Ok(())
}

/// ν̄, φ_ν and η_ν for `ν > 2`.
pub fn derived_constants(nu: f64) -> Result<FellerDerived> {
    let nu_bar = nu_bar(nu)?;
    Ok(FellerDerived {
        nu,
        nu_bar,
        phi_nu: 1.0 - nu_bar / nu,
        eta_nu: (nu - nu_bar) * (4.0 * nu_bar).max(nu) / (nu * nu_bar),
        epsilon: EPSILON,
    })
}

/// `α_N = (1 − kT/N)/2`, defined for `N > kT`.
pub fn alpha_n(k: f64, horizon: f64, steps: usize) -> Result<f64> {
    let kt = k * horizon;
    if !(steps as f64 > kt) {
        return Err(Error::InvalidSteps {
            steps,
            reason: "alpha_N requires N > kT",
        });
    }
    Ok(0.5 * (1.0 - kt / steps as f64))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::param("alpha", alpha, "must lie in (0, 0.5)"));
    }
    Ok(())
}

fn check_len(steps: usize, cap: usize) -> Result<()> {
    if steps > cap {
        return Err(Error::InvalidSteps {
            steps,
            reason: "sequence length exceeds the supported cap",
        });
    }
    Ok(())
}

/// One index of the `c` and `a` sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceTerm {
    pub j: usize,
    pub c: f64,
    /// `a_j` from its own recursion.
    pub a: f64,
    /// `a_j = 2(α − c_j)/(ξ²δt)`.
    pub a_transform: f64,
}

/// Streams `c_j`, `a_j` for `j = 0..=N`:
///
/// ```text
/// c_0 = α, c_1 = α − α²,        c_{j+1} = c_j² + α − α²
/// a_0 = 0, a_1 = 2α²/(ξ²δt),    a_{j+1} = 2α a_j − ½ a_j² ξ² δt
/// ```
#[derive(Debug, Clone)]
pub struct SequenceIter {
    alpha: f64,
    scale: f64,
    steps: usize,
    next_j: usize,
    c: f64,
    a: f64,
}

impl Iterator for SequenceIter {
    type Item = SequenceTerm;

    fn next(&mut self) -> Option<SequenceTerm> {
        let j = self.next_j;
        if j > self.steps {
            return None;
        }
        let alpha = self.alpha;
        match j {
            0 => {
                self.c = alpha;
                self.a = 0.0;
            }
            1 => {
                self.c = alpha - alpha * alpha;
                self.a = 2.0 * alpha * alpha / self.scale;
            }
            _ => {
                self.c = self.c * self.c + alpha - alpha * alpha;
                self.a = 2.0 * alpha * self.a - 0.5 * self.a * self.a * self.scale;
            }
        }
        self.next_j += 1;
        Some(SequenceTerm {
            j,
            c: self.c,
            a: self.a,
            a_transform: 2.0 * (alpha - self.c) / self.scale,
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.steps + 1).saturating_sub(self.next_j);
        (left, Some(left))
    }
}

impl ExactSizeIterator for SequenceIter {}

/// Streaming `c`/`a` sequences, `N ≤ MAX_SEQUENCE_LEN`.
pub fn sequence_iter(alpha: f64, xi: f64, dt: f64, steps: usize) -> Result<SequenceIter> {
    check_alpha(alpha)?;
    check_len(steps, MAX_SEQUENCE_LEN)?;
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::param("xi", xi, "must be finite and positive"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param("dt", dt, "must be finite and positive"));
    }
    Ok(SequenceIter {
        alpha,
        scale: xi * xi * dt,
        steps,
        next_j: 0,
        c: 0.0,
        a: 0.0,
    })
}

/// `c_0..=c_N`, materialised (`N ≤ MAX_MATERIALIZED_LEN`).
pub fn c_sequence(alpha: f64, steps: usize) -> Result<Vec<f64>> {
    check_len(steps, MAX_MATERIALIZED_LEN)?;
    // ξ and δt do not enter c
    Ok(sequence_iter(alpha, 1.0, 1.0, steps)?
        .map(|t| t.c)
        .collect())
}

/// The `α_N`, `c` and `a` sequences for one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequences {
    pub alpha_n: f64,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub a_transform: Vec<f64>,
}

impl BoundSequences {
    /// Largest relative gap between the two `a` constructions over `j ≥ 1`.
    pub fn max_relative_gap(&self) -> f64 {
        self.a
            .iter()
            .zip(&self.a_transform)
            .skip(1)
            .map(|(r, t)| relative_gap(*r, *t))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Materialised `c` and both `a` constructions (`N ≤ MAX_MATERIALIZED_LEN`).
pub fn a_sequence(alpha: f64, xi: f64, dt: f64, steps: usize) -> Result<BoundSequences> {
    check_len(steps, MAX_MATERIALIZED_LEN)?;
    let iter = sequence_iter(alpha, xi, dt, steps)?;
    let mut out = BoundSequences {
        alpha_n: alpha,
        c: Vec::with_capacity(steps + 1),
        a: Vec::with_capacity(steps + 1),
        a_transform: Vec::with_capacity(steps + 1),
    };
    for t in iter {
        out.c.push(t.c);
        out.a.push(t.a);
        out.a_transform.push(t.a_transform);
    }
    Ok(out)
}

/// A failure of `c_j ≤ 1 − α − φ_ν/(j − 1 + η_ν)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CBoundViolation {
    pub j: usize,
    pub c: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CBoundReport {
    pub checked: usize,
    pub first_violation: Option<CBoundViolation>,
    /// Minimum of `bound − c_j` over the checked range.
    pub min_slack: f64,
    /// Whether every `c_j`, `1 ≤ j ≤ N`, lies in `(0, α)`.
    pub c_in_range: bool,
}

impl CBoundReport {
    pub fn holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks the `c_j` upper bound for `1 ≤ j ≤ N`, streaming the sequence.
pub fn c_bound_check(nu: f64, alpha: f64, steps: usize) -> Result<CBoundReport> {
    let constants = derived_constants(nu)?;
    let iter = sequence_iter(alpha, 1.0, 1.0, steps)?;
    let mut report = CBoundReport {
        checked: 0,
        first_violation: None,
        min_slack: f64::INFINITY,
        c_in_range: true,
    };
    for t in iter.skip(1) {
        let bound = 1.0 - alpha - constants.phi_nu / (t.j as f64 - 1.0 + constants.eta_nu);
        let slack = bound - t.c;
        report.checked += 1;
        report.min_slack = report.min_slack.min(slack);
        if !(t.c > 0.0 && t.c < alpha) {
            report.c_in_range = false;
        }
        if slack < 0.0 && report.first_violation.is_none() {
            report.first_violation = Some(CBoundViolation {
                j: t.j,
                c: t.c,
                bound,
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaBound {
    /// `q^{−s} + q^{1−s}/(s − 1)`
    pub bound: f64,
    /// `Σ_{n=0}^{M} (q + n)^{−s}` with `M = ZETA_TERMS`.
    pub truncated_sum: f64,
}

/// Integral-comparison upper bound of the Hurwitz zeta function `ζ(s, q)`.
pub fn hurwitz_zeta_upper(s: f64, q: f64) -> Result<ZetaBound> {
    if !(s.is_finite() && s > 1.0) {
        return Err(Error::param("s", s, "the Hurwitz zeta series needs s > 1"));
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::param("q", q, "must be finite and positive"));
    }
    let bound = q.powf(-s) + q.powf(1.0 - s) / (s - 1.0);
    // smallest terms first
    let truncated_sum: CompensatedSum = (0..=ZETA_TERMS)
        .rev()
        .map(|n| (q + n as f64).powf(-s))
        .collect();
    Ok(ZetaBound {
        bound,
        truncated_sum: truncated_sum.value(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityBound {
    pub constants: FellerDerived,
    /// Exponent `−ν + ν̄ + 1` of N.
    pub exponent: f64,
    /// N-independent prefactor.
    pub prefactor: f64,
    /// Unclamped bound; may exceed 1 or overflow for small N.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub probability: f64,
}

/// Upper bound on `sup_n P(ṽ_{t_n} ≤ 0)`:
///
/// ```text
/// (1+ε)e^{−ν/2}/(2√(νπ)) · (kθTη_ν/v_0)^{νφ_ν} · exp{ν(v_0/θ + kT − φ_ν)} · N^{−ν+ν̄+1}
/// ```
pub fn negativity_bound(params: &CirParams, steps: usize) -> Result<NegativityBound> {
    let params = params.validate()?;
    let nu = params.feller_ratio();
    if !(nu > 2.0) {
        return Err(Error::param(
            "nu",
            nu,
            "the negativity bound requires nu > 2",
        ));
    }
    // validates N > kT
    alpha_n(params.k, params.horizon, steps)?;
    let c = derived_constants(nu)?;
    let power = nu * c.phi_nu;
    let kt = params.k * params.horizon;
    let prefactor = (1.0 + EPSILON) * (-0.5 * nu).exp()
        / (2.0 * (nu * std::f64::consts::PI).sqrt())
        * (params.k * params.theta * params.horizon * c.eta_nu / params.v0).powf(power)
        * (nu * (params.v0 / params.theta + kt - c.phi_nu)).exp();
    let exponent = -nu + c.nu_bar + 1.0;
    let raw = prefactor * (steps as f64).powf(exponent);
    Ok(NegativityBound {
        constants: c,
        exponent,
        prefactor,
        raw,
        probability: if raw.is_nan() {
            1.0
        } else {
            raw.clamp(0.0, 1.0)
        },
    })
}

/// Open interval of admissible β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaInterval {
    pub lower: f64,
    pub upper: f64,
    pub nu_bar: f64,
    /// `√((ν + 2q − 1)² − 4q(q − 1))`
    pub sqrt_discriminant: f64,
}

impl BetaInterval {
    pub fn is_empty(&self) -> bool {
        !(self.lower < self.upper)
    }

    pub fn contains(&self, beta: f64) -> bool {
        self.lower < beta && beta < self.upper
    }

    pub fn width(&self) -> f64 {
        (self.upper - self.lower).max(0.0)
    }
}

/// β > 0 satisfying both
/// `ν > 2β + 1 > ν + 2q − √((ν+2q−1)² − 4q(q−1))` and
/// `2(ν − ν̄ − 1)(ν − β − 1) > νq`, for `2 ≤ q < ν − 1`.
pub fn beta_feasible_interval(nu: f64, q: f64) -> Result<BetaInterval> {
    if !(q.is_finite() && q >= 2.0) {
        return Err(Error::param("q", q, "requires q >= 2"));
    }
    if !(nu.is_finite() && q < nu - 1.0) {
        return Err(Error::param("nu", nu, "requires q < nu - 1"));
    }
    let nu_bar = nu_bar(nu)?;
    let sqrt_discriminant = ((nu + 2.0 * q - 1.0).powi(2) - 4.0 * q * (q - 1.0)).sqrt();
    let from_lower = 0.5 * (nu + 2.0 * q - 1.0 - sqrt_discriminant);
    let from_upper = 0.5 * (nu - 1.0);
    let from_product = nu - 1.0 - nu * q / (2.0 * (nu - nu_bar - 1.0));
    Ok(BetaInterval {
        lower: from_lower.max(0.0),
        upper: from_upper.min(from_product),
        nu_bar,
        sqrt_discriminant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nu_bar_golden_values() {
        assert!((nu_bar(2.0 + 1e-9).unwrap() - 0.176).abs() < 1e-3);
        assert!((nu_bar(3.0).unwrap() - 0.057).abs() < 1e-3);
    }

    #[test]
    fn nu_bar_matches_quadratic_at_two_and_a_half() {
        // For 4x < ν the crossing solves R x² − (R(ν−1) + 1)x + ν = 0, R = rhs(ν).
        let nu = 2.5;
        let r = nu_bar_rhs(nu);
        let (a, b, c) = (r, -(r * (nu - 1.0) + 1.0), nu);
        let analytic = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        assert!((analytic - 0.0926).abs() < 1e-4);
        let root = nu_bar(nu).unwrap();
        assert!((root - analytic).abs() < 1e-9, "{root} vs {analytic}");
        // independent grid scan for the first x with lhs < rhs
        let steps = 1_000_000;
        let hi = NU_BAR_UPPER;
        let first = (1..=steps)
            .map(|i| hi * i as f64 / steps as f64)
            .find(|&x| nu_bar_lhs(x, nu) < r)
            .unwrap();
        assert!((first - root).abs() <= hi / steps as f64);
    }

    #[test]
    fn nu_bar_rejects_small_nu() {
        assert!(nu_bar(2.0).is_err());
        assert!(nu_bar(1.0).is_err());
        assert!(nu_bar(f64::NAN).is_err());
    }

    #[test]
    fn nu_bar_is_bracketed() {
        for nu in [2.0 + 1e-9, 2.1, 3.0, 4.0, 8.0, 20.0, 60.0, 200.0] {
            let root = nu_bar(nu).unwrap();
            let r = nu_bar_rhs(nu);
            let h = 1e-8_f64.min(0.5 * root);
            assert!(nu_bar_lhs(root - h, nu) >= r, "nu = {nu}");
            assert!(nu_bar_lhs(root + h, nu) <= r, "nu = {nu}");
            assert!(root > 0.0 && root < 0.177);
        }
    }

    #[test]
    fn nu_bar_decreases_in_nu() {
        let values: Vec<f64> = (0..200)
            .map(|i| nu_bar(2.0 + 1e-9 + 0.05 * i as f64).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn derived_constants_at_three() {
        let c = derived_constants(3.0).unwrap();
        assert!((c.phi_nu - 0.981).abs() < 1e-3);
        assert!((c.eta_nu - 51.6).abs() < 1.0, "eta {}", c.eta_nu);
        assert_eq!(c.epsilon, 0.002);
        assert!(c.nu * c.phi_nu > 1.0);
    }

    #[test]
    fn phi_over_eta_is_at_most_a_quarter() {
        for nu in [2.01, 2.5, 3.0, 5.0, 10.0] {
            let c = derived_constants(nu).unwrap();
            let ratio = c.phi_nu / c.eta_nu;
            assert_relative_eq!(
                ratio,
                c.nu_bar / (4.0 * c.nu_bar).max(nu),
                max_relative = 1e-12
            );
            assert!(ratio <= 0.25);
            assert!(c.phi_nu > 0.0 && c.phi_nu < 1.0 && c.eta_nu > 0.0);
        }
    }

    #[test]
    fn alpha_n_values() {
        assert_relative_eq!(alpha_n(2.0, 1.0, 100).unwrap(), 0.49, max_relative = 1e-14);
        assert!((alpha_n(2.0, 1.0, 1 << 30).unwrap() - 0.5).abs() < 1e-8);
        assert!(alpha_n(2.0, 1.0, 2).is_err());
        assert!(alpha_n(2.0, 1.0, 1).is_err());
    }

    #[test]
    fn c_sequence_values() {
        let c = c_sequence(0.49, 10).unwrap();
        assert_eq!(c[0], 0.49);
        assert_relative_eq!(c[1], 0.2499, max_relative = 1e-14);
        assert_relative_eq!(c[2], 0.2499 * 0.2499 + 0.2499, max_relative = 1e-14);
        assert!(c_sequence(0.5, 10).is_err());
        assert!(c_sequence(0.0, 10).is_err());
        assert!(c_sequence(0.3, MAX_MATERIALIZED_LEN + 1).is_err());
    }

    #[test]
    fn alpha_is_a_fixed_point() {
        let alpha: f64 = 0.37;
        assert_eq!(alpha * alpha + alpha - alpha * alpha, alpha);
    }

    #[test]
    fn c_stays_inside_zero_alpha() {
        let c = c_sequence(0.49, 10_000).unwrap();
        assert!(c[1..].iter().all(|&x| x > 0.0 && x < 0.49));
    }

    #[test]
    fn a_sequence_values() {
        let s = a_sequence(0.49, 0.8, 0.01, 1000).unwrap();
        assert_eq!(s.a[0], 0.0);
        assert_relative_eq!(s.a[1], 75.03125, max_relative = 1e-12);
        assert!(s.a.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn a_recursion_matches_transform() {
        // α = α_N for k = 2, T = 1, N = 1000
        let alpha = alpha_n(2.0, 1.0, 1000).unwrap();
        let s = a_sequence(alpha, 0.8, 1e-3, 1000).unwrap();
        assert!(s.max_relative_gap() < 1e-9, "gap {}", s.max_relative_gap());
    }

    #[test]
    fn c_bound_first_index() {
        for nu in [2.1, 3.0, 6.0] {
            let c = derived_constants(nu).unwrap();
            for alpha in [0.1, 0.3, 0.49, 0.4999] {
                let bound = 1.0 - alpha - c.phi_nu / c.eta_nu;
                assert!(alpha - alpha * alpha <= bound);
                assert!(c.phi_nu / c.eta_nu <= (1.0 - alpha) * (1.0 - alpha));
            }
        }
    }

    #[test]
    fn c_bound_sweeps() {
        let r = c_bound_check(3.0, 0.49, 10_000).unwrap();
        assert!(r.holds() && r.c_in_range);
        assert_eq!(r.checked, 10_000);
        let r = c_bound_check(2.1, 0.499, 10_000).unwrap();
        assert!(r.holds() && r.c_in_range, "{r:?}");
    }

    #[test]
    fn zeta_bound_classical() {
        let z = hurwitz_zeta_upper(2.0, 1.0).unwrap();
        assert_eq!(z.bound, 2.0);
        let basel = std::f64::consts::PI.powi(2) / 6.0;
        // tail beyond M is about 1/M
        assert!((z.truncated_sum - basel).abs() < 1.1e-6);
        assert!(z.truncated_sum <= z.bound);
    }

    #[test]
    fn zeta_bound_dominates_sum() {
        for s in [1.5, 2.0, 3.0] {
            for q in [0.5, 1.0, 50.0] {
                let z = hurwitz_zeta_upper(s, q).unwrap();
                assert!(z.truncated_sum <= z.bound, "s={s} q={q}");
            }
        }
        assert!(hurwitz_zeta_upper(3.0, 1e12).unwrap().bound < 1e-23);
        assert!(hurwitz_zeta_upper(1.0, 1.0).is_err());
    }

    fn bound_params() -> CirParams {
        CirParams::new(0.02, 6.0, 0.02, 0.28, 1.0).unwrap()
    }

    #[test]
    fn negativity_bound_exponent_and_scaling() {
        let p = bound_params();
        let b1 = negativity_bound(&p, 1000).unwrap();
        let b2 = negativity_bound(&p, 2000).unwrap();
        let nu = p.feller_ratio();
        assert_relative_eq!(b1.exponent, -nu + b1.constants.nu_bar + 1.0);
        assert!(b1.exponent < 0.0);
        assert_relative_eq!(
            b2.raw / b1.raw,
            2f64.powf(b1.exponent),
            max_relative = 1e-12
        );
        assert!(b1.raw.is_finite() && b1.raw > 0.0);
        assert!(b1.probability <= 1.0);
    }

    #[test]
    fn negativity_bound_log_domain_oracle() {
        let p = bound_params();
        let n = 1000usize;
        let b = negativity_bound(&p, n).unwrap();
        let c = b.constants;
        let nu = c.nu;
        let log_terms = [
            (1.0 + EPSILON).ln(),
            -0.5 * nu,
            -(2.0f64).ln() - 0.5 * (nu * std::f64::consts::PI).ln(),
            nu * c.phi_nu * (p.k.ln() + p.theta.ln() + p.horizon.ln() + c.eta_nu.ln() - p.v0.ln()),
            nu * (p.v0 / p.theta + p.k * p.horizon - c.phi_nu),
            (-nu + c.nu_bar + 1.0) * (n as f64).ln(),
        ];
        let log_bound: CompensatedSum = log_terms.into_iter().collect();
        assert_relative_eq!(b.raw, log_bound.value().exp(), max_relative = 1e-11);
    }

    #[test]
    fn negativity_bound_rejections() {
        let p = CirParams::new(0.02, 2.0, 0.02, 0.8, 1.0).unwrap();
        assert!(negativity_bound(&p, 1000).is_err());
        let p = bound_params();
        assert!(negativity_bound(&p, 6).is_err());
    }

    fn scan_feasible(nu: f64, q: f64, nu_bar: f64, points: usize) -> Option<(f64, f64)> {
        let top = 0.5 * (nu - 1.0);
        let sqrt_d = ((nu + 2.0 * q - 1.0).powi(2) - 4.0 * q * (q - 1.0)).sqrt();
        let mut found: Option<(f64, f64)> = None;
        for i in 1..points {
            let beta = top * i as f64 / points as f64;
            let ok = nu > 2.0 * beta + 1.0
                && 2.0 * beta + 1.0 > nu + 2.0 * q - sqrt_d
                && 2.0 * (nu - nu_bar - 1.0) * (nu - beta - 1.0) > nu * q;
            if ok {
                found = Some(match found {
                    None => (beta, beta),
                    Some((lo, _)) => (lo, beta),
                });
            }
        }
        found
    }

    #[test]
    fn beta_interval_matches_grid_scan() {
        let (nu, q) = (4.0, 2.0);
        let iv = beta_feasible_interval(nu, q).unwrap();
        assert!(!iv.is_empty());
        let points = 1_000_000;
        let spacing = 0.5 * (nu - 1.0) / points as f64;
        let (lo, hi) = scan_feasible(nu, q, iv.nu_bar, points).unwrap();
        assert!((lo - iv.lower).abs() <= spacing, "{lo} vs {}", iv.lower);
        assert!((hi - iv.upper).abs() <= spacing, "{hi} vs {}", iv.upper);
    }

    #[test]
    fn beta_interval_near_hypothesis_boundary() {
        assert!(!beta_feasible_interval(3.01, 2.0).unwrap().is_empty());
        assert!(beta_feasible_interval(3.0, 2.0).is_err());
        assert!(beta_feasible_interval(5.0, 1.5).is_err());
    }

    #[test]
    fn discriminant_dominates_two_q() {
        for nu in [3.01, 3.5, 4.0, 5.0, 8.0] {
            for q in [2.0, (nu - 1.0) * 0.5 + 1.0, nu - 1.0 - 1e-3] {
                let iv = beta_feasible_interval(nu, q).unwrap();
                assert!(2.0 * q < iv.sqrt_discriminant);
            }
        }
    }
}
