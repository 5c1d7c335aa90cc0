//! Monte Carlo experiments: strong-error estimation on coupled grids, rate
//! regression, negativity frequencies and moment sweeps.
//!
//! Path `i` always draws from `StreamKey(seed, i, ·)`. Paths are processed in
//! blocks of [`BLOCK_PATHS`](crate::summation::BLOCK_PATHS) with compensated
//! sums inside each block and a sequential merge of the block partials, so
//! every result is bit-identical for any number of worker threads.

use crate::error::{Error, Result};
use crate::model::{CirParams, Grid};
use crate::rng::StreamKey;
use crate::schemes::{euler_walk, exact_walk, power_of_two_levels, CoupledWorkspace, SchemeKind};
use crate::summation::{map_blocks, CompensatedSum};
use crate::theory::{negativity_bound, NegativityBound};

/// Smallest path count accepted by the strong-error estimators.
pub const MIN_ERROR_PATHS: u64 = 100;

/// Smallest path count accepted by [`negativity_sweep`].
pub const MIN_NEGATIVITY_PATHS: u64 = 10_000;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Estimate of `E[|Δ|^p]^{1/p}` for one grid size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub steps: usize,
    pub p: f64,
    pub value: f64,
    /// Standard error of the Monte Carlo mean of `|Δ|^p`.
    pub std_err: f64,
    /// Delta-method standard error of `value`.
    pub value_std_err: f64,
    pub n_paths: u64,
}

/// Ordinary least squares fit of `log2(value)` on `log2(N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_err: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

impl RateFit {
    /// Empirical convergence order, `−slope`.
    pub fn order(&self) -> f64 {
        -self.slope
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityPoint {
    pub steps: usize,
    pub n_paths: u64,
    /// `max_n` of the empirical frequency of `ṽ_{t_n} ≤ 0`.
    pub max_node_frequency: f64,
    /// Node attaining the maximum.
    pub max_node: usize,
    /// Binomial standard error of `max_node_frequency`.
    pub std_err: f64,
    /// Upper end of the 95% Wilson score interval.
    pub upper_95: f64,
    /// Fraction of paths non-positive at some node.
    pub ever_fraction: f64,
    /// Theoretical bound, when `ν > 2` and `N > kT`.
    pub bound: Option<NegativityBound>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativityReport {
    pub params: CirParams,
    pub points: Vec<NegativityPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPoint {
    pub steps: usize,
    pub p: f64,
    /// `E[v_T^p]` (exact) or `max_n E[|ṽ_{t_n}|^p]` (Euler schemes).
    pub value: f64,
    pub std_err: f64,
    /// Node attaining the value (always `N` for the exact scheme).
    pub node: usize,
    /// `2p ≤ −ν`: the estimator has infinite variance.
    pub heavy_tail: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub scheme: SchemeKind,
    pub points: Vec<MomentPoint>,
}

impl MomentReport {
    /// `(max − min)/mean` of the estimates for order `p` across grid sizes.
    pub fn relative_spread(&self, p: f64) -> Option<f64> {
        let values: Vec<f64> = self
            .points
            .iter()
            .filter(|pt| pt.p == p)
            .map(|pt| pt.value)
            .collect();
        if values.is_empty() {
            return None;
        }
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Some((max - min) / mean)
    }
}

#[inline]
fn abs_pow(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

/// Running first and second moments of one quantity.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: CompensatedSum,
    sum_sq: CompensatedSum,
}

impl Moments {
    #[inline]
    fn add(&mut self, x: f64) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    fn merge(&mut self, other: &Moments) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    /// Mean and standard error of the mean.
    fn mean_se(&self, n: u64) -> (f64, f64) {
        let nf = n as f64;
        let mean = self.sum.value() / nf;
        let var = ((self.sum_sq.value() - nf * mean * mean) / (nf - 1.0)).max(0.0);
        (mean, (var / nf).sqrt())
    }
}

fn check_norm_orders(ps: &[f64]) -> Result<()> {
    if ps.is_empty() {
        return Err(Error::InsufficientData("at least one norm order p"));
    }
    for &p in ps {
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::param("p", p, "error norms need p >= 1"));
        }
    }
    Ok(())
}

fn estimates_from(steps: usize, ps: &[f64], acc: &[Moments], n_paths: u64) -> Vec<ErrorEstimate> {
    ps.iter()
        .zip(acc)
        .map(|(&p, m)| {
            let (mean, se) = m.mean_se(n_paths);
            let value = mean.powf(1.0 / p);
            let value_std_err = if mean > 0.0 {
                se * value / (p * mean)
            } else {
                0.0
            };
            ErrorEstimate {
                steps,
                p,
                value,
                std_err: se,
                value_std_err,
                n_paths,
            }
        })
        .collect()
}

/// `E[|v̄_{T,N} − v̄_{T,N·factor}|^p]^{1/p}` for each `p`, the two FTE
/// approximations sharing one Brownian path. `factor` must be a power of two;
/// `factor = 1` compares a grid with itself.
pub fn strong_error_between(
    params: &CirParams,
    steps: usize,
    factor: usize,
    ps: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<ErrorEstimate>> {
    let params = params.validate()?;
    check_norm_orders(ps)?;
    if steps == 0 {
        return Err(Error::InvalidSteps {
            steps,
            reason: "need at least one step",
        });
    }
    if n_paths < 2 {
        return Err(Error::InsufficientData("at least two paths"));
    }
    let levels = power_of_two_levels(factor).ok_or(Error::InvalidSteps {
        steps: factor,
        reason: "refinement factor must be a power of two",
    })?;
    let partials = map_blocks(n_paths, |range| {
        let mut ws = CoupledWorkspace::new();
        let mut acc = vec![Moments::default(); ps.len()];
        for i in range {
            let t = ws.fte_terminals(&params, steps, levels, StreamKey::brownian(seed, i));
            let delta = t[0] - t[levels as usize];
            for (m, &p) in acc.iter_mut().zip(ps) {
                m.add(abs_pow(delta, p));
            }
        }
        acc
    });
    let mut total = vec![Moments::default(); ps.len()];
    for block in &partials {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }
    Ok(estimates_from(steps, ps, &total, n_paths))
}

/// Coupled-grid proxy `E[|v̄_{T,N} − v̄_{T,2N}|^p]^{1/p}` for several `p` from
/// one set of paths.
pub fn strong_error_proxy_multi(
    params: &CirParams,
    steps: usize,
    ps: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<ErrorEstimate>> {
    if n_paths < MIN_ERROR_PATHS {
        return Err(Error::InsufficientData("at least 100 paths"));
    }
    strong_error_between(params, steps, 2, ps, n_paths, seed)
}

pub fn strong_error_proxy(
    params: &CirParams,
    steps: usize,
    p: f64,
    n_paths: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    Ok(strong_error_proxy_multi(params, steps, &[p], n_paths, seed)?[0])
}

fn check_reference_multiplier(m: usize) -> Result<()> {
    if m < 8 || !m.is_power_of_two() {
        return Err(Error::InvalidSteps {
            steps: m,
            reason: "reference multiplier must be a power of two and at least 8",
        });
    }
    Ok(())
}

/// Error against a fine-grid FTE reference with `N·ref_multiplier` steps on
/// the same Brownian path, for several `p`.
pub fn strong_error_vs_reference_multi(
    params: &CirParams,
    steps: usize,
    ref_multiplier: usize,
    ps: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<ErrorEstimate>> {
    check_reference_multiplier(ref_multiplier)?;
    if n_paths < MIN_ERROR_PATHS {
        return Err(Error::InsufficientData("at least 100 paths"));
    }
    strong_error_between(params, steps, ref_multiplier, ps, n_paths, seed)
}

pub fn strong_error_vs_reference(
    params: &CirParams,
    steps: usize,
    ref_multiplier: usize,
    p: f64,
    n_paths: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    Ok(strong_error_vs_reference_multi(params, steps, ref_multiplier, &[p], n_paths, seed)?[0])
}

/// OLS fit of `log2(value)` against `log2(N)`.
pub fn fit_rate(estimates: &[ErrorEstimate]) -> Result<RateFit> {
    if estimates.len() < 3 {
        return Err(Error::InsufficientData("at least three estimates"));
    }
    let mut seen: Vec<usize> = estimates.iter().map(|e| e.steps).collect();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != estimates.len() {
        return Err(Error::InsufficientData("distinct step counts"));
    }
    if let Some(e) = estimates
        .iter()
        .find(|e| !(e.value > 0.0 && e.value.is_finite()))
    {
        return Err(Error::param(
            "value",
            e.value,
            "log-log fit needs positive errors",
        ));
    }
    let points: Vec<(f64, f64)> = estimates
        .iter()
        .map(|e| ((e.steps as f64).log2(), e.value.log2()))
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    let slope_std_err = if points.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(RateFit {
        slope,
        intercept,
        slope_std_err,
        r_squared,
        points,
    })
}

/// Upper end of the 95% Wilson score interval for `successes / n`.
pub fn wilson_upper(successes: u64, n: u64) -> f64 {
    let nf = n as f64;
    let phat = successes as f64 / nf;
    let z2 = Z_95 * Z_95;
    let centre = phat + z2 / (2.0 * nf);
    let half = Z_95 * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((centre + half) / (1.0 + z2 / nf)).min(1.0)
}

/// Per-N maximum over nodes of the frequency of `ṽ_{t_n} ≤ 0` for the FTE
/// scheme, with the theoretical bound attached where it is defined.
pub fn negativity_sweep(
    params: &CirParams,
    steps_list: &[usize],
    n_paths: u64,
    seed: u64,
) -> Result<NegativityReport> {
    let params = params.validate()?;
    if n_paths < MIN_NEGATIVITY_PATHS {
        return Err(Error::InsufficientData(
            "at least 10^4 paths for negativity frequencies",
        ));
    }
    let nu = params.feller_ratio();
    let mut points = Vec::with_capacity(steps_list.len());
    for &steps in steps_list {
        let grid = Grid::for_params(&params, steps)?;
        let sd = grid.dt().sqrt();
        let partials = map_blocks(n_paths, |range| {
            let mut node_counts = vec![0u64; steps + 1];
            let mut ever = 0u64;
            let mut incs = vec![0.0; steps];
            for i in range {
                let mut stream = StreamKey::brownian(seed, i).stream();
                for x in incs.iter_mut() {
                    *x = sd * stream.standard_normal();
                }
                let mut hit = false;
                euler_walk(
                    SchemeKind::FullTruncation,
                    &params,
                    grid.dt(),
                    &incs,
                    |n, v| {
                        if v <= 0.0 {
                            node_counts[n] += 1;
                            hit = true;
                        }
                    },
                );
                ever += hit as u64;
            }
            (node_counts, ever)
        });
        let mut node_counts = vec![0u64; steps + 1];
        let mut ever = 0u64;
        for (counts, e) in &partials {
            for (t, c) in node_counts.iter_mut().zip(counts) {
                *t += c;
            }
            ever += e;
        }
        // first node attaining the maximum
        let (max_node, max_count) = node_counts.iter().enumerate().fold(
            (0, 0u64),
            |best, (n, &c)| if c > best.1 { (n, c) } else { best },
        );
        let freq = max_count as f64 / n_paths as f64;
        let bound = if nu > 2.0 && steps as f64 > params.k * params.horizon {
            negativity_bound(&params, steps).ok()
        } else {
            None
        };
        points.push(NegativityPoint {
            steps,
            n_paths,
            max_node_frequency: freq,
            max_node,
            std_err: (freq * (1.0 - freq) / n_paths as f64).sqrt(),
            upper_95: wilson_upper(max_count, n_paths),
            ever_fraction: ever as f64 / n_paths as f64,
            bound,
        });
    }
    Ok(NegativityReport { params, points })
}

/// Moment estimates per grid size.
///
/// For [`SchemeKind::Exact`] this is `E[v_T^p]`, any `p > −ν`. For the Euler
/// schemes it is `max_n E[|ṽ_{t_n}|^p]`, `p ≥ 1`.
pub fn moment_sweep(
    params: &CirParams,
    ps: &[f64],
    steps_list: &[usize],
    n_paths: u64,
    seed: u64,
    scheme: SchemeKind,
) -> Result<MomentReport> {
    let params = params.validate()?;
    let nu = params.feller_ratio();
    if ps.is_empty() {
        return Err(Error::InsufficientData("at least one moment order"));
    }
    for &p in ps {
        if !p.is_finite() {
            return Err(Error::param("p", p, "must be finite"));
        }
        match scheme {
            SchemeKind::Exact if p <= -nu => {
                return Err(Error::param(
                    "p",
                    p,
                    "moments of order p <= -nu are infinite",
                ))
            }
            SchemeKind::Exact => {}
            _ if p < 1.0 => return Err(Error::param("p", p, "Euler moment sweeps need p >= 1")),
            _ => {}
        }
    }
    if n_paths < 2 {
        return Err(Error::InsufficientData("at least two paths"));
    }
    let mut points = Vec::new();
    for &steps in steps_list {
        let grid = Grid::for_params(&params, steps)?;
        if scheme == SchemeKind::Exact {
            let partials = map_blocks(n_paths, |range| {
                let mut acc = vec![Moments::default(); ps.len()];
                for i in range {
                    let mut stream = StreamKey::transition(seed, i).stream();
                    let v = exact_walk(&params, &grid, &mut stream, |_, _| {});
                    for (m, &p) in acc.iter_mut().zip(ps) {
                        m.add(v.powf(p));
                    }
                }
                acc
            });
            let mut total = vec![Moments::default(); ps.len()];
            for block in &partials {
                for (t, b) in total.iter_mut().zip(block) {
                    t.merge(b);
                }
            }
            for (&p, m) in ps.iter().zip(&total) {
                let (value, std_err) = m.mean_se(n_paths);
                points.push(MomentPoint {
                    steps,
                    p,
                    value,
                    std_err,
                    node: steps,
                    heavy_tail: 2.0 * p <= -nu,
                });
            }
        } else {
            let sd = grid.dt().sqrt();
            let width = ps.len();
            let partials = map_blocks(n_paths, |range| {
                let mut acc = vec![Moments::default(); width * (steps + 1)];
                let mut incs = vec![0.0; steps];
                for i in range {
                    let mut stream = StreamKey::brownian(seed, i).stream();
                    for x in incs.iter_mut() {
                        *x = sd * stream.standard_normal();
                    }
                    euler_walk(scheme, &params, grid.dt(), &incs, |n, v| {
                        for (j, &p) in ps.iter().enumerate() {
                            acc[n * width + j].add(abs_pow(v, p));
                        }
                    });
                }
                acc
            });
            let mut total = vec![Moments::default(); width * (steps + 1)];
            for block in &partials {
                for (t, b) in total.iter_mut().zip(block) {
                    t.merge(b);
                }
            }
            for (j, &p) in ps.iter().enumerate() {
                let mut best = MomentPoint {
                    steps,
                    p,
                    value: f64::NEG_INFINITY,
                    std_err: 0.0,
                    node: 0,
                    heavy_tail: false,
                };
                for n in 0..=steps {
                    let (value, std_err) = total[n * width + j].mean_se(n_paths);
                    if value > best.value {
                        best.value = value;
                        best.std_err = std_err;
                        best.node = n;
                    }
                }
                points.push(best);
            }
        }
    }
    Ok(MomentReport { scheme, points })
}
