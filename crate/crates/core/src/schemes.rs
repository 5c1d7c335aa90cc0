//! Discretisation schemes for the CIR process.
//!
//! The full truncation Euler (FTE) recursion
//!
//! ```text
//! ṽ_{n+1} = ṽ_n + k(θ − ṽ_n⁺)δt + ξ√(ṽ_n⁺) δW_n,    ṽ_0 = v_0,
//! ```
//!
//! with the non-negative read-out `v̄_t = ṽ_n⁺` on `[t_n, t_{n+1})`, is the
//! scheme under study. Partial truncation and reflection are explicit Euler
//! baselines; the exact scheme samples the noncentral chi-squared transition.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{CirParams, Grid};
use crate::rng::{noncentral_chi2_draw, Stream, StreamKey, Substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    FullTruncation,
    PartialTruncation,
    Reflection,
    Exact,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::FullTruncation,
        SchemeKind::PartialTruncation,
        SchemeKind::Reflection,
        SchemeKind::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::FullTruncation => "fte",
            SchemeKind::PartialTruncation => "partial",
            SchemeKind::Reflection => "reflection",
            SchemeKind::Exact => "exact",
        }
    }

    /// Euler-type schemes are driven by Brownian increments.
    pub fn is_euler(self) -> bool {
        !matches!(self, SchemeKind::Exact)
    }

    /// The non-negative value the scheme reports for a stored state.
    #[inline]
    pub fn read(self, tilde_v: f64) -> f64 {
        match self {
            SchemeKind::Reflection => tilde_v.abs(),
            _ => tilde_v.max(0.0),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fte" | "full-truncation" | "full_truncation" => Ok(SchemeKind::FullTruncation),
            "partial" | "partial-truncation" | "partial_truncation" => {
                Ok(SchemeKind::PartialTruncation)
            }
            "reflection" | "reflect" => Ok(SchemeKind::Reflection),
            "exact" => Ok(SchemeKind::Exact),
            other => Err(format!(
                "unknown scheme `{other}` (expected fte, partial, reflection or exact)"
            )),
        }
    }
}

/// State at a grid node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    /// Raw iterate; may be negative for the Euler schemes.
    pub tilde_v: f64,
    /// Non-negative read-out, valid on `[t_n, t_{n+1})`.
    pub bar_v: f64,
    pub node_index: usize,
}

/// A node-indexed trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub kind: SchemeKind,
    pub states: Vec<PathState>,
    /// `ṽ_{t_n} ≤ 0` per node.
    pub nonpositive: Vec<bool>,
}

impl Path {
    pub fn terminal(&self) -> PathState {
        *self.states.last().expect("paths contain the initial node")
    }

    pub fn ever_nonpositive(&self) -> bool {
        self.nonpositive.iter().any(|&b| b)
    }
}

/// Terminal read-outs of several FTE approximations sharing one Brownian path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledPaths {
    /// `v̄_T` on the N-step grid.
    pub coarse_terminal: f64,
    /// `v̄_T` on the 2N-step grid.
    pub fine_terminal: f64,
    /// `v̄_T` on the `N·refine_factor` grid when `refine_factor > 2`.
    pub reference_terminal: Option<f64>,
}

/// One full truncation Euler step.
#[inline]
pub fn fte_step(tilde_v: f64, dw: f64, dt: f64, params: &CirParams) -> f64 {
    let pos = tilde_v.max(0.0);
    tilde_v + params.k * (params.theta - pos) * dt + params.xi * pos.sqrt() * dw
}

/// Continuous-time FTE interpolant at `t_n + tau`, where `w_increment` is
/// `W_{t_n + tau} − W_{t_n}`.
#[inline]
pub fn interpolate_fte(tilde_v_node: f64, w_increment: f64, tau: f64, params: &CirParams) -> f64 {
    fte_step(tilde_v_node, w_increment, tau, params)
}

#[inline]
fn partial_truncation_step(tilde_v: f64, dw: f64, dt: f64, params: &CirParams) -> f64 {
    tilde_v + params.k * (params.theta - tilde_v) * dt + params.xi * tilde_v.max(0.0).sqrt() * dw
}

#[inline]
fn reflection_step(tilde_v: f64, dw: f64, dt: f64, params: &CirParams) -> f64 {
    let r = tilde_v.abs();
    r + params.k * (params.theta - r) * dt + params.xi * r.sqrt() * dw
}

/// One step of a baseline Euler scheme.
///
/// Reflection returns the unreflected iterate; use [`SchemeKind::read`] to
/// obtain the reflected value.
pub fn baseline_step(
    kind: SchemeKind,
    tilde_v: f64,
    dw: f64,
    dt: f64,
    params: &CirParams,
) -> Result<f64> {
    match kind {
        SchemeKind::PartialTruncation => Ok(partial_truncation_step(tilde_v, dw, dt, params)),
        SchemeKind::Reflection => Ok(reflection_step(tilde_v, dw, dt, params)),
        other => Err(Error::UnsupportedScheme(other)),
    }
}

#[inline]
fn euler_step(kind: SchemeKind, tilde_v: f64, dw: f64, dt: f64, params: &CirParams) -> f64 {
    match kind {
        SchemeKind::FullTruncation => fte_step(tilde_v, dw, dt, params),
        SchemeKind::PartialTruncation => partial_truncation_step(tilde_v, dw, dt, params),
        SchemeKind::Reflection => reflection_step(tilde_v, dw, dt, params),
        SchemeKind::Exact => unreachable!("exact transitions are not driven by increments"),
    }
}

/// One draw from the exact transition `v_{t+delta} | v_t = v`.
///
/// `v' = Y/(2c)` with `c = 2k/(ξ²(1 − e^{−kΔ}))` and
/// `Y ~ χ'²(4kθ/ξ², 2c·v·e^{−kΔ})`.
pub fn exact_step(v: f64, delta: f64, params: &CirParams, stream: &mut Stream) -> f64 {
    debug_assert!(v >= 0.0 && delta > 0.0);
    let xi2 = params.xi * params.xi;
    let decay = (-params.k * delta).exp();
    let c = 2.0 * params.k / (xi2 * -(-params.k * delta).exp_m1());
    let d = 4.0 * params.k * params.theta / xi2;
    let lambda = 2.0 * c * v.max(0.0) * decay;
    noncentral_chi2_draw(stream, d, lambda).expect("validated parameters give d > 0, λ ≥ 0")
        / (2.0 * c)
}

/// Brownian increments `δW_n = √δt·Z_n` for `grid`, drawn from `key`.
pub fn brownian_increments(key: StreamKey, grid: &Grid) -> Vec<f64> {
    let mut stream = key.stream();
    let sd = grid.dt().sqrt();
    (0..grid.steps())
        .map(|_| sd * stream.standard_normal())
        .collect()
}

/// Runs an Euler-type scheme over the given increments, calling
/// `visit(n, ṽ_{t_n})` for every node `n = 0..=N`. Returns `ṽ_{t_N}`.
#[inline]
pub fn euler_walk<F: FnMut(usize, f64)>(
    kind: SchemeKind,
    params: &CirParams,
    dt: f64,
    increments: &[f64],
    mut visit: F,
) -> f64 {
    let mut v = params.v0;
    visit(0, v);
    for (n, &dw) in increments.iter().enumerate() {
        v = euler_step(kind, v, dw, dt, params);
        visit(n + 1, v);
    }
    v
}

/// `ṽ_{t_N}` of the FTE recursion over `increments`.
#[inline]
pub fn fte_terminal(params: &CirParams, dt: f64, increments: &[f64]) -> f64 {
    increments
        .iter()
        .fold(params.v0, |v, &dw| fte_step(v, dw, dt, params))
}

/// Runs the exact scheme over `grid`, calling `visit(n, v_{t_n})`.
pub fn exact_walk<F: FnMut(usize, f64)>(
    params: &CirParams,
    grid: &Grid,
    stream: &mut Stream,
    mut visit: F,
) -> f64 {
    let mut v = params.v0;
    visit(0, v);
    for n in 0..grid.steps() {
        v = exact_step(v, grid.dt(), params, stream);
        visit(n + 1, v);
    }
    v
}

/// Euler-type trajectory from explicit increments (one per grid step).
pub fn euler_path_from_increments(
    kind: SchemeKind,
    params: &CirParams,
    grid: &Grid,
    increments: &[f64],
) -> Result<Path> {
    if !kind.is_euler() {
        return Err(Error::UnsupportedScheme(kind));
    }
    if increments.len() != grid.steps() {
        return Err(Error::InvalidSteps {
            steps: increments.len(),
            reason: "need exactly one increment per grid step",
        });
    }
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut nonpositive = Vec::with_capacity(grid.steps() + 1);
    euler_walk(kind, params, grid.dt(), increments, |n, v| {
        states.push(PathState {
            tilde_v: v,
            bar_v: kind.read(v),
            node_index: n,
        });
        nonpositive.push(v <= 0.0);
    });
    Ok(Path {
        kind,
        states,
        nonpositive,
    })
}

/// Simulates one trajectory.
///
/// Euler schemes read Brownian increments from the key's `(seed,
/// path_index)` Brownian substream; the exact scheme uses the transition
/// substream of the same path, so all Euler kinds share their noise.
pub fn simulate_path(
    kind: SchemeKind,
    params: &CirParams,
    grid: &Grid,
    key: StreamKey,
) -> Result<Path> {
    if kind.is_euler() {
        let key = StreamKey::new(key.seed, key.path_index, Substream::Brownian);
        let increments = brownian_increments(key, grid);
        return euler_path_from_increments(kind, params, grid, &increments);
    }
    let mut stream = StreamKey::new(key.seed, key.path_index, Substream::Transition).stream();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut nonpositive = Vec::with_capacity(grid.steps() + 1);
    exact_walk(params, grid, &mut stream, |n, v| {
        states.push(PathState {
            tilde_v: v,
            bar_v: v,
            node_index: n,
        });
        nonpositive.push(v <= 0.0);
    });
    Ok(Path {
        kind,
        states,
        nonpositive,
    })
}

/// `log2(factor)` if `factor` is a power of two.
pub(crate) fn power_of_two_levels(factor: usize) -> Option<u32> {
    factor.is_power_of_two().then(|| factor.trailing_zeros())
}

/// Reusable buffers for FTE runs on a dyadic hierarchy of grids
/// `N, 2N, …, N·2^L` sharing one Brownian path.
///
/// The finest increments are drawn once; each coarser level is formed by
/// summing adjacent pairs of the level below.
#[derive(Debug, Clone, Default)]
pub struct CoupledWorkspace {
    levels: Vec<Vec<f64>>,
    terminals: Vec<f64>,
}

impl CoupledWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills the increment hierarchy for path `key`. Level 0 has `n_coarse`
    /// steps and level `L = extra_levels` has `n_coarse·2^L`.
    pub fn draw(&mut self, horizon: f64, n_coarse: usize, extra_levels: u32, key: StreamKey) {
        let depth = extra_levels as usize + 1;
        self.levels.resize_with(depth, Vec::new);
        let finest_steps = n_coarse << extra_levels;
        let sd = (horizon / finest_steps as f64).sqrt();
        let mut stream = key.stream();
        let finest = &mut self.levels[depth - 1];
        finest.clear();
        finest.extend((0..finest_steps).map(|_| sd * stream.standard_normal()));
        for l in (0..depth - 1).rev() {
            let (lo, hi) = self.levels.split_at_mut(l + 1);
            let coarse = &mut lo[l];
            coarse.clear();
            coarse.extend(hi[0].chunks_exact(2).map(|pair| pair[0] + pair[1]));
        }
    }

    /// Increments of level `l` from the most recent [`draw`](Self::draw).
    pub fn increments(&self, level: usize) -> &[f64] {
        &self.levels[level]
    }

    /// Draws a path and returns `v̄_T` at every level.
    pub fn fte_terminals(
        &mut self,
        params: &CirParams,
        n_coarse: usize,
        extra_levels: u32,
        key: StreamKey,
    ) -> &[f64] {
        self.draw(params.horizon, n_coarse, extra_levels, key);
        self.terminals.clear();
        for (l, inc) in self
            .levels
            .iter()
            .enumerate()
            .take(extra_levels as usize + 1)
        {
            let dt = params.horizon / (n_coarse << l) as f64;
            self.terminals.push(fte_terminal(params, dt, inc).max(0.0));
        }
        &self.terminals
    }
}

/// FTE terminals on `N`, `2N` and (if `refine_factor > 2`) `N·refine_factor`
/// steps, all driven by the Brownian path of `key`.
pub fn simulate_coupled(
    params: &CirParams,
    grid_coarse: &Grid,
    refine_factor: usize,
    key: StreamKey,
) -> Result<CoupledPaths> {
    let levels = match power_of_two_levels(refine_factor) {
        Some(l) if l >= 1 => l,
        _ => {
            return Err(Error::InvalidSteps {
                steps: refine_factor,
                reason: "refine factor must be a power of two and at least 2",
            })
        }
    };
    let mut ws = CoupledWorkspace::new();
    let t = ws.fte_terminals(params, grid_coarse.steps(), levels, key);
    Ok(CoupledPaths {
        coarse_terminal: t[0],
        fine_terminal: t[1],
        reference_terminal: (levels > 1).then(|| t[levels as usize]),
    })
}
