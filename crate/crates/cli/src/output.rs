use std::fmt::Write as _;

use crate::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest decimal representation that parses back to the same `f64`.
/// Independent of locale.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `x` rounded to `digits` significant digits, in plain decimal notation
/// where reasonable.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i64;
    if !(-10..=15).contains(&magnitude) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Comment header recording the artifact version, command and full
/// configuration.
pub fn header(command: &str, cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# cirbench {VERSION}");
    let _ = writeln!(s, "# command={command}");
    for line in cfg.to_config_string().lines() {
        if line.starts_with("out=") {
            continue;
        }
        let _ = writeln!(s, "# {line}");
    }
    s
}
