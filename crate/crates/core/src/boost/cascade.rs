//! Soft-cascade rejection thresholds.

use super::{BoostError, BoostedEnsemble};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CascadeMode {
    /// Thresholds calibrated on the training positives, lowered by `delta`.
    Calibrated { delta: f64 },
    /// The same threshold after every tree.
    Constant(f64),
    /// No early rejection.
    None,
}

impl CascadeMode {
    pub fn validate(&self) -> Result<(), BoostError> {
        match *self {
            CascadeMode::Calibrated { delta } if delta.is_nan() || delta < 0.0 => {
                Err(BoostError::InvalidConfig(format!("cascade delta {delta} must be non-negative")))
            }
            CascadeMode::Constant(v) if v.is_nan() => Err(BoostError::InvalidConfig("cascade threshold is NaN".into())),
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for CascadeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CascadeMode::Calibrated { delta } => write!(f, "calibrated:{delta}"),
            CascadeMode::Constant(v) => write!(f, "constant:{v}"),
            CascadeMode::None => write!(f, "none"),
        }
    }
}

impl std::str::FromStr for CascadeMode {
    type Err = BoostError;

    /// `none`, `calibrated[:delta]` or `constant:value`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BoostError::InvalidConfig(format!("bad cascade mode {s:?}"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let mode = match s.trim().split_once(':') {
            None if s.trim() == "none" => CascadeMode::None,
            None if s.trim() == "calibrated" => CascadeMode::Calibrated { delta: 0.05 },
            Some(("calibrated", d)) => CascadeMode::Calibrated { delta: num(d)? },
            Some(("constant", v)) => CascadeMode::Constant(num(v)?),
            _ => return Err(bad()),
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Sets `thresholds[t]` to the smallest prefix score after tree `t` over
/// the positives whose full score is at least `min_score`, minus `delta`.
/// With no such positive nothing is rejected.
pub fn calibrate_cascade(ens: &mut BoostedEnsemble, positives: &[&[f64]], min_score: f64, delta: f64) -> Result<(), BoostError> {
    if positives.is_empty() {
        return Err(BoostError::EmptyPositives);
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(BoostError::InvalidConfig(format!("cascade delta {delta} must be non-negative")));
    }
    if let Some(p) = positives.iter().find(|p| p.len() != ens.dim) {
        return Err(BoostError::DimensionMismatch {
            expected: ens.dim,
            found: p.len(),
        });
    }
    let mut mins = vec![f64::INFINITY; ens.len()];
    let mut retained = 0;
    for p in positives {
        let prefix = ens.prefix_scores(p);
        if prefix.last().map_or(true, |&s| s >= min_score) {
            retained += 1;
            for (m, s) in mins.iter_mut().zip(prefix) {
                *m = m.min(s);
            }
        }
    }
    ens.thresholds = if retained == 0 {
        vec![f64::NEG_INFINITY; ens.len()]
    } else {
        mins.into_iter().map(|m| m - delta).collect()
    };
    Ok(())
}

/// Applies `mode` to a trained ensemble; calibration keeps every positive.
pub(crate) fn apply_cascade_mode(ens: &mut BoostedEnsemble, mode: &CascadeMode, positives: &[&[f64]]) -> Result<(), BoostError> {
    match *mode {
        CascadeMode::Calibrated { delta } => calibrate_cascade(ens, positives, f64::NEG_INFINITY, delta),
        CascadeMode::Constant(v) => {
            ens.thresholds = vec![v; ens.len()];
            Ok(())
        }
        CascadeMode::None => {
            ens.thresholds = vec![f64::NEG_INFINITY; ens.len()];
            Ok(())
        }
    }
}
