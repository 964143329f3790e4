//! Time-decayed causality features.
//!
//! The interval `[t0, t]` is split into adjacent windows of length `delta`;
//! each window is scored with the causality metrics and the per-window
//! scores are combined with an exponential decay weight `e^{-sigma (t-t')}`
//! into one 4-dimensional feature vector per user.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};

use crate::action_log::CorpusIndex;
use crate::causal_metrics::{IntervalView, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::exec::{map_indices_mode, ExecMode};

pub const FEATURE_CSV_HEADER: &str = "user,xi_km,xi_rel,xi_nb,xi_wnb";

/// Default window length: one day.
pub const DEFAULT_DELTA: i64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayConfig {
    pub t0: i64,
    pub t: i64,
    pub delta: i64,
    pub sigma: f64,
}

impl DecayConfig {
    pub fn new(t0: i64, t: i64, delta: i64, sigma: f64) -> Result<Self> {
        if delta <= 0 {
            return Err(Error::InvalidArgument("delta must be > 0".into()));
        }
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidArgument("sigma must be >= 0 and finite".into()));
        }
        if t0 + delta > t {
            return Err(Error::InvalidArgument(
                "interval too short: need t0 + delta <= t".into(),
            ));
        }
        Ok(DecayConfig { t0, t, delta, sigma })
    }

    /// Defaults sigma to 1/delta.
    pub fn with_default_sigma(t0: i64, t: i64, delta: i64) -> Result<Self> {
        Self::new(t0, t, delta, 1.0 / delta as f64)
    }
}

/// Per-user feature vector ordered (xi_K&M, xi_rel, xi_nb, xi_wnb).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub user: String,
    pub xi: [f64; 4],
}

/// Window ends t' = t0 + j*delta for j >= 1 with t' <= t - delta, ascending;
/// each window covers [t' - delta, t'].
pub fn window_sequence(cfg: &DecayConfig) -> Vec<(i64, (i64, i64))> {
    let mut out = Vec::new();
    let mut j = 1i64;
    loop {
        let t_prime = cfg.t0 + j * cfg.delta;
        if t_prime > cfg.t - cfg.delta {
            break;
        }
        out.push((t_prime, (t_prime - cfg.delta, t_prime)));
        j += 1;
    }
    out
}

/// Extract decayed feature vectors for `users`, one per user, in ascending
/// user-id order. Windows without any cascade contribute 0.
pub fn extract_features(
    index: &CorpusIndex,
    cfg: &DecayConfig,
    users: &BTreeSet<String>,
) -> Result<Vec<FeatureVector>> {
    extract_features_mode(index, cfg, users, ExecMode::default())
}

pub fn extract_features_mode(
    index: &CorpusIndex,
    cfg: &DecayConfig,
    users: &BTreeSet<String>,
    mode: ExecMode,
) -> Result<Vec<FeatureVector>> {
    let windows = window_sequence(cfg);
    if windows.is_empty() {
        return Err(Error::InvalidArgument("window sequence is empty".into()));
    }
    let user_list: Vec<&String> = users.iter().collect();

    // Score each window independently; a window is a map user -> 4 scores.
    let per_window: Vec<Result<Vec<[f64; 4]>>> = map_indices_mode(mode, windows.len(), |w| {
        let (_, (ws, we)) = windows[w];
        let view = IntervalView::new(index, ws, we)?;
        if view.cascade_count() == 0 {
            return Ok(vec![[0.0; 4]; user_list.len()]);
        }
        let profiles = view.profiles(DEFAULT_ALPHA)?;
        let mut scores = vec![[0.0; 4]; user_list.len()];
        for p in profiles {
            if let Ok(pos) = user_list.binary_search_by(|u| u.as_str().cmp(&p.user)) {
                scores[pos] = [p.e_km, p.e_rel, p.e_nb, p.e_wnb];
            }
        }
        Ok(scores)
    });
    let per_window: Vec<Vec<[f64; 4]>> =
        per_window.into_iter().collect::<Result<_>>()?;

    let n_windows = windows.len() as f64;
    let mut out = Vec::with_capacity(user_list.len());
    for (pos, user) in user_list.iter().enumerate() {
        let mut xi = [0.0f64; 4];
        for (w, (t_prime, _)) in windows.iter().enumerate() {
            let weight = (-cfg.sigma * (cfg.t - t_prime) as f64).exp();
            for k in 0..4 {
                xi[k] += weight * per_window[w][pos][k];
            }
        }
        for v in &mut xi {
            *v /= n_windows;
        }
        out.push(FeatureVector {
            user: (*user).clone(),
            xi,
        });
    }
    Ok(out)
}

/// Write feature vectors as CSV with round-trip-exact floats.
pub fn write_feature_csv<W: Write>(mut out: W, features: &[FeatureVector]) -> Result<()> {
    writeln!(out, "{FEATURE_CSV_HEADER}")?;
    for f in features {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            f.user, f.xi[0], f.xi[1], f.xi[2], f.xi[3]
        )?;
    }
    Ok(())
}

pub fn read_feature_csv<R: Read>(source: R) -> Result<Vec<FeatureVector>> {
    let mut lines = BufReader::new(source).lines();
    let header = lines
        .next()
        .transpose()?
        .unwrap_or_default();
    if header.trim_end_matches('\r') != FEATURE_CSV_HEADER {
        return Err(Error::Header {
            expected: FEATURE_CSV_HEADER.to_string(),
            found: header,
        });
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "feature CSV row has {} fields, expected 5",
                fields.len()
            )));
        }
        let mut xi = [0.0f64; 4];
        for (k, v) in fields[1..].iter().enumerate() {
            xi[k] = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad float `{v}`")))?;
        }
        out.push(FeatureVector {
            user: fields[0].to_string(),
            xi,
        });
    }
    Ok(out)
}
