//! Reproducible synthetic action logs with planted pathogenic users.
//!
//! PSM users are pulled toward the earliest positions of viral cascades;
//! normal cascades draw participants uniformly. Generation is a pure
//! function of the config: the PRNG is ChaCha8 (a counter-based stream
//! cipher generator), so streams are reproducible across versions.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action_log::ActionRecord;
use crate::error::{Error, Result};

pub const TRUTH_CSV_HEADER: &str = "user,label";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_users: usize,
    /// Fraction of users planted as PSM; the PSM count is the ceiling of
    /// `n_users * psm_fraction`.
    pub psm_fraction: f64,
    pub n_messages: usize,
    pub viral_fraction: f64,
    pub viral_size_range: (usize, usize),
    pub normal_size_range: (usize, usize),
    /// Corpus time horizon in seconds.
    pub horizon: i64,
    /// How strongly PSM users are pulled toward early positions of viral
    /// cascades; 1 means no pull.
    pub early_bias: f64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 1 || self.n_messages < 1 {
            return Err(Error::InvalidArgument("counts must be >= 1".into()));
        }
        for f in [self.psm_fraction, self.viral_fraction] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::InvalidArgument("fractions must lie in (0,1)".into()));
            }
        }
        for (lo, hi) in [self.viral_size_range, self.normal_size_range] {
            if lo < 1 || lo > hi {
                return Err(Error::InvalidArgument("bad size range".into()));
            }
        }
        if self.viral_size_range.1 > self.n_users || self.normal_size_range.1 > self.n_users {
            return Err(Error::InvalidArgument(
                "cascade size exceeds user count".into(),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidArgument("horizon must be >= 1".into()));
        }
        if self.early_bias < 1.0 {
            return Err(Error::InvalidArgument("early_bias must be >= 1".into()));
        }
        if (self.n_users as f64 * self.psm_fraction).ceil() < 1.0 {
            return Err(Error::InvalidArgument("need at least one PSM user".into()));
        }
        Ok(())
    }

    pub fn psm_count(&self) -> usize {
        (self.n_users as f64 * self.psm_fraction).ceil() as usize
    }
}

/// Ground truth label per user: true = PSM.
pub type TruthMap = BTreeMap<String, bool>;

fn user_id(i: usize, width: usize) -> String {
    format!("u{i:0width$}")
}

fn message_id(i: usize, width: usize) -> String {
    format!("m{i:0width$}")
}

/// Weighted sample without replacement from `pool`; PSM entries carry
/// weight `w`, others 1.
fn draw_weighted(pool: &mut Vec<usize>, is_psm: &[bool], w: f64, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = pool
        .iter()
        .map(|&u| if is_psm[u] { w } else { 1.0 })
        .sum();
    let mut target = rng.gen::<f64>() * total;
    let mut pick = pool.len() - 1;
    for (pos, &u) in pool.iter().enumerate() {
        target -= if is_psm[u] { w } else { 1.0 };
        if target <= 0.0 {
            pick = pos;
            break;
        }
    }
    pool.swap_remove(pick)
}

/// Generate a deterministic synthetic action log plus its truth map.
pub fn generate(cfg: &SynthConfig) -> Result<(Vec<ActionRecord>, TruthMap)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let uw = cfg.n_users.to_string().len();
    let mw = cfg.n_messages.to_string().len();

    // Plant PSM users: a random subset of the configured size.
    let n_psm = cfg.psm_count();
    let mut shuffled: Vec<usize> = (0..cfg.n_users).collect();
    shuffled.shuffle(&mut rng);
    let mut is_psm = vec![false; cfg.n_users];
    for &u in shuffled.iter().take(n_psm) {
        is_psm[u] = true;
    }

    let n_viral = ((cfg.n_messages as f64 * cfg.viral_fraction).round() as usize)
        .clamp(1, cfg.n_messages);

    let mut records = Vec::new();
    let mut appeared = vec![false; cfg.n_users];
    for m in 0..cfg.n_messages {
        let viral = m < n_viral;
        let (lo, hi) = if viral {
            cfg.viral_size_range
        } else {
            cfg.normal_size_range
        };
        let size = rng.gen_range(lo..=hi);

        // Cascades are temporally local: a random start, then a short span
        // so a cascade usually sits inside one analysis window.
        let span = (cfg.horizon / 24).max(1);
        let start = rng.gen_range(0..=(cfg.horizon - 1).max(0));
        let mut times: Vec<i64> = (0..size)
            .map(|_| start + rng.gen_range(0..=span))
            .collect();
        times.sort_unstable();

        let mut pool: Vec<usize> = (0..cfg.n_users).collect();
        // Early = the first half: at the default key-user fraction of 0.5
        // these are exactly the positions that make someone a key user.
        let early_slots = (size as f64 / 2.0).ceil() as usize;
        let message = message_id(m, mw);
        for (pos, &t) in times.iter().enumerate() {
            let w = if viral && pos < early_slots {
                cfg.early_bias
            } else {
                1.0
            };
            let u = draw_weighted(&mut pool, &is_psm, w, &mut rng);
            appeared[u] = true;
            records.push(ActionRecord {
                user: user_id(u, uw),
                message: message.clone(),
                time: t,
            });
        }
    }

    // Every user appears at least once: late joiners are appended to
    // normal cascades they are not yet part of.
    for u in 0..cfg.n_users {
        if appeared[u] {
            continue;
        }
        let m = if cfg.n_messages > n_viral {
            n_viral + rng.gen_range(0..cfg.n_messages - n_viral)
        } else {
            rng.gen_range(0..cfg.n_messages)
        };
        records.push(ActionRecord {
            user: user_id(u, uw),
            message: message_id(m, mw),
            time: rng.gen_range(0..=cfg.horizon),
        });
    }

    let truth: TruthMap = (0..cfg.n_users)
        .map(|u| (user_id(u, uw), is_psm[u]))
        .collect();
    Ok((records, truth))
}

/// Write the generated log as the standard action-log CSV.
pub fn write_action_csv<W: Write>(mut out: W, records: &[ActionRecord]) -> Result<()> {
    writeln!(out, "{}", crate::action_log::CSV_HEADER)?;
    for r in records {
        writeln!(out, "{},{},{}", r.user, r.message, r.time)?;
    }
    Ok(())
}

/// Write the truth map as CSV `user,label` with label in {psm, normal}.
pub fn write_truth_csv<W: Write>(mut out: W, truth: &TruthMap) -> Result<()> {
    writeln!(out, "{TRUTH_CSV_HEADER}")?;
    for (user, &psm) in truth {
        writeln!(out, "{},{}", user, if psm { "psm" } else { "normal" })?;
    }
    Ok(())
}

pub fn read_truth_csv<R: std::io::Read>(source: R) -> Result<TruthMap> {
    use std::io::{BufRead, BufReader};
    let mut lines = BufReader::new(source).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim_end_matches('\r') != TRUTH_CSV_HEADER {
        return Err(Error::Header {
            expected: TRUTH_CSV_HEADER.to_string(),
            found: header,
        });
    }
    let mut out = TruthMap::new();
    for line in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (user, label) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidArgument(format!("bad truth row `{line}`")))?;
        let psm = match label {
            "psm" => true,
            "normal" => false,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown truth label `{other}`"
                )))
            }
        };
        out.insert(user.to_string(), psm);
    }
    Ok(out)
}
