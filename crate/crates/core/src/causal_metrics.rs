//! Per-user prima-facie causality scores over a time interval.
//!
//! An [`IntervalView`] restricts a [`CorpusIndex`] to actions inside
//! `[start, end]` and precomputes everything the four metrics need: per-user
//! viral probabilities, prima-facie status, related-user sets and pairwise
//! precedence counts. All summations run in ascending user-id order so
//! results are deterministic regardless of thread schedule.

use std::collections::HashMap;
use std::io::Write;

use crate::action_log::CorpusIndex;
use crate::error::{Error, Result};

/// Default guard for the relative-likelihood score's denominators.
pub const DEFAULT_ALPHA: f64 = 1e-9;

/// Pairwise precedence probabilities for users `i`, `j`, with the raw
/// denominators kept for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub i: String,
    pub j: String,
    /// P(viral | i acts strictly before j).
    pub p_ij: f64,
    /// P(viral | j acts and i does not act strictly before j).
    pub p_not_ij: f64,
    pub den_ij: usize,
    pub den_not_ij: usize,
}

/// Per-user causality scores over one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalityProfile {
    pub user: String,
    pub e_km: f64,
    pub e_rel: f64,
    pub e_nb: f64,
    pub e_wnb: f64,
    pub related_count: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct PairCounts {
    before: u32,
    before_vir: u32,
}

#[derive(Debug)]
struct ViewCascade {
    viral: bool,
    /// (user index, action time), sorted by time then user id.
    participants: Vec<(u32, i64)>,
}

/// A corpus restricted to `[start, end]`; all derived quantities (viral
/// status, key users, probabilities) are computed from in-interval actions
/// only, with the parent index's `theta` and `phi`.
#[derive(Debug)]
pub struct IntervalView {
    start: i64,
    end: i64,
    users: Vec<String>,
    cascades: Vec<ViewCascade>,
    n_viral: usize,
    /// Per user: (# messages where key user, # of those viral).
    key_counts: Vec<(u32, u32)>,
    /// Per user: (# messages participated, # of those viral).
    msg_counts: Vec<(u32, u32)>,
    rho_i: Vec<f64>,
    /// Related users R(i), ascending.
    r_sets: Vec<Vec<u32>>,
    /// Q(j) = { i : j in R(i) }, ascending.
    q_sets: Vec<Vec<u32>>,
    pair_counts: HashMap<(u32, u32), PairCounts>,
}

impl IntervalView {
    pub fn new(index: &CorpusIndex, start: i64, end: i64) -> Result<Self> {
        if start > end {
            return Err(Error::InvalidArgument("interval start > end".into()));
        }
        let theta = index.theta();
        let phi = index.phi();

        // Restrict cascades to the window; empty cascades drop out of M.
        let mut users: Vec<String> = Vec::new();
        let mut raw: Vec<Vec<(String, i64)>> = Vec::new();
        for cascade in index.cascades().values() {
            let acts: Vec<(String, i64)> = cascade
                .actions
                .iter()
                .filter(|&&(_, t)| t >= start && t <= end)
                .cloned()
                .collect();
            if !acts.is_empty() {
                for (u, _) in &acts {
                    users.push(u.clone());
                }
                raw.push(acts);
            }
        }
        users.sort();
        users.dedup();
        let idx_of = |u: &str| users.binary_search_by(|p| p.as_str().cmp(u)).unwrap() as u32;

        let mut cascades = Vec::with_capacity(raw.len());
        let mut n_viral = 0usize;
        for acts in raw {
            let mut participants: Vec<(u32, i64)> =
                acts.iter().map(|(u, t)| (idx_of(u), *t)).collect();
            // Index order equals id order, so this tie-break matches the
            // ascending-user-id rule.
            participants.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
            let viral = participants.len() >= theta;
            if viral {
                n_viral += 1;
            }
            cascades.push(ViewCascade {
                viral,
                participants,
            });
        }

        let n_users = users.len();
        let mut key_counts = vec![(0u32, 0u32); n_users];
        let mut msg_counts = vec![(0u32, 0u32); n_users];
        let mut key_flags: Vec<Vec<bool>> = Vec::with_capacity(cascades.len());
        for c in &cascades {
            let n = c.participants.len();
            let flags: Vec<bool> = c
                .participants
                .iter()
                .map(|&(_, t)| {
                    let after = c.participants.iter().filter(|&&(_, tj)| tj > t).count();
                    after as f64 >= phi * n as f64
                })
                .collect();
            for (k, &(u, _)) in c.participants.iter().enumerate() {
                let mc = &mut msg_counts[u as usize];
                mc.0 += 1;
                if c.viral {
                    mc.1 += 1;
                }
                if flags[k] {
                    let kc = &mut key_counts[u as usize];
                    kc.0 += 1;
                    if c.viral {
                        kc.1 += 1;
                    }
                }
            }
            key_flags.push(flags);
        }

        let rho = if cascades.is_empty() {
            0.0
        } else {
            n_viral as f64 / cascades.len() as f64
        };
        let rho_i: Vec<f64> = key_counts
            .iter()
            .map(|&(den, num)| if den == 0 { 0.0 } else { num as f64 / den as f64 })
            .collect();

        // R(i): ordered prima-facie pairs inside viral cascades.
        let mut r_sets: Vec<Vec<u32>> = vec![Vec::new(); n_users];
        for (c, flags) in cascades.iter().zip(&key_flags) {
            if !c.viral {
                continue;
            }
            let prima: Vec<(u32, i64)> = c
                .participants
                .iter()
                .zip(flags)
                .filter(|&(&(u, _), &k)| k && rho_i[u as usize] > rho)
                .map(|(&p, _)| p)
                .collect();
            for (a, &(i, ti)) in prima.iter().enumerate() {
                for &(j, tj) in &prima[a + 1..] {
                    if ti < tj {
                        r_sets[i as usize].push(j);
                    }
                }
            }
        }
        for r in &mut r_sets {
            r.sort_unstable();
            r.dedup();
        }
        let mut q_sets: Vec<Vec<u32>> = vec![Vec::new(); n_users];
        for (i, r) in r_sets.iter().enumerate() {
            for &j in r {
                q_sets[j as usize].push(i as u32);
            }
        }
        for q in &mut q_sets {
            q.sort_unstable();
        }

        // Precedence counts for every related pair, over all messages.
        let mut pair_counts: HashMap<(u32, u32), PairCounts> = HashMap::new();
        for (i, r) in r_sets.iter().enumerate() {
            for &j in r {
                pair_counts.insert((i as u32, j), PairCounts::default());
            }
        }
        if !pair_counts.is_empty() {
            for c in &cascades {
                let ps = &c.participants;
                for (a, &(i, ti)) in ps.iter().enumerate() {
                    for &(j, tj) in &ps[a + 1..] {
                        if ti < tj {
                            if let Some(pc) = pair_counts.get_mut(&(i, j)) {
                                pc.before += 1;
                                if c.viral {
                                    pc.before_vir += 1;
                                }
                            }
                        }
                    }
                }
            }
        }

        Ok(IntervalView {
            start,
            end,
            users,
            cascades,
            n_viral,
            key_counts,
            msg_counts,
            rho_i,
            r_sets,
            q_sets,
            pair_counts,
        })
    }

    pub fn start(&self) -> i64 {
        self.start
    }

    pub fn end(&self) -> i64 {
        self.end
    }

    pub fn cascade_count(&self) -> usize {
        self.cascades.len()
    }

    /// Users with at least one in-interval action, ascending by id.
    pub fn users(&self) -> &[String] {
        &self.users
    }

    fn user_idx(&self, user: &str) -> Option<u32> {
        self.users
            .binary_search_by(|p| p.as_str().cmp(user))
            .ok()
            .map(|i| i as u32)
    }

    /// rho = |M_vir| / |M| over the view.
    pub fn prior_viral_probability(&self) -> Result<f64> {
        if self.cascades.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(self.n_viral as f64 / self.cascades.len() as f64)
    }

    /// rho_i: fraction of messages where `i` is a key user that went viral;
    /// 0 when `i` is never a key user.
    pub fn user_viral_probability(&self, user: &str) -> f64 {
        match self.user_idx(user) {
            Some(i) => self.rho_i[i as usize],
            None => 0.0,
        }
    }

    /// Number of messages where `user` is a key user within the view.
    pub fn key_message_count(&self, user: &str) -> usize {
        match self.user_idx(user) {
            Some(i) => self.key_counts[i as usize].0 as usize,
            None => 0,
        }
    }

    fn pair_counts_of(&self, i: u32, j: u32) -> PairCounts {
        if let Some(pc) = self.pair_counts.get(&(i, j)) {
            return *pc;
        }
        let mut pc = PairCounts::default();
        for c in &self.cascades {
            let mut ti = None;
            let mut tj = None;
            for &(u, t) in &c.participants {
                if u == i {
                    ti = Some(t);
                } else if u == j {
                    tj = Some(t);
                }
            }
            if let (Some(ti), Some(tj)) = (ti, tj) {
                if ti < tj {
                    pc.before += 1;
                    if c.viral {
                        pc.before_vir += 1;
                    }
                }
            }
        }
        pc
    }

    fn pair_stats_idx(&self, i: u32, j: u32) -> PairStats {
        let pc = self.pair_counts_of(i, j);
        let (j_msgs, j_vir) = self.msg_counts[j as usize];
        let den_ij = pc.before as usize;
        let num_ij = pc.before_vir;
        let den_not = (j_msgs - pc.before) as usize;
        let num_not = j_vir - pc.before_vir;
        let p_ij = if den_ij == 0 {
            0.0
        } else {
            num_ij as f64 / den_ij as f64
        };
        let p_not_ij = if den_not == 0 {
            0.0
        } else {
            num_not as f64 / den_not as f64
        };
        PairStats {
            i: self.users[i as usize].clone(),
            j: self.users[j as usize].clone(),
            p_ij,
            p_not_ij,
            den_ij,
            den_not_ij: den_not,
        }
    }

    /// p_{i,j} and p_{not i,j}: viral fractions conditioned on `i` strictly
    /// preceding `j`, and on `j` acting without `i` strictly preceding.
    pub fn pair_probabilities(&self, i: &str, j: &str) -> Result<PairStats> {
        if i == j {
            return Err(Error::InvalidArgument("pair requires i != j".into()));
        }
        match (self.user_idx(i), self.user_idx(j)) {
            (Some(ii), Some(jj)) => Ok(self.pair_stats_idx(ii, jj)),
            (None, Some(jj)) => {
                // i never acts: every message of j counts toward p_not_ij.
                let (j_msgs, j_vir) = self.msg_counts[jj as usize];
                let p_not_ij = if j_msgs == 0 {
                    0.0
                } else {
                    j_vir as f64 / j_msgs as f64
                };
                Ok(PairStats {
                    i: i.to_string(),
                    j: j.to_string(),
                    p_ij: 0.0,
                    p_not_ij,
                    den_ij: 0,
                    den_not_ij: j_msgs as usize,
                })
            }
            (_, None) => Ok(PairStats {
                i: i.to_string(),
                j: j.to_string(),
                p_ij: 0.0,
                p_not_ij: 0.0,
                den_ij: 0,
                den_not_ij: 0,
            }),
        }
    }

    /// R(i): users that `i` strictly precedes in some viral cascade where
    /// both are prima-facie causal.
    pub fn related_users(&self, user: &str) -> Vec<String> {
        match self.user_idx(user) {
            Some(i) => self.r_sets[i as usize]
                .iter()
                .map(|&j| self.users[j as usize].clone())
                .collect(),
            None => Vec::new(),
        }
    }

    fn km_idx(&self, i: u32) -> f64 {
        let r = &self.r_sets[i as usize];
        if r.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for &j in r {
            let s = self.pair_stats_idx(i, j);
            sum += s.p_ij - s.p_not_ij;
        }
        sum / r.len() as f64
    }

    /// Mean of p_ij - p_not_ij over R(i); 0 when R(i) is empty.
    pub fn score_km(&self, user: &str) -> f64 {
        match self.user_idx(user) {
            Some(i) => self.km_idx(i),
            None => 0.0,
        }
    }

    fn rel_idx(&self, i: u32, alpha: f64) -> f64 {
        let r = &self.r_sets[i as usize];
        if r.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for &j in r {
            let s = self.pair_stats_idx(i, j);
            sum += relative_likelihood(s.p_ij, s.p_not_ij, alpha);
        }
        sum / r.len() as f64
    }

    /// Relative-likelihood score: mean of S(i,j) over R(i).
    pub fn score_rel(&self, user: &str, alpha: f64) -> Result<f64> {
        if alpha <= 0.0 {
            return Err(Error::InvalidArgument("alpha must be > 0".into()));
        }
        Ok(match self.user_idx(user) {
            Some(i) => self.rel_idx(i, alpha),
            None => 0.0,
        })
    }

    fn q_idx(&self, j: u32) -> &[u32] {
        &self.q_sets[j as usize]
    }

    /// Neighborhood score: mean of E_K&M(i) over Q(j) = { i : j in R(i) }.
    pub fn score_nb(&self, user: &str, km_scores: &HashMap<String, f64>) -> Result<f64> {
        let Some(j) = self.user_idx(user) else {
            return Ok(0.0);
        };
        let q = self.q_idx(j);
        if q.is_empty() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for &i in q {
            let name = &self.users[i as usize];
            let v = km_scores.get(name).ok_or_else(|| {
                Error::Internal(format!("missing K&M score for user {name} in Q({user})"))
            })?;
            sum += v;
        }
        Ok(sum / q.len() as f64)
    }

    /// Weighted neighborhood score: weighted mean of E_K&M over Q(j);
    /// 0 when Q(j) is empty or all weights are zero.
    pub fn score_wnb(
        &self,
        user: &str,
        km_scores: &HashMap<String, f64>,
        weights: &HashMap<String, f64>,
    ) -> Result<f64> {
        let Some(j) = self.user_idx(user) else {
            return Ok(0.0);
        };
        let q = self.q_idx(j);
        if q.is_empty() {
            return Ok(0.0);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in q {
            let name = &self.users[i as usize];
            let v = km_scores.get(name).ok_or_else(|| {
                Error::Internal(format!("missing K&M score for user {name} in Q({user})"))
            })?;
            let w = weights.get(name).copied().ok_or_else(|| {
                Error::Internal(format!("missing weight for user {name} in Q({user})"))
            })?;
            if w < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "negative weight for user {name}"
                )));
            }
            num += w * v;
            den += w;
        }
        if den == 0.0 {
            return Ok(0.0);
        }
        Ok(num / den)
    }

    /// All four scores for every user in the view. Default weights
    /// w_i = |R(i)|.
    pub fn profiles(&self, alpha: f64) -> Result<Vec<CausalityProfile>> {
        if alpha <= 0.0 {
            return Err(Error::InvalidArgument("alpha must be > 0".into()));
        }
        let n = self.users.len();
        let km: Vec<f64> = crate::exec::map_indices(n, |i| self.km_idx(i as u32));
        let rel: Vec<f64> = crate::exec::map_indices(n, |i| self.rel_idx(i as u32, alpha));
        let nb_wnb: Vec<(f64, f64)> = crate::exec::map_indices(n, |j| {
            let q = self.q_idx(j as u32);
            if q.is_empty() {
                return (0.0, 0.0);
            }
            let mut sum = 0.0;
            let mut wsum = 0.0;
            let mut wden = 0.0;
            for &i in q {
                let v = km[i as usize];
                let w = self.r_sets[i as usize].len() as f64;
                sum += v;
                wsum += w * v;
                wden += w;
            }
            let nb = sum / q.len() as f64;
            let wnb = if wden == 0.0 { 0.0 } else { wsum / wden };
            (nb, wnb)
        });
        Ok((0..n)
            .map(|i| CausalityProfile {
                user: self.users[i].clone(),
                e_km: km[i],
                e_rel: rel[i],
                e_nb: nb_wnb[i].0,
                e_wnb: nb_wnb[i].1,
                related_count: self.r_sets[i].len(),
            })
            .collect())
    }

    /// Debug dump of pair statistics for every related pair, as CSV.
    pub fn dump_pair_stats<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,j,p_ij,p_not_ij,den_ij,den_not_ij")?;
        for (i, r) in self.r_sets.iter().enumerate() {
            for &j in r {
                let s = self.pair_stats_idx(i as u32, j);
                writeln!(
                    out,
                    "{},{},{:.16e},{:.16e},{},{}",
                    s.i, s.j, s.p_ij, s.p_not_ij, s.den_ij, s.den_not_ij
                )?;
            }
        }
        Ok(())
    }
}

/// Eq-6-style relative likelihood with the small-denominator guard applied
/// to both branches.
pub fn relative_likelihood(p_ij: f64, p_not_ij: f64, alpha: f64) -> f64 {
    if p_ij > p_not_ij {
        p_ij / (p_not_ij + alpha) - 1.0
    } else if p_ij == 0.0 {
        1.0 - p_not_ij / alpha
    } else {
        1.0 - p_not_ij / p_ij
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action_log::{ActionRecord, CorpusIndex};

    fn rec(u: &str, m: &str, t: i64) -> ActionRecord {
        ActionRecord {
            user: u.into(),
            message: m.into(),
            time: t,
        }
    }

    fn view_phi(records: &[ActionRecord], theta: usize, phi: f64) -> IntervalView {
        let idx = CorpusIndex::build(records, theta, phi).unwrap();
        let end = records.iter().map(|r| r.time).max().unwrap_or(0);
        IntervalView::new(&idx, 0, end).unwrap()
    }

    fn view(records: &[ActionRecord], theta: usize) -> IntervalView {
        view_phi(records, theta, 0.5)
    }

    #[test]
    fn prior_probability_ratio() {
        // 6 cascades, 3 viral (theta=2)
        let mut records = Vec::new();
        for m in 0..3 {
            records.push(rec("a", &format!("v{m}"), 1));
            records.push(rec("b", &format!("v{m}"), 2));
        }
        for m in 0..3 {
            records.push(rec("a", &format!("n{m}"), 1));
        }
        let v = view(&records, 2);
        assert_eq!(v.prior_viral_probability().unwrap(), 0.5);
    }

    #[test]
    fn prior_probability_empty_corpus() {
        let idx = CorpusIndex::build(&[], 1, 0.5).unwrap();
        let v = IntervalView::new(&idx, 0, 10).unwrap();
        assert!(matches!(
            v.prior_viral_probability(),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn user_viral_probability_zero_denominator() {
        let records = vec![rec("a", "m", 1), rec("b", "m", 2)];
        let v = view(&records, 10);
        assert_eq!(v.user_viral_probability("zzz"), 0.0);
    }

    #[test]
    fn pair_rejects_equal_users() {
        let records = vec![rec("a", "m", 1)];
        let v = view(&records, 1);
        assert!(v.pair_probabilities("a", "a").is_err());
    }

    #[test]
    fn pair_absent_i_branch() {
        // j acts in 3 messages, i never acts, 1 viral (theta=2).
        let records = vec![
            rec("j", "m1", 1),
            rec("x", "m1", 2),
            rec("j", "m2", 1),
            rec("j", "m3", 1),
        ];
        let v = view(&records, 2);
        let s = v.pair_probabilities("i", "j").unwrap();
        assert_eq!(s.p_ij, 0.0);
        assert!((s.p_not_ij - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pair_i_before_j_both_viral() {
        let records = vec![
            rec("i", "a", 1),
            rec("j", "a", 2),
            rec("i", "b", 1),
            rec("j", "b", 2),
        ];
        let v = view(&records, 2);
        let s = v.pair_probabilities("i", "j").unwrap();
        assert_eq!(s.p_ij, 1.0);
    }

    #[test]
    fn relative_likelihood_branches() {
        assert_eq!(relative_likelihood(0.5, 0.5, 1e-9), 0.0);
        let s = relative_likelihood(0.8, 0.0, 1e-9);
        assert!((s - (0.8 / 1e-9 - 1.0)).abs() / s < 1e-12);
        // guarded else branch at p_ij = 0
        assert_eq!(relative_likelihood(0.0, 0.5, 1e-9), 1.0 - 0.5 / 1e-9);
    }

    #[test]
    fn related_users_precedence_asymmetry() {
        // Viral cascade i,j,k with phi=0.3: i and j are key users, k is not.
        // The extra non-viral cascade keeps rho below 1 so rho_i > rho.
        let records = vec![
            rec("i", "v", 1),
            rec("j", "v", 2),
            rec("k", "v", 3),
            rec("x", "n", 1),
        ];
        let v = view_phi(&records, 3, 0.3);
        assert_eq!(v.related_users("i"), vec!["j".to_string()]);
        assert!(v.related_users("j").is_empty());
    }

    #[test]
    fn score_km_empty_related_set() {
        let records = vec![rec("a", "m", 1)];
        let v = view(&records, 5);
        assert_eq!(v.score_km("a"), 0.0);
    }

    #[test]
    fn score_nb_mean() {
        let mut km = HashMap::new();
        km.insert("a".to_string(), 0.2);
        km.insert("b".to_string(), 0.4);
        // Q(j) = {a, b}: a and b both precede j in a viral cascade and all
        // three are prima facie (phi=0.4 over 5 participants makes a, b, j
        // key users).
        let records = vec![
            rec("a", "v1", 1),
            rec("b", "v1", 2),
            rec("j", "v1", 3),
            rec("y", "v1", 4),
            rec("z", "v1", 5),
            rec("x", "n", 1),
        ];
        let v = view_phi(&records, 5, 0.4);
        let got = v.score_nb("j", &km).unwrap();
        assert!((got - 0.3).abs() < 1e-15);
    }

    #[test]
    fn score_wnb_weighted_mean() {
        let records = vec![
            rec("a", "v1", 1),
            rec("b", "v1", 2),
            rec("j", "v1", 3),
            rec("y", "v1", 4),
            rec("z", "v1", 5),
            rec("x", "n", 1),
        ];
        let v = view_phi(&records, 5, 0.4);
        let mut km = HashMap::new();
        km.insert("a".to_string(), 0.0);
        km.insert("b".to_string(), 0.4);
        let mut w = HashMap::new();
        w.insert("a".to_string(), 1.0);
        w.insert("b".to_string(), 3.0);
        let got = v.score_wnb("j", &km, &w).unwrap();
        assert!((got - 0.3).abs() < 1e-15);

        // uniform weights reduce to score_nb
        let mut uw = HashMap::new();
        uw.insert("a".to_string(), 2.0);
        uw.insert("b".to_string(), 2.0);
        assert_eq!(
            v.score_wnb("j", &km, &uw).unwrap(),
            v.score_nb("j", &km).unwrap()
        );
    }

    #[test]
    fn score_wnb_negative_weight_rejected() {
        let records = vec![
            rec("a", "v1", 1),
            rec("j", "v1", 2),
            rec("k", "v1", 3),
            rec("x", "n", 1),
        ];
        let v = view_phi(&records, 3, 0.3);
        let mut km = HashMap::new();
        km.insert("a".to_string(), 0.1);
        let mut w = HashMap::new();
        w.insert("a".to_string(), -1.0);
        assert!(v.score_wnb("j", &km, &w).is_err());
    }
}
