//! Frame realizations and the SIC (peeling) decoder.
//!
//! Under the collision channel a slot holding exactly one packet copy is
//! decoded; every copy of a decoded packet is then cancelled from its other
//! slots. This is peeling on the user/slot bipartite graph, so decoding is
//! driven purely by per-slot occupancy counters.

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::degree::DegreeDistribution;
use crate::error::{IrsaError, Result};

/// Enumeration limit for [`exact_fer_small`].
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// How many users become active in a frame, independent of the load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum Activity {
    /// Infinite population: Poisson(g·m) active users.
    #[default]
    Poisson,
    /// `population` users, each active with probability g·m/population.
    Binomial { population: u64 },
    /// Exactly `count` active users, whatever the load.
    Fixed { count: usize },
}

impl Activity {
    /// Binds the selector to a load point.
    pub fn at_load(self, g: f64, m: usize) -> ActivityModel {
        let mean = g * m as f64;
        match self {
            Activity::Poisson => ActivityModel::Poisson { mean },
            Activity::Binomial { population } => ActivityModel::Binomial {
                population,
                prob: (mean / population as f64).min(1.0),
            },
            Activity::Fixed { count } => ActivityModel::Fixed(count),
        }
    }

    pub fn population(self) -> Option<u64> {
        match self {
            Activity::Binomial { population } => Some(population),
            _ => None,
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activity::Poisson => f.write_str("poisson"),
            Activity::Binomial { population } => write!(f, "binomial:{population}"),
            Activity::Fixed { count } => write!(f, "fixed:{count}"),
        }
    }
}

impl std::str::FromStr for Activity {
    type Err = IrsaError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || IrsaError::InvalidConfig(format!("unknown activity model {s:?}"));
        let s = s.trim();
        if s == "poisson" {
            return Ok(Activity::Poisson);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "binomial" => {
                let population = arg.trim().parse().map_err(|_| bad())?;
                if population == 0 {
                    return Err(bad());
                }
                Ok(Activity::Binomial { population })
            }
            "fixed" => Ok(Activity::Fixed {
                count: arg.trim().parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for Activity {
    type Error = IrsaError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Activity> for String {
    fn from(a: Activity) -> String {
        a.to_string()
    }
}

/// Active-user count distribution at a given load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivityModel {
    Poisson { mean: f64 },
    Binomial { population: u64, prob: f64 },
    Fixed(usize),
}

impl ActivityModel {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            ActivityModel::Poisson { mean } => {
                if mean <= 0.0 {
                    0
                } else {
                    Poisson::new(mean).expect("finite positive mean").sample(rng) as usize
                }
            }
            ActivityModel::Binomial { population, prob } => Binomial::new(population, prob)
                .expect("probability in [0, 1]")
                .sample(rng) as usize,
            ActivityModel::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveUser {
    pub id: usize,
    /// Distinct slot indices, ascending.
    pub slots: Vec<usize>,
}

/// Bipartite incidence between the active users of one frame and its slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameGraph {
    num_slots: usize,
    users: Vec<ActiveUser>,
}

impl FrameGraph {
    /// Validates and builds a frame. Slot sets are sorted; duplicate or
    /// out-of-range indices and repeated user ids are rejected.
    pub fn new(num_slots: usize, mut users: Vec<ActiveUser>) -> Result<Self> {
        if num_slots == 0 {
            return Err(IrsaError::InvalidFrame("frame needs at least one slot".into()));
        }
        let mut ids: Vec<usize> = users.iter().map(|u| u.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(IrsaError::InvalidFrame("duplicate user id".into()));
        }
        for user in &mut users {
            if user.slots.is_empty() {
                return Err(IrsaError::InvalidFrame(format!(
                    "user {} transmits no copies",
                    user.id
                )));
            }
            user.slots.sort_unstable();
            if user.slots.windows(2).any(|w| w[0] == w[1]) {
                return Err(IrsaError::InvalidFrame(format!(
                    "user {} repeats a slot",
                    user.id
                )));
            }
            if *user.slots.last().unwrap() >= num_slots {
                return Err(IrsaError::InvalidFrame(format!(
                    "user {} uses a slot outside [0, {num_slots})",
                    user.id
                )));
            }
        }
        Ok(Self { num_slots, users })
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn users(&self) -> &[ActiveUser] {
        &self.users
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_edges(&self) -> usize {
        self.users.iter().map(|u| u.slots.len()).sum()
    }

    /// Copy of the frame with user `id` removed.
    pub fn without_user(&self, id: usize) -> FrameGraph {
        FrameGraph {
            num_slots: self.num_slots,
            users: self.users.iter().filter(|u| u.id != id).cloned().collect(),
        }
    }

    /// Number of packet copies in each slot.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0; self.num_slots];
        for u in &self.users {
            for &s in &u.slots {
                occ[s] += 1;
            }
        }
        occ
    }

    /// Writes the debug dump: a `m=<slots>` header, then one
    /// `user_id<TAB>s1,s2,...` line per active user.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "m={}", self.num_slots)?;
        for u in &self.users {
            let slots: Vec<String> = u.slots.iter().map(|s| s.to_string()).collect();
            writeln!(w, "{}\t{}", u.id, slots.join(","))?;
        }
        Ok(())
    }

    pub fn to_dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("dump is ASCII")
    }

    pub fn read_dump<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: String| IrsaError::InvalidFrame(msg);
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty dump".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let num_slots = header
            .trim()
            .strip_prefix("m=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let mut users = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, slots) = line
                .split_once('\t')
                .ok_or_else(|| bad(format!("bad line {line:?}")))?;
            let id = id.trim().parse().map_err(|_| bad(format!("bad id in {line:?}")))?;
            let slots = slots
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<std::result::Result<Vec<usize>, _>>()
                .map_err(|_| bad(format!("bad slot list in {line:?}")))?;
            users.push(ActiveUser { id, slots });
        }
        Self::new(num_slots, users)
    }
}

/// Draws one frame: the active-user count from `activity`, each user's degree
/// i.i.d. from `dist`, and a uniform d-subset of the `m` slots per user.
pub fn generate_frame<R: Rng + ?Sized>(
    m: usize,
    dist: &DegreeDistribution,
    activity: &ActivityModel,
    rng: &mut R,
) -> Result<FrameGraph> {
    if m == 0 {
        return Err(IrsaError::InvalidFrame("frame needs at least one slot".into()));
    }
    let count = activity.draw(rng);
    let ids: Vec<usize> = match *activity {
        ActivityModel::Binomial { population, .. } if count > 0 => {
            let mut ids = index::sample(rng, population as usize, count).into_vec();
            ids.sort_unstable();
            ids
        }
        _ => (0..count).collect(),
    };
    let mut users = Vec::with_capacity(count);
    for id in ids {
        let degree = dist.sample(rng);
        if degree > m {
            return Err(IrsaError::DegreeExceedsSlots { degree, slots: m });
        }
        users.push(ActiveUser {
            id,
            slots: distinct_slots(m, degree, rng),
        });
    }
    Ok(FrameGraph {
        num_slots: m,
        users,
    })
}

/// Uniform random `d`-subset of `0..m`, ascending.
fn distinct_slots<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Vec<usize> {
    let mut slots = if 2 * d <= m {
        let mut picked = Vec::with_capacity(d);
        while picked.len() < d {
            let s = rng.random_range(0..m);
            if !picked.contains(&s) {
                picked.push(s);
            }
        }
        picked
    } else {
        index::sample(rng, m, d).into_vec()
    };
    slots.sort_unstable();
    slots
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DecodeOutcome {
    /// Ids of decoded users, in frame order.
    pub resolved: Vec<usize>,
    /// Ids of users stuck in the residual stopping set, in frame order.
    pub unresolved: Vec<usize>,
    /// Number of users peeled; one per serial round.
    pub iterations: usize,
}

impl DecodeOutcome {
    pub fn is_frame_error(&self) -> bool {
        !self.unresolved.is_empty()
    }
}

/// Runs SIC to completion, always taking the most recently exposed singleton
/// slot next.
pub fn sic_decode(frame: &FrameGraph) -> DecodeOutcome {
    peel(frame, |pending| pending.len() - 1)
}

/// SIC with the next singleton slot picked uniformly from those pending.
/// The resolved set does not depend on the order; this exists to check that.
pub fn sic_decode_random_order<R: Rng + ?Sized>(frame: &FrameGraph, rng: &mut R) -> DecodeOutcome {
    peel(frame, |pending| rng.random_range(0..pending.len()))
}

fn peel(frame: &FrameGraph, mut pick: impl FnMut(&[usize]) -> usize) -> DecodeOutcome {
    let m = frame.num_slots;
    let users = &frame.users;

    // slot -> users adjacency in CSR form
    let mut count = vec![0usize; m];
    for u in users {
        for &s in &u.slots {
            count[s] += 1;
        }
    }
    let mut start = vec![0usize; m + 1];
    for s in 0..m {
        start[s + 1] = start[s] + count[s];
    }
    let mut fill = start.clone();
    let mut members = vec![0usize; start[m]];
    for (ui, u) in users.iter().enumerate() {
        for &s in &u.slots {
            members[fill[s]] = ui;
            fill[s] += 1;
        }
    }

    let mut resolved = vec![false; users.len()];
    let mut pending: Vec<usize> = (0..m).filter(|&s| count[s] == 1).collect();
    let mut iterations = 0;
    while !pending.is_empty() {
        let at = pick(&pending);
        let slot = pending.swap_remove(at);
        if count[slot] != 1 {
            continue;
        }
        let ui = members[start[slot]..start[slot + 1]]
            .iter()
            .copied()
            .find(|&ui| !resolved[ui])
            .expect("singleton slot holds one unresolved user");
        resolved[ui] = true;
        iterations += 1;
        for &s in &users[ui].slots {
            count[s] -= 1;
            if count[s] == 1 {
                pending.push(s);
            }
        }
    }

    let mut out = DecodeOutcome {
        iterations,
        ..Default::default()
    };
    for (ui, u) in users.iter().enumerate() {
        if resolved[ui] {
            out.resolved.push(u.id);
        } else {
            out.unresolved.push(u.id);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn all_subsets(m: usize, d: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d {
            out.push(cur.clone());
            return;
        }
        for s in start..m {
            if m - s < d - cur.len() {
                break;
            }
            cur.push(s);
            rec(s + 1, m, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, d, &mut Vec::with_capacity(d), &mut out);
    out
}

/// Exact frame-error probability for users with the given fixed degrees,
/// by enumerating every joint slot assignment and decoding each one.
pub fn exact_fer_small(m: usize, degrees: &[usize]) -> Result<f64> {
    if m == 0 {
        return Err(IrsaError::InvalidFrame("frame needs at least one slot".into()));
    }
    for &d in degrees {
        if d == 0 {
            return Err(IrsaError::InvalidDegree(0));
        }
        if d > m {
            return Err(IrsaError::DegreeExceedsSlots { degree: d, slots: m });
        }
    }
    let assignments: f64 = degrees.iter().map(|&d| binomial(m, d)).product();
    if assignments > ENUMERATION_LIMIT as f64 {
        return Err(IrsaError::TooLargeToEnumerate {
            assignments,
            limit: ENUMERATION_LIMIT,
        });
    }
    if degrees.is_empty() {
        return Ok(0.0);
    }

    let choices: Vec<Vec<Vec<usize>>> = degrees.iter().map(|&d| all_subsets(m, d)).collect();
    let mut odometer = vec![0usize; degrees.len()];
    let mut errors = 0u64;
    let mut total = 0u64;
    loop {
        let users = odometer
            .iter()
            .enumerate()
            .map(|(id, &k)| ActiveUser {
                id,
                slots: choices[id][k].clone(),
            })
            .collect();
        let frame = FrameGraph { num_slots: m, users };
        if sic_decode(&frame).is_frame_error() {
            errors += 1;
        }
        total += 1;

        let mut i = 0;
        loop {
            if i == odometer.len() {
                return Ok(errors as f64 / total as f64);
            }
            odometer[i] += 1;
            if odometer[i] < choices[i].len() {
                break;
            }
            odometer[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn frame(m: usize, slot_sets: &[&[usize]]) -> FrameGraph {
        let users = slot_sets
            .iter()
            .enumerate()
            .map(|(id, s)| ActiveUser {
                id,
                slots: s.to_vec(),
            })
            .collect();
        FrameGraph::new(m, users).unwrap()
    }

    #[test]
    fn generates_fixed_count_frame() {
        let dist = DegreeDistribution::regular(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = generate_frame(5, &dist, &ActivityModel::Fixed(4), &mut rng).unwrap();
        assert_eq!(f.num_users(), 4);
        for u in f.users() {
            assert_eq!(u.slots.len(), 2);
            assert!(u.slots[0] < u.slots[1] && u.slots[1] < 5);
        }
    }

    #[test]
    fn empty_frame_decodes_trivially() {
        let dist = DegreeDistribution::named("lambda2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = generate_frame(10, &dist, &ActivityModel::Fixed(0), &mut rng).unwrap();
        assert!(f.users().is_empty());
        let out = sic_decode(&f);
        assert_eq!(out, DecodeOutcome::default());
        assert!(!out.is_frame_error());
    }

    #[test]
    fn degree_larger_than_frame_is_an_error() {
        let dist = DegreeDistribution::regular(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            generate_frame(2, &dist, &ActivityModel::Fixed(1), &mut rng),
            Err(IrsaError::DegreeExceedsSlots { degree: 3, slots: 2 })
        );
    }

    #[test]
    fn binomial_activity_uses_population_ids() {
        let dist = DegreeDistribution::regular(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = Activity::Binomial { population: 1000 }.at_load(0.5, 20);
        let f = generate_frame(20, &dist, &model, &mut rng).unwrap();
        assert!(f.users().iter().all(|u| u.id < 1000));
        assert!(f.users().windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn lone_user_is_resolved() {
        let out = sic_decode(&frame(2, &[&[0, 1]]));
        assert_eq!(out.resolved, vec![0]);
        assert!(out.unresolved.is_empty());
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn identical_pair_is_a_stopping_set() {
        let out = sic_decode(&frame(2, &[&[0, 1], &[0, 1]]));
        assert!(out.resolved.is_empty());
        assert_eq!(out.unresolved, vec![0, 1]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn peeling_clears_shared_slot() {
        let out = sic_decode(&frame(3, &[&[0, 1], &[1, 2]]));
        assert_eq!(out.resolved, vec![0, 1]);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn chain_needs_several_rounds() {
        // slots 1..=3 each hold two copies; peeling ripples along the chain
        let f = frame(5, &[&[0, 1], &[1, 2], &[2, 3], &[3, 4]]);
        let out = sic_decode(&f);
        assert!(out.unresolved.is_empty());
        assert_eq!(out.iterations, 4);
        // closing the chain into a cycle leaves nothing to start from
        let f = frame(4, &[&[0, 1], &[1, 2], &[2, 3], &[0, 3]]);
        assert_eq!(sic_decode(&f).unresolved.len(), 4);
    }

    #[test]
    fn rejects_malformed_frames() {
        let u = |id, slots: Vec<usize>| ActiveUser { id, slots };
        assert!(FrameGraph::new(3, vec![u(0, vec![1, 1])]).is_err());
        assert!(FrameGraph::new(3, vec![u(0, vec![3])]).is_err());
        assert!(FrameGraph::new(3, vec![u(0, vec![0]), u(0, vec![1])]).is_err());
        assert!(FrameGraph::new(0, vec![]).is_err());
    }

    #[test]
    fn exact_fer_examples() {
        assert_eq!(exact_fer_small(2, &[2, 2]).unwrap(), 1.0);
        assert_eq!(exact_fer_small(3, &[2]).unwrap(), 0.0);
        // 36 equally likely assignments, error iff both users pick the same pair
        assert!((exact_fer_small(4, &[2, 2]).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            exact_fer_small(100, &[3, 3, 3]),
            Err(IrsaError::TooLargeToEnumerate { .. })
        ));
        assert!(exact_fer_small(2, &[3]).is_err());
    }

    #[test]
    fn dump_format() {
        let f = frame(5, &[&[3, 0], &[1, 4]]);
        assert_eq!(f.to_dump(), "m=5\n0\t0,3\n1\t1,4\n");
        let back = FrameGraph::read_dump(f.to_dump().as_bytes()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn activity_selector_parses() {
        assert_eq!("poisson".parse::<Activity>().unwrap(), Activity::Poisson);
        assert_eq!(
            "binomial:500".parse::<Activity>().unwrap(),
            Activity::Binomial { population: 500 }
        );
        assert_eq!("fixed:4".parse::<Activity>().unwrap(), Activity::Fixed { count: 4 });
        assert!("geometric".parse::<Activity>().is_err());
        assert!("binomial:0".parse::<Activity>().is_err());
    }
}
