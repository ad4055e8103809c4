//! Feedback tuples collected under homing policies.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{IglError, Result};
use crate::reachability::{HomingPolicy, ReachableSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleRecord {
    pub context: usize,
    pub state: usize,
    pub action: usize,
    pub feedback: usize,
}

/// `D_s`: records that all end in the same terminal state.
#[derive(Clone, Debug, PartialEq)]
pub struct TupleDataset {
    state: usize,
    target: usize,
    records: Vec<TupleRecord>,
    /// Episodes spent collecting, including discarded ones.
    episodes: u64,
}

impl TupleDataset {
    pub fn from_records(state: usize, target: usize, records: Vec<TupleRecord>) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.state != state) {
            return Err(IglError::InvalidArgument(format!(
                "record for state {} in the dataset of state {state}",
                r.state
            )));
        }
        Ok(TupleDataset {
            state,
            target,
            records,
            episodes: 0,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn records(&self) -> &[TupleRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }
}

/// Episode cap `(20/ε)(N₀ + ln(S/δ))` per state.
pub fn collection_cap(n0: usize, num_states: usize, delta: f64, epsilon: f64) -> u64 {
    (20.0 / epsilon * (n0 as f64 + (num_states as f64 / delta).ln())).ceil() as u64
}

/// Runs each reachable state's homing policy until `n0` episodes have ended
/// there. States are visited in increasing order.
pub fn collect_tuples<R: Rng + ?Sized>(
    reachable: &ReachableSet,
    homing: &[HomingPolicy],
    env: &Environment,
    n0: usize,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<TupleDataset>> {
    if n0 == 0 {
        return Err(IglError::InvalidArgument("N0 must be at least 1".into()));
    }
    let cap = collection_cap(n0, env.mdp().num_states(), delta, reachable.epsilon());
    let mut out = Vec::with_capacity(reachable.len());
    for s in reachable.states() {
        let policy = homing
            .iter()
            .find(|h| h.target() == s)
            .ok_or_else(|| IglError::InvalidArgument(format!("no homing policy for state {s}")))?;
        let mut records = Vec::with_capacity(n0);
        let mut episodes = 0u64;
        while records.len() < n0 {
            if episodes == cap {
                return Err(IglError::CollectionCap {
                    state: s,
                    cap,
                    collected: records.len(),
                    target: n0,
                });
            }
            episodes += 1;
            let t = policy.rollout(env, rng);
            if t.terminal_state() == s {
                records.push(TupleRecord {
                    context: t.context,
                    state: s,
                    action: t.terminal_action(),
                    feedback: t.feedback,
                });
            }
        }
        out.push(TupleDataset {
            state: s,
            target: n0,
            records,
            episodes,
        });
    }
    Ok(out)
}

/// Writes `context,state,action,feedback` rows with a header.
pub fn write_tuples<W: Write>(writer: W, datasets: &[TupleDataset]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for d in datasets {
        for r in &d.records {
            w.serialize(r).map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| IglError::io("<tuple stream>", e))
}

/// Reads rows written by [`write_tuples`], grouping them by state in order of
/// first appearance. Each group's target is its size.
pub fn read_tuples<R: Read>(reader: R) -> Result<Vec<TupleDataset>> {
    let mut groups: Vec<TupleDataset> = Vec::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let r: TupleRecord = row.map_err(csv_error)?;
        match groups.iter_mut().find(|g| g.state == r.state) {
            Some(g) => g.records.push(r),
            None => groups.push(TupleDataset {
                state: r.state,
                target: 0,
                records: vec![r],
                episodes: 0,
            }),
        }
    }
    for g in &mut groups {
        g.target = g.records.len();
    }
    Ok(groups)
}

pub fn save_tuples(path: &Path, datasets: &[TupleDataset]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| IglError::io(path, e))?;
    write_tuples(file, datasets)
}

pub fn load_tuples(path: &Path) -> Result<Vec<TupleDataset>> {
    let file = std::fs::File::open(path).map_err(|e| IglError::io(path, e))?;
    read_tuples(file)
}

fn csv_error(e: csv::Error) -> IglError {
    IglError::InvalidArgument(format!("malformed tuple row: {e}"))
}
