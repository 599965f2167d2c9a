use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Disjoint assignment of qubits `0..n` to parties. Gates inside one party are
/// free; two-qubit gates crossing parties are straddling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSpec {
    parties: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionFile {
    parties: Vec<Vec<usize>>,
}

impl PartitionSpec {
    /// Validate and build. Each party's qubit list is stored sorted ascending;
    /// the party order is kept as given.
    pub fn new(parties: Vec<Vec<usize>>) -> Result<Self> {
        if parties.is_empty() {
            return invalid("partition needs at least one party");
        }
        let n: usize = parties.iter().map(Vec::len).sum();
        let mut owner = vec![usize::MAX; n];
        let mut sorted = Vec::with_capacity(parties.len());
        for (j, party) in parties.into_iter().enumerate() {
            if party.is_empty() {
                return invalid(format!("party {j} is empty"));
            }
            for &q in &party {
                if q >= n {
                    return invalid(format!("qubit {q} out of range: parties must cover exactly 0..{n}"));
                }
                if owner[q] != usize::MAX {
                    return invalid(format!("qubit {q} assigned to more than one party"));
                }
                owner[q] = j;
            }
            let mut party = party;
            party.sort_unstable();
            sorted.push(party);
        }
        Ok(Self { parties: sorted, owner })
    }

    pub fn bipartition(a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        Self::new(vec![a, b])
    }

    /// One party per qubit.
    pub fn singletons(n: usize) -> Self {
        Self::new((0..n).map(|q| vec![q]).collect()).expect("singleton partition is valid")
    }

    pub fn single_party(n: usize) -> Self {
        Self::new(vec![(0..n).collect()]).expect("single party is valid")
    }

    pub fn n(&self) -> usize {
        self.owner.len()
    }

    pub fn m(&self) -> usize {
        self.parties.len()
    }

    pub fn parties(&self) -> &[Vec<usize>] {
        &self.parties
    }

    pub fn party(&self, j: usize) -> &[usize] {
        &self.parties[j]
    }

    pub fn party_of(&self, q: usize) -> usize {
        self.owner[q]
    }

    pub fn same_party(&self, a: usize, b: usize) -> bool {
        self.owner[a] == self.owner[b]
    }

    /// Party sizes sorted ascending (`k_1 ≤ k_2 ≤ … ≤ k_m`).
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.parties.iter().map(Vec::len).collect();
        s.sort_unstable();
        s
    }

    pub fn require_parties(&self, m: usize) -> Result<()> {
        if self.m() != m {
            return invalid(format!("expected a {m}-party partition, got {} parties", self.m()));
        }
        Ok(())
    }

    /// Global basis index from per-party local indices (local bit j ↔ j-th
    /// lowest qubit of the party).
    pub fn compose_index(&self, locals: &[usize]) -> usize {
        let mut idx = 0;
        for (party, &local) in self.parties.iter().zip(locals) {
            for (j, &q) in party.iter().enumerate() {
                if local >> j & 1 == 1 {
                    idx |= 1 << q;
                }
            }
        }
        idx
    }

    /// Local index of a global basis index restricted to party `j`.
    pub fn local_index(&self, global: usize, j: usize) -> usize {
        self.parties[j]
            .iter()
            .enumerate()
            .fold(0, |acc, (b, &q)| acc | ((global >> q & 1) << b))
    }

    /// Apply a qubit relabeling `q -> perm[q]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        Self::new(self.parties.iter().map(|p| p.iter().map(|&q| perm[q]).collect()).collect())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PartitionFile = serde_json::from_str(text)?;
        Self::new(f.parties)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PartitionFile { parties: self.parties.clone() }).expect("serializable")
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .parties
            .iter()
            .map(|p| p.iter().map(usize::to_string).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{}", parts.join("|"))
    }
}

impl FromStr for PartitionSpec {
    type Err = Error;

    /// Parses `0,1|2,3`.
    fn from_str(s: &str) -> Result<Self> {
        let parties = s
            .trim()
            .split('|')
            .map(|p| {
                p.split(',')
                    .map(|q| {
                        q.trim()
                            .parse::<usize>()
                            .map_err(|_| Error::InvalidInput(format!("bad qubit index {q:?} in partition {s:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(parties)
    }
}
