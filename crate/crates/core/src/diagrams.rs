//! Partial pairings of `1..=n`.
//!
//! A [`Diagram`] pairs `n − m` of the positions `1..=n` and leaves `m`
//! single. A pair `{h, h+1}` is *consecutive*; any other pair is an *arc*.
//! Positions are 1-based throughout.

use alloc::vec::Vec;

use crate::words::Word;
use crate::{Error, Result};

/// Largest supported number of positions.
pub const MAX_POSITIONS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Consecutive,
    Arc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagram {
    n: usize,
    pairs: Vec<(usize, usize)>,
    singles: Vec<usize>,
}

impl Diagram {
    /// Builds a diagram from 1-based pairs. Each pair is normalised to
    /// `(i, j)` with `i < j`; pairs are stored sorted by `i`.
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut used = alloc::vec![false; n + 1];
        let mut norm = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if i == 0 || j > n {
                return Err(Error::InvalidDiagram("position outside 1..=n"));
            }
            if i == j {
                return Err(Error::InvalidDiagram("a position cannot be paired with itself"));
            }
            if used[i] || used[j] {
                return Err(Error::InvalidDiagram("pairs must be disjoint"));
            }
            used[i] = true;
            used[j] = true;
            norm.push((i, j));
        }
        norm.sort_unstable();
        let singles = (1..=n).filter(|&k| !used[k]).collect();
        Ok(Self {
            n,
            pairs: norm,
            singles,
        })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            pairs: Vec::new(),
            singles: (1..=n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Unpaired positions in increasing order.
    pub fn singles(&self) -> &[usize] {
        &self.singles
    }

    /// Number of singles `m`, the chaos order the diagram contributes to.
    pub fn chaos_order(&self) -> usize {
        self.singles.len()
    }

    pub fn kind(pair: (usize, usize)) -> PairKind {
        if pair.1 == pair.0 + 1 {
            PairKind::Consecutive
        } else {
            PairKind::Arc
        }
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs
            .iter()
            .copied()
            .filter(|&p| Self::kind(p) == PairKind::Arc)
    }

    pub fn consecutive_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs
            .iter()
            .copied()
            .filter(|&p| Self::kind(p) == PairKind::Consecutive)
    }

    /// Number of integration variables: two per arc, one per consecutive pair.
    pub fn integration_count(&self) -> usize {
        self.pairs
            .iter()
            .map(|&p| match Self::kind(p) {
                PairKind::Arc => 2,
                PairKind::Consecutive => 1,
            })
            .sum()
    }

    /// Partner of a position, if it is paired.
    pub fn partner(&self, pos: usize) -> Option<usize> {
        self.pairs.iter().find_map(|&(i, j)| {
            if i == pos {
                Some(j)
            } else if j == pos {
                Some(i)
            } else {
                None
            }
        })
    }

    /// Whether `pos` is the first element of a consecutive pair; such
    /// positions carry no integration variable.
    pub fn is_eliminated(&self, pos: usize) -> bool {
        self.pairs.iter().any(|&(i, j)| i == pos && j == pos + 1)
    }
}

/// All diagrams on `n` positions with exactly `m` singles, in the order
/// produced by recursively deciding the smallest unplaced position: first
/// leave it single, then pair it with each larger unplaced position.
pub fn enumerate_pairings(n: usize, m: usize) -> Result<Vec<Diagram>> {
    if n > MAX_POSITIONS {
        return Err(Error::Capability {
            what: "diagram positions",
            value: n as u64,
            limit: MAX_POSITIONS as u64,
        });
    }
    let mut out = Vec::new();
    if m > n || (n - m) % 2 != 0 {
        return Ok(out);
    }
    let mut placed = alloc::vec![false; n + 1];
    let mut pairs = Vec::new();
    recurse(n, 1, m, &mut placed, &mut pairs, &mut out);
    Ok(out)
}

fn recurse(
    n: usize,
    start: usize,
    singles_left: usize,
    placed: &mut [bool],
    pairs: &mut Vec<(usize, usize)>,
    out: &mut Vec<Diagram>,
) {
    let Some(i) = (start..=n).find(|&k| !placed[k]) else {
        if singles_left == 0 {
            out.push(Diagram::new(n, pairs).expect("enumeration yields valid pairs"));
        }
        return;
    };
    placed[i] = true;
    if singles_left > 0 {
        recurse(n, i + 1, singles_left - 1, placed, pairs, out);
    }
    for j in i + 1..=n {
        if placed[j] {
            continue;
        }
        placed[j] = true;
        pairs.push((i, j));
        recurse(n, i + 1, singles_left, placed, pairs, out);
        pairs.pop();
        placed[j] = false;
    }
    placed[i] = false;
}

/// A maximal chain of consecutive pairs `{k,k+1}, {k+2,k+3}, …`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsecutiveRun {
    pub pairs: Vec<(usize, usize)>,
}

impl ConsecutiveRun {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn maximal_consecutive_sequences(diagram: &Diagram) -> Vec<ConsecutiveRun> {
    let mut runs: Vec<ConsecutiveRun> = Vec::new();
    for pair in diagram.consecutive_pairs() {
        match runs.last_mut() {
            Some(run) if run.pairs.last().map(|p| p.1 + 1) == Some(pair.0) => run.pairs.push(pair),
            _ => runs.push(ConsecutiveRun {
                pairs: alloc::vec![pair],
            }),
        }
    }
    runs
}

/// Whether every pair of `diagram` carries equal letters of `word`.
pub fn index_compatible(diagram: &Diagram, word: &Word) -> Result<bool> {
    if word.len() != diagram.n {
        return Err(Error::LengthMismatch {
            expected: diagram.n,
            got: word.len(),
        });
    }
    let l = word.letters();
    Ok(diagram.pairs.iter().all(|&(i, j)| l[i - 1] == l[j - 1]))
}
