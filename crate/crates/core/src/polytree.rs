//! Quadtree forest over a uniform base lattice. Every cell stores one 2-bit
//! state per activation index (AI), so several fields can carry independent
//! refinement patterns on a single tree.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Deepest level whose cells still receive unique 64-bit ids.
pub const MAX_DEPTH: u32 = 16;
/// States are packed two bits per AI into a `u64`.
pub const MAX_AI: usize = 32;

/// Lattice position of a cell. Ordering is (level, j, i).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub level: u32,
    pub j: i64,
    pub i: i64,
}

impl CellKey {
    pub fn new(level: u32, i: i64, j: i64) -> Self {
        CellKey { level, j, i }
    }

    pub fn parent(&self) -> Option<CellKey> {
        (self.level > 0).then(|| CellKey::new(self.level - 1, self.i >> 1, self.j >> 1))
    }

    /// Children in Morton order `pos = bx + 2 by`.
    pub fn children(&self) -> [CellKey; 4] {
        let (i, j, l) = (2 * self.i, 2 * self.j, self.level + 1);
        [
            CellKey::new(l, i, j),
            CellKey::new(l, i + 1, j),
            CellKey::new(l, i, j + 1),
            CellKey::new(l, i + 1, j + 1),
        ]
    }

    pub fn child_pos(&self) -> usize {
        ((self.i & 1) + 2 * (self.j & 1)) as usize
    }

    /// Ancestor at `level` (which must not exceed the own level).
    pub fn ancestor(&self, level: u32) -> CellKey {
        let s = self.level - level;
        CellKey::new(level, self.i >> s, self.j >> s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum State {
    Inactive = 0,
    Active = 1,
    Refined = 2,
}

impl State {
    fn from_bits(b: u64) -> State {
        match b & 3 {
            1 => State::Active,
            2 => State::Refined,
            _ => State::Inactive,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolyTreeForest {
    lo: [f64; 2],
    hi: [f64; 2],
    counts: [usize; 2],
    n_ai: usize,
    cells: BTreeMap<CellKey, u64>,
}

impl PolyTreeForest {
    /// Base lattice of `nx * ny` cells over `[lo, hi]`, all active for each
    /// of the `n_ai` activation indices.
    pub fn init_base(nx: usize, ny: usize, lo: [f64; 2], hi: [f64; 2], n_ai: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument("base counts must be nonzero".into()));
        }
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::InvalidArgument("degenerate bounds".into()));
        }
        if n_ai == 0 || n_ai > MAX_AI {
            return Err(Error::InvalidArgument(format!("activation index count must lie in 1..={MAX_AI}")));
        }
        let all_active = (0..n_ai).fold(0u64, |s, a| s | (1 << (2 * a)));
        let mut cells = BTreeMap::new();
        for j in 0..ny as i64 {
            for i in 0..nx as i64 {
                cells.insert(CellKey::new(0, i, j), all_active);
            }
        }
        Ok(PolyTreeForest { lo, hi, counts: [nx, ny], n_ai, cells })
    }

    pub fn n_ai(&self) -> usize {
        self.n_ai
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        (self.lo, self.hi)
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_size(&self, level: u32) -> [f64; 2] {
        let s = (1u64 << level) as f64;
        [
            (self.hi[0] - self.lo[0]) / (self.counts[0] as f64 * s),
            (self.hi[1] - self.lo[1]) / (self.counts[1] as f64 * s),
        ]
    }

    pub fn cell_bounds(&self, c: CellKey) -> ([f64; 2], [f64; 2]) {
        let h = self.cell_size(c.level);
        let lo = [self.lo[0] + c.i as f64 * h[0], self.lo[1] + c.j as f64 * h[1]];
        (lo, [lo[0] + h[0], lo[1] + h[1]])
    }

    /// Number of cells per direction of the full lattice at `level`.
    pub fn lattice(&self, level: u32) -> [i64; 2] {
        [(self.counts[0] << level) as i64, (self.counts[1] << level) as i64]
    }

    pub fn in_domain(&self, c: CellKey) -> bool {
        let n = self.lattice(c.level);
        c.i >= 0 && c.j >= 0 && c.i < n[0] && c.j < n[1]
    }

    pub fn contains(&self, c: CellKey) -> bool {
        self.cells.contains_key(&c)
    }

    fn check_ai(&self, ai: usize) -> Result<()> {
        if ai >= self.n_ai {
            Err(Error::UnknownAi(ai))
        } else {
            Ok(())
        }
    }

    pub fn state(&self, c: CellKey, ai: usize) -> State {
        self.cells.get(&c).map_or(State::Inactive, |s| State::from_bits(s >> (2 * ai)))
    }

    /// Member of Omega^l for this AI: active or refined.
    pub fn in_omega(&self, c: CellKey, ai: usize) -> bool {
        self.state(c, ai) != State::Inactive
    }

    fn set_state(&mut self, c: CellKey, ai: usize, s: State) {
        let e = self.cells.entry(c).or_insert(0);
        *e = (*e & !(3u64 << (2 * ai))) | ((s as u64) << (2 * ai));
    }

    /// Cells flagged in addition to `cell` so that refining all of them keeps
    /// the buffer regularity for `ai`. `flagged` holds the already flagged
    /// set and receives the new flags; the return value lists only the new ones.
    pub fn buffer_closure(
        &self,
        ai: usize,
        cell: CellKey,
        b_buffer: usize,
        flagged: &mut BTreeSet<CellKey>,
    ) -> Vec<CellKey> {
        let mut added = Vec::new();
        let mut stack = vec![cell];
        let b = b_buffer as i64;
        while let Some(c) = stack.pop() {
            let Some(parent) = c.parent() else { continue };
            // would-be children q of the parent's neighbours, within b cells of c
            for qj in c.j - b..=c.j + b {
                for qi in c.i - b..=c.i + b {
                    let n = CellKey::new(c.level - 1, qi >> 1, qj >> 1);
                    if n == parent || !self.in_domain(n) || flagged.contains(&n) {
                        continue;
                    }
                    if self.state(n, ai) == State::Active {
                        flagged.insert(n);
                        added.push(n);
                        stack.push(n);
                    }
                }
            }
        }
        added
    }

    /// Refines every flagged cell for `ai` plus whatever the buffer closure
    /// requires. With `halo`, active same-level neighbours of each flag are
    /// flagged too. Returns the full set of refined cells.
    pub fn refine_for_ai(
        &mut self,
        ai: usize,
        flags: &[CellKey],
        b_buffer: usize,
        halo: bool,
    ) -> Result<Vec<CellKey>> {
        self.check_ai(ai)?;
        if b_buffer == 0 {
            return Err(Error::InvalidArgument("buffer parameter must be at least 1".into()));
        }
        let mut flagged = BTreeSet::new();
        for &c in flags {
            if self.state(c, ai) != State::Active {
                return Err(Error::Precondition(format!("cell {c:?} is not active for AI {ai}")));
            }
            if c.level + 1 > MAX_DEPTH {
                return Err(Error::InvalidArgument(format!("refinement beyond depth {MAX_DEPTH}")));
            }
            flagged.insert(c);
        }
        if halo {
            for c in flagged.clone() {
                for dj in -1..=1 {
                    for di in -1..=1 {
                        let n = CellKey::new(c.level, c.i + di, c.j + dj);
                        if self.state(n, ai) == State::Active {
                            flagged.insert(n);
                        }
                    }
                }
            }
        }
        for c in flagged.clone() {
            self.buffer_closure(ai, c, b_buffer, &mut flagged);
        }
        for &c in &flagged {
            self.set_state(c, ai, State::Refined);
            for k in c.children() {
                self.set_state(k, ai, State::Active);
            }
        }
        Ok(flagged.into_iter().collect())
    }

    /// Cells active for `ai`, in key order.
    pub fn active_mesh(&self, ai: usize) -> Result<Vec<CellKey>> {
        self.check_ai(ai)?;
        Ok(self
            .cells
            .iter()
            .filter(|(_, s)| State::from_bits(*s >> (2 * ai)) == State::Active)
            .map(|(k, _)| *k)
            .collect())
    }

    /// All stored cells in key order with their packed states.
    pub fn cells(&self) -> impl Iterator<Item = (CellKey, u64)> + '_ {
        self.cells.iter().map(|(k, s)| (*k, *s))
    }

    /// Deepest level holding a cell active for `ai`.
    pub fn max_level(&self, ai: usize) -> u32 {
        self.cells
            .iter()
            .filter(|(_, s)| State::from_bits(*s >> (2 * ai)) == State::Active)
            .map(|(k, _)| k.level)
            .max()
            .unwrap_or(0)
    }

    /// Active cell of `ai` containing the given cell (itself or an ancestor).
    pub fn active_ancestor(&self, c: CellKey, ai: usize) -> Option<CellKey> {
        (0..=c.level).rev().map(|l| c.ancestor(l)).find(|a| self.state(*a, ai) == State::Active)
    }

    /// Row-major id at level 0; descendants add their Morton path on top of
    /// a per-level offset, scaled by the base cell count.
    pub fn cell_id(&self, c: CellKey) -> u64 {
        let base = c.ancestor(0);
        let nb = (self.counts[0] * self.counts[1]) as u64;
        let base_id = base.j as u64 * self.counts[0] as u64 + base.i as u64;
        if c.level == 0 {
            return base_id;
        }
        let mut path = 0u64;
        for l in 1..=c.level {
            path = path * 4 + c.ancestor(l).child_pos() as u64;
        }
        let level_offset = (4u64.pow(c.level) - 1) / 3;
        (level_offset + path) * nb + base_id
    }

    /// Checks the buffer regularity that the THB construction relies on.
    pub fn check_regular(&self, ai: usize, b_buffer: usize) -> Result<()> {
        self.check_ai(ai)?;
        let b = b_buffer as i64;
        for (c, s) in &self.cells {
            if State::from_bits(s >> (2 * ai)) != State::Active || c.level == 0 {
                continue;
            }
            let p = c.parent().unwrap();
            for dj in -b..=b {
                for di in -b..=b {
                    let n = CellKey::new(p.level, p.i + di, p.j + dj);
                    if self.in_domain(n) && !self.in_omega(n, ai) {
                        return Err(Error::Regularity(format!(
                            "active cell {c:?} has uncovered coarse neighbour {n:?} for AI {ai}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Line-oriented dump: a header, then `level i j s0 s1 ...` per cell with
    /// states written as `A`, `R` or `-`.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "forest {} {} ai={} lo={:?} hi={:?}",
            self.counts[0], self.counts[1], self.n_ai, self.lo, self.hi
        );
        for (c, s) in &self.cells {
            let _ = write!(out, "{} {} {}", c.level, c.i, c.j);
            for a in 0..self.n_ai {
                let ch = match State::from_bits(s >> (2 * a)) {
                    State::Active => 'A',
                    State::Refined => 'R',
                    State::Inactive => '-',
                };
                let _ = write!(out, " {ch}");
            }
            out.push('\n');
        }
        out
    }
}
