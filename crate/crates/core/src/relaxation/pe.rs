//! Per-PE state: the block, its ghost layer, and optimistic history generation.

use std::collections::HashMap;

use crate::lattice::{class_of, Direction, Lattice, ModelParams};
use crate::nfoldway::{ClassTable, FlipEvent, History};
use crate::relaxation::hazard::Hazard;
use crate::relaxation::partition::Block;
use crate::rngstream::{Pair, RngStream};
use crate::{Error, Result};

const NOT_OWN: u32 = u32::MAX;

/// Index arithmetic for a block padded by one ghost atom on each side.
#[derive(Debug, Clone)]
struct LocalView {
    own_pad: Vec<u32>,
    pad_local: Vec<u32>,
    neighbors: Vec<[u32; 4]>,
    /// Global ghost atom -> (padded slot, adjacent own atom).
    ghosts: HashMap<usize, (u32, u32)>,
}

impl LocalView {
    fn new(block: &Block, lattice: &Lattice) -> Self {
        let (w, h) = (block.width, block.height);
        let pw = w + 2;
        let pad = |r: usize, c: usize| (r * pw + c) as u32;
        let mut own_pad = Vec::with_capacity(w * h);
        let mut pad_local = vec![NOT_OWN; (h + 2) * pw];
        for r in 0..h {
            for c in 0..w {
                let p = pad(r + 1, c + 1);
                pad_local[p as usize] = own_pad.len() as u32;
                own_pad.push(p);
            }
        }
        let wraps = |d: Direction| block.neighbors[d.index()].is_none();
        let mut neighbors = Vec::with_capacity(w * h);
        let mut ghosts = HashMap::new();
        for r in 0..h {
            for c in 0..w {
                let local = (r * w + c) as u32;
                let global = block.global_of(local as usize);
                let mut nb = [0u32; 4];
                for d in Direction::ALL {
                    let (pr, pc) = match d {
                        Direction::Up if wraps(d) => ((r + h - 1) % h + 1, c + 1),
                        Direction::Down if wraps(d) => ((r + 1) % h + 1, c + 1),
                        Direction::Left if wraps(d) => (r + 1, (c + w - 1) % w + 1),
                        Direction::Right if wraps(d) => (r + 1, (c + 1) % w + 1),
                        Direction::Up => (r, c + 1),
                        Direction::Down => (r + 2, c + 1),
                        Direction::Left => (r + 1, c),
                        Direction::Right => (r + 1, c + 2),
                    };
                    let p = pad(pr, pc);
                    nb[d.index()] = p;
                    if pad_local[p as usize] == NOT_OWN {
                        ghosts.insert(lattice.neighbor(global, d), (p, local));
                    }
                }
                neighbors.push(nb);
            }
        }
        LocalView { own_pad, pad_local, neighbors, ghosts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeCommit {
    pub history: History,
    /// Pair indices `[start, end)` owned by the committed events.
    pub pair_range: (u64, u64),
    /// Pairs abandoned by a fresh-randomness restart.
    pub discarded: u64,
}

#[derive(Debug, Clone)]
pub struct PeState {
    block: Block,
    view: LocalView,
    spins: Vec<i8>,
    table: ClassTable,
    hazard: Hazard,
    committed_spins: Vec<i8>,
    committed_table: ClassTable,
    committed_hazard: Hazard,
    stream: RngStream,
    assumed: [Vec<FlipEvent>; 4],
    generated: Vec<FlipEvent>,
    pairs_consumed: u64,
}

impl PeState {
    pub fn new(block: Block, lattice: &Lattice, params: &ModelParams, stream: RngStream) -> Self {
        let view = LocalView::new(&block, lattice);
        let mut spins = vec![1i8; view.pad_local.len()];
        for l in 0..block.len() {
            spins[view.own_pad[l] as usize] = lattice.spin(block.global_of(l));
        }
        for (&global, &(p, _)) in &view.ghosts {
            spins[p as usize] = lattice.spin(global);
        }
        let table = ClassTable::new(params, (0..block.len()).map(|l| local_class(&view, &spins, l)));
        PeState {
            block,
            view,
            committed_spins: spins.clone(),
            committed_table: table.clone(),
            committed_hazard: Hazard::anchored(0.0),
            spins,
            table,
            hazard: Hazard::anchored(0.0),
            stream,
            assumed: Default::default(),
            generated: Vec::new(),
            pairs_consumed: 0,
        }
    }

    pub fn id(&self) -> usize {
        self.block.id
    }

    pub fn block(&self) -> &Block {
        &self.block
    }

    pub fn stream(&self) -> &RngStream {
        &self.stream
    }

    pub fn table(&self) -> &ClassTable {
        &self.table
    }

    pub fn generated(&self) -> &[FlipEvent] {
        &self.generated
    }

    pub fn pairs_consumed(&self) -> u64 {
        self.pairs_consumed
    }

    pub fn assumed(&self, dir: Direction) -> &[FlipEvent] {
        &self.assumed[dir.index()]
    }

    /// Committed spins of the block's own atoms as `(global id, spin)`.
    pub fn committed_spins(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        (0..self.block.len()).map(|l| (self.block.global_of(l), self.committed_spins[self.view.own_pad[l] as usize]))
    }

    /// Canonical assumption: no neighbor boundary flips in the coming window.
    pub fn begin_step(&mut self) {
        for a in &mut self.assumed {
            a.clear();
        }
    }

    /// Replaces the assumed ghost history on side `dir`. Test hook; the
    /// engine goes through [`PeState::absorb`].
    pub fn set_assumed(&mut self, dir: Direction, events: Vec<FlipEvent>) {
        self.assumed[dir.index()] = events;
    }

    /// Regenerates the block history over `(t_c, t_end)` from the committed
    /// state, treating every assumed ghost flip as a break point.
    pub fn generate(&mut self, t_end: f64) -> Result<&[FlipEvent]> {
        self.spins.clone_from(&self.committed_spins);
        self.table.clone_from(&self.committed_table);
        self.hazard = self.committed_hazard;
        self.stream.reset_to(self.stream.committed());
        self.generated.clear();

        let breaks = self.merged_assumptions();
        let mut next_break = 0;
        let mut pending: Option<Pair> = None;
        loop {
            let pair = *pending.get_or_insert_with(|| self.stream.next_pair());
            let target = -pair.u.ln();
            let rate = self.table.total_rate();
            let tau = self.hazard.candidate(target, rate);
            if let Some(&(tb, _, ghost)) = breaks.get(next_break) {
                if !(tau < tb) {
                    self.hazard.close_segment(rate, tb);
                    self.flip_ghost(ghost)?;
                    next_break += 1;
                    continue;
                }
            }
            if !(tau < t_end) {
                break;
            }
            let local = self.table.select(pair.v)?;
            self.flip_own(local);
            self.generated.push(FlipEvent { time: tau, atom: self.block.global_of(local) });
            self.hazard = Hazard::anchored(tau);
            pending = None;
        }
        self.pairs_consumed = self.generated.len() as u64;
        Ok(&self.generated)
    }

    /// Assumed ghost flips of all sides in `(time, pe, atom)` order.
    fn merged_assumptions(&self) -> Vec<(f64, usize, usize)> {
        let mut all: Vec<(f64, usize, usize)> = Direction::ALL
            .iter()
            .filter_map(|&d| self.block.neighbors[d.index()].map(|pe| (d, pe)))
            .flat_map(|(d, pe)| self.assumed[d.index()].iter().map(move |e| (e.time, pe, e.atom)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        all
    }

    fn reclassify(&mut self, local: usize) {
        let k = local_class(&self.view, &self.spins, local);
        self.table.reassign(local, k);
    }

    fn flip_own(&mut self, local: usize) {
        let p = self.view.own_pad[local] as usize;
        self.spins[p] = -self.spins[p];
        self.reclassify(local);
        for d in Direction::ALL {
            let n = self.view.neighbors[local][d.index()] as usize;
            let nl = self.view.pad_local[n];
            if nl != NOT_OWN {
                self.reclassify(nl as usize);
            }
        }
    }

    fn flip_ghost(&mut self, global: usize) -> Result<()> {
        let &(p, adjacent) = self
            .view
            .ghosts
            .get(&global)
            .ok_or_else(|| Error::Inconsistent(format!("atom {global} is not a ghost of PE {}", self.block.id)))?;
        self.spins[p as usize] = -self.spins[p as usize];
        self.reclassify(adjacent as usize);
        Ok(())
    }

    /// Generated events on the edge facing `dir`, in order.
    pub fn projection(&self, dir: Direction) -> Vec<FlipEvent> {
        boundary_projection(&self.generated, &self.block, dir)
    }

    pub fn projections(&self) -> [Vec<FlipEvent>; 4] {
        Direction::ALL.map(|d| self.projection(d))
    }

    /// Compares what the neighbor on side `dir` generated against the current
    /// assumption, adopting it on mismatch. Returns whether they differed.
    pub fn absorb(&mut self, dir: Direction, received: &[FlipEvent]) -> bool {
        let assumed = &mut self.assumed[dir.index()];
        let same = assumed.len() == received.len()
            && assumed
                .iter()
                .zip(received)
                .all(|(a, b)| a.atom == b.atom && a.time.to_bits() == b.time.to_bits());
        if !same {
            assumed.clear();
            assumed.extend_from_slice(received);
        }
        !same
    }

    /// Number of generated events on `∂G_i`.
    pub fn boundary_events(&self) -> usize {
        self.generated.iter().filter(|e| self.block.is_boundary(e.atom)).count()
    }

    /// Regenerates with unchanged assumptions and checks the result is
    /// bit-identical to the current history.
    pub fn audit_fixed_point(&mut self, t_end: f64) -> Result<()> {
        let before = std::mem::take(&mut self.generated);
        let consumed = self.pairs_consumed;
        self.generate(t_end)?;
        let same = History { events: before, ..Default::default() }
            .same_events(&History { events: self.generated.clone(), ..Default::default() });
        if !same || consumed != self.pairs_consumed {
            return Err(Error::Inconsistent(format!(
                "PE {} does not reproduce its converged history",
                self.block.id
            )));
        }
        Ok(())
    }

    /// Adopts the state reached by the last generation as committed.
    pub fn commit(&mut self, t_c: f64, t_end: f64, fresh_randomness: bool) -> PeCommit {
        let start = self.stream.committed();
        self.stream.commit(self.pairs_consumed);
        let end = self.stream.committed();
        self.committed_spins.clone_from(&self.spins);
        self.committed_table.clone_from(&self.table);
        self.committed_hazard = self.hazard;
        let mut discarded = 0;
        if fresh_randomness {
            discarded = self.stream.skip_to_fresh();
            self.committed_hazard = Hazard::anchored(t_end);
        }
        PeCommit {
            history: History { t_start: t_c, t_end, events: std::mem::take(&mut self.generated) },
            pair_range: (start, end),
            discarded,
        }
    }
}

fn local_class(view: &LocalView, spins: &[i8], local: usize) -> crate::lattice::ClassIndex {
    let s = spins[view.own_pad[local] as usize];
    let ups = view.neighbors[local].iter().filter(|&&p| spins[p as usize] == 1).count() as u8;
    class_of(s, ups)
}

/// Subsequence of `events` on the edge of `block` facing `dir`.
pub fn boundary_projection(events: &[FlipEvent], block: &Block, dir: Direction) -> Vec<FlipEvent> {
    events.iter().filter(|e| block.on_edge(e.atom, dir)).copied().collect()
}
