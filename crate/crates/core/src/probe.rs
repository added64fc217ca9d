//! Optional instrumentation for the kernels.
//!
//! Every kernel takes a `&mut P where P: Probe`. The unit type `()` ignores
//! all events and compiles away; [`Trace`] records them for tests and the
//! benchmark command.

use crate::slp::OpCounts;

/// Which recursive kernel produced a [`LevelStat`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LevelKind {
    Strassen,
    Square,
    Syrk,
    KaratsubaBalanced,
    KaratsubaUnbalanced,
    Toom3,
}

/// Tallies of one recursive node: block-level additions it performed and
/// the sub-product calls it issued.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelStat {
    pub kind: LevelKind,
    pub depth: usize,
    pub size: usize,
    pub block_adds: u32,
    pub calls: u32,
}

pub trait Probe {
    fn level(&mut self, _stat: LevelStat) {}
    fn transform(&mut self, _size: usize, _inverse: bool) {}
    fn tft_iteration(&mut self) {}
    fn scalar_ops(&mut self, _mul: u64, _add: u64, _sca: u64) {}
}

impl Probe for () {}

/// Recording probe.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub levels: Vec<LevelStat>,
    pub transforms: Vec<(usize, bool)>,
    pub tft_iterations: usize,
    pub ops: OpCounts,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn levels_of(&self, kind: LevelKind) -> impl Iterator<Item = &LevelStat> {
        self.levels.iter().filter(move |l| l.kind == kind)
    }
}

impl Probe for Trace {
    fn level(&mut self, stat: LevelStat) {
        self.levels.push(stat);
    }
    fn transform(&mut self, size: usize, inverse: bool) {
        self.transforms.push((size, inverse));
    }
    fn tft_iteration(&mut self) {
        self.tft_iterations += 1;
    }
    fn scalar_ops(&mut self, mul: u64, add: u64, sca: u64) {
        self.ops += OpCounts::new(mul, add, sca);
    }
}
