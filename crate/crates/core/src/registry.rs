//! Name-keyed registry of allocators behind a common trait.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::oracle;
use crate::polyblock::{self, SolveOptions, SolveResult, SolveStatus};
use crate::reduction::reduce;

pub trait Allocator: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn allocate(&self, s: &Scenario, opts: &SolveOptions) -> Result<SolveResult>;
}

struct Polyblock;
struct FullPower;
struct Greedy;
struct Grid;

impl Allocator for Polyblock {
    fn name(&self) -> &'static str {
        "polyblock"
    }
    fn summary(&self) -> &'static str {
        "epsilon-optimal polyblock outer approximation (certified)"
    }
    fn allocate(&self, s: &Scenario, opts: &SolveOptions) -> Result<SolveResult> {
        polyblock::solve_with(s, opts)
    }
}

impl Allocator for FullPower {
    fn name(&self) -> &'static str {
        "full-power"
    }
    fn summary(&self) -> &'static str {
        "baseline: strongest user per carrier at full carrier power"
    }
    fn allocate(&self, s: &Scenario, _opts: &SolveOptions) -> Result<SolveResult> {
        timed(|| oracle::baseline_full_power(s))
    }
}

impl Allocator for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }
    fn summary(&self) -> &'static str {
        "baseline: coordinate ascent on carrier powers from full power"
    }
    fn allocate(&self, s: &Scenario, _opts: &SolveOptions) -> Result<SolveResult> {
        timed(|| oracle::baseline_greedy(s))
    }
}

impl Allocator for Grid {
    fn name(&self) -> &'static str {
        "grid"
    }
    fn summary(&self) -> &'static str {
        "exhaustive grid over carrier powers (K * L <= 4)"
    }
    fn allocate(&self, s: &Scenario, opts: &SolveOptions) -> Result<SolveResult> {
        timed(|| {
            let g = oracle::grid_optimum(s, opts.grid_points)?;
            let r = reduce(s)?;
            let mut res = SolveResult::from_carrier_powers("grid", &r, g.powers, SolveStatus::Heuristic)?;
            res.iterations = g.points_evaluated;
            Ok(res)
        })
    }
}

fn timed(f: impl FnOnce() -> Result<SolveResult>) -> Result<SolveResult> {
    let start = Instant::now();
    let mut res = f()?;
    res.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(res)
}

#[derive(Clone, Default)]
pub struct AllocatorRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Allocator>>,
}

impl AllocatorRegistry {
    pub fn builtin() -> Self {
        let mut reg = Self::default();
        reg.register(Arc::new(Polyblock));
        reg.register(Arc::new(FullPower));
        reg.register(Arc::new(Greedy));
        reg.register(Arc::new(Grid));
        reg
    }

    /// Replaces any allocator already registered under the same name.
    pub fn register(&mut self, alloc: Arc<dyn Allocator>) {
        self.entries.insert(alloc.name(), alloc);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Allocator>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownAlgorithm(format!("{name} (known: {})", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
