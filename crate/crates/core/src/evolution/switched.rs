//! Piecewise and time-dependent generators and their propagators.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, Hermitian, Unitary};

/// A time-dependent Hamiltonian `t -> H(t)`.
pub type HamiltonianFn = Arc<dyn Fn(f64) -> Hermitian + Send + Sync>;

/// What drives one segment of a switched Hamiltonian.
#[derive(Clone)]
pub enum SegmentGenerator {
    Constant(Hermitian),
    TimeDependent(HamiltonianFn),
}

impl fmt::Debug for SegmentGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentGenerator::Constant(h) => f.debug_tuple("Constant").field(&h.dim()).finish(),
            SegmentGenerator::TimeDependent(_) => f.write_str("TimeDependent(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub generator: SegmentGenerator,
}

impl Segment {
    pub fn constant(start: f64, end: f64, h: Hermitian) -> Self {
        Segment {
            start,
            end,
            generator: SegmentGenerator::Constant(h),
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn at(&self, t: f64) -> Hermitian {
        match &self.generator {
            SegmentGenerator::Constant(h) => h.clone(),
            SegmentGenerator::TimeDependent(f) => f(t),
        }
    }
}

/// Contiguous, nonoverlapping segments.
#[derive(Debug, Clone)]
pub struct SwitchedHamiltonian {
    segments: Vec<Segment>,
    dim: usize,
}

impl SwitchedHamiltonian {
    pub fn new(segments: Vec<Segment>, dim: usize) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidSchedule(
                "switched Hamiltonian needs at least one segment".into(),
            ));
        }
        for (k, s) in segments.iter().enumerate() {
            if !(s.start.is_finite() && s.end.is_finite() && s.start < s.end) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {k} spans [{}, {})",
                    s.start, s.end
                )));
            }
            if let SegmentGenerator::Constant(h) = &s.generator {
                if h.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        left: h.dim(),
                        right: dim,
                    });
                }
            }
        }
        for (k, pair) in segments.windows(2).enumerate() {
            let gap = pair[1].start - pair[0].end;
            if gap.abs() > 1e-12 * pair[0].end.abs().max(1.0) {
                let what = if gap > 0.0 { "gap" } else { "overlap" };
                return Err(Error::InvalidSchedule(format!(
                    "{what} of {gap:e} between segments {k} and {}",
                    k + 1
                )));
            }
        }
        Ok(SwitchedHamiltonian { segments, dim })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    /// Generator at `t`; segment boundaries belong to the later segment.
    pub fn at(&self, t: f64) -> Hermitian {
        let idx = self
            .segments
            .partition_point(|s| s.end <= t)
            .min(self.segments.len() - 1);
        self.segments[idx].at(t)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.start).collect()
    }
}

/// A Hamiltonian over time, together with the instants where it may jump.
#[derive(Clone)]
pub enum Generator {
    Constant(Hermitian),
    Switched(SwitchedHamiltonian),
    Function {
        f: HamiltonianFn,
        breakpoints: Vec<f64>,
        dim: usize,
    },
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Constant(h) => f.debug_tuple("Constant").field(&h.dim()).finish(),
            Generator::Switched(s) => f
                .debug_tuple("Switched")
                .field(&s.segments().len())
                .finish(),
            Generator::Function {
                breakpoints, dim, ..
            } => f
                .debug_struct("Function")
                .field("breakpoints", breakpoints)
                .field("dim", dim)
                .finish(),
        }
    }
}

impl Generator {
    pub fn function<F>(dim: usize, breakpoints: Vec<f64>, f: F) -> Self
    where
        F: Fn(f64) -> Hermitian + Send + Sync + 'static,
    {
        Generator::Function {
            f: Arc::new(f),
            breakpoints,
            dim,
        }
    }

    pub fn at(&self, t: f64) -> Hermitian {
        match self {
            Generator::Constant(h) => h.clone(),
            Generator::Switched(s) => s.at(t),
            Generator::Function { f, .. } => f(t),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Constant(h) => h.dim(),
            Generator::Switched(s) => s.dim(),
            Generator::Function { dim, .. } => *dim,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Generator::Constant(_) => Vec::new(),
            Generator::Switched(s) => s.breakpoints(),
            Generator::Function { breakpoints, .. } => breakpoints.clone(),
        }
    }

    /// `[t0, t1]` cut at the interior breakpoints.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .filter(|&b| b > t0 && b < t1)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut a = t0;
        for b in cuts {
            out.push((a, b));
            a = b;
        }
        out.push((a, t1));
        out
    }
}

/// `U(t_N, t_0) = U(t_N, t_{N-1}) ... U(t_1, t_0)` with exact exponentials on
/// constant segments. Time-dependent segments use [`time_ordered_exp`] with
/// `steps_per_segment` steps.
pub fn propagate_switched(sh: &SwitchedHamiltonian, steps_per_segment: usize) -> Unitary {
    let mut u = Unitary::identity(sh.dim());
    for seg in sh.segments() {
        let factor = match &seg.generator {
            SegmentGenerator::Constant(h) => expm_hermitian(h, seg.duration()),
            SegmentGenerator::TimeDependent(f) => {
                let g = Generator::Function {
                    f: f.clone(),
                    breakpoints: Vec::new(),
                    dim: sh.dim(),
                };
                time_ordered_exp(&g, seg.start, seg.end, steps_per_segment)
            }
        };
        u = factor.then_after(&u);
    }
    u
}

/// Midpoint exponential product `prod_k exp(-i h H(t_k + h/2))`.
///
/// The step grid is cut at the generator's breakpoints so that no step
/// straddles a jump; steps are shared out in proportion to piece length, with
/// at least one per piece. Constant generators are exponentiated directly.
pub fn time_ordered_exp(gen: &Generator, t0: f64, t1: f64, steps: usize) -> Unitary {
    if let Generator::Constant(h) = gen {
        return expm_hermitian(h, t1 - t0);
    }
    let steps = steps.max(1);
    let span = t1 - t0;
    let mut u = Unitary::identity(gen.dim());
    if span == 0.0 {
        return u;
    }
    for (a, b) in gen.pieces(t0, t1) {
        let n = ((steps as f64) * (b - a) / span).round().max(1.0) as usize;
        let h = (b - a) / n as f64;
        for k in 0..n {
            let mid = a + (k as f64 + 0.5) * h;
            u = expm_hermitian(&gen.at(mid), h).then_after(&u);
        }
    }
    u
}
