//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown catalog field `{0}`")]
    UnknownCatalogField(String),
    #[error("parameter `{name}` out of range: {reason}")]
    ParamOutOfRange { name: String, reason: String },
    #[error("resolution {0}x{1} too small (need at least 16x16)")]
    ResolutionTooSmall(usize, usize),
    #[error("point ({0}, {1}) outside domain")]
    OutsideDomain(f64, f64),
    #[error("derivative order {requested} exceeds field cap {cap}")]
    DerivativeOrder { requested: usize, cap: usize },
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("empty domain intersection with the sampling box")]
    EmptyDomain,
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("level {0} outside the field range [{1}, {2}]")]
    LevelOutOfRange(f64, f64, f64),
    #[error("contouring failed: {0}")]
    Contouring(String),
    #[error("flux relation is not single-valued")]
    NotSingleValued,
    #[error("no Puiseux structure detected at this resolution")]
    NoPuiseuxStructure,
    #[error("critical components closer than 2 cells; resolution insufficient")]
    ResolutionInsufficient,
    #[error("region decomposition blocked by anomalous component {0}")]
    AnomalousComponent(usize),
    #[error("cell too thin to test: fewer than {0} usable circles")]
    CellTooThin(usize),
    #[error("Newton stagnated; last residual {0:.3e}")]
    NewtonStagnation(f64),
    #[error("solution blew up before reaching the target radius (r = {0})")]
    BlowUp(f64),
    #[error("integrator failed: {0}")]
    Integrator(String),
    #[error("region unbounded in the sweep direction")]
    RegionUnbounded,
    #[error("no admissible reflection states")]
    NoAdmissibleStates,
    #[error("reflection monotonicity fails at the smallest sweep level (min h = {0:.3e})")]
    MonotonicityFailsAtStart(f64),
    #[error("h takes negative values in the test ball (min {0:.3e})")]
    HopfPrecondition(f64),
    #[error("tube width delta too large: delta * sup|kappa| = {0:.3} > 0.5")]
    TubeTooWide(f64),
    #[error("curve self-intersects on the test grid")]
    SelfIntersection,
    #[error("series recursion obstruction at order {order}: {reason}")]
    RecursionObstruction { order: usize, reason: String },
    #[error("evaluation outside the tube chart (|n| = {0:.3} > {1:.3})")]
    OutsideTube(f64, f64),
    #[error("spec parse error: {0}")]
    SpecParse(String),
    #[error("normals unavailable for the boundary samples")]
    NormalsUnavailable,
    #[error("field changes sign in the region (min {0:.3e}, max {1:.3e})")]
    SignChange(f64, f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
