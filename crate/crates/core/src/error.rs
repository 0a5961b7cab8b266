use crate::model::Site;

/// Errors raised by the lattice-dynamics library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty region")]
    EmptyRegion,

    #[error("duplicate site {0} in region")]
    DuplicateSite(Site),

    #[error("unknown site {0}")]
    UnknownSite(Site),

    #[error("site {site}: {what} must be strictly positive and finite, got {value}")]
    NonPositive {
        site: Site,
        what: &'static str,
        value: f64,
    },

    #[error("pair ({0}, {1}): missing declared constant `{2}`")]
    MissingConstant(Site, Site, &'static str),

    #[error("pair ({0}, {1}) has no interaction")]
    NoInteraction(Site, Site),

    #[error("pair ({0}, {1}) lies outside the region")]
    PairOutsideRegion(Site, Site),

    #[error("state has support outside the region at site {0}")]
    SupportOutsideRegion(Site),

    #[error("relative coordinates need two distinct sites, got {0} twice")]
    SameSite(Site),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("under-resolved mollifier: {points:.2} grid points across the kernel support (need at least 4)")]
    UnderResolvedMollifier { points: f64 },

    #[error("blow-up: non-finite state encountered at t = {t}")]
    BlowUp { t: f64 },

    #[error("oracle integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("bracket requires analytic flows")]
    NonAnalyticFlow,

    #[error("potential family `{0}` has no analytic jet")]
    NonAnalyticPotential(&'static str),

    #[error("core family `{0}` is not Schwartz class")]
    NotSchwartz(&'static str),

    #[error("outside Dyson radius: |t| C0 |Λ0| C = {0} >= 1")]
    OutsideDysonRadius(f64),

    #[error("region is not contained in the larger region (site {0} missing)")]
    NotNested(Site),

    #[error("interaction ({0}, {1}) has no declared finite range")]
    InfiniteRange(Site, Site),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
