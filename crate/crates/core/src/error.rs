use core::fmt;

/// Errors surfaced by the sampling and verification routines.
#[derive(Debug, Clone, PartialEq)]
pub enum PercError {
    /// Exhaustive enumeration was asked for a region with too many edges.
    RegionTooLarge { edges: usize, max: usize },
    /// The rejection sampler hit its attempt cap before the conditioning
    /// event occurred.
    AcceptanceBudgetExceeded { attempts: u64 },
    /// `exterior_boundary` was called on a cluster touching the box boundary,
    /// where no interior dual circuit exists.
    ClusterTouchesBoundary,
    /// A log-log fit was asked for with a nonpositive estimate.
    NonpositiveEstimate { index: usize },
    /// A log-log fit needs at least three scales.
    TooFewScales { got: usize },
    /// A moment of this order is not tracked by the accumulator.
    UnsupportedMomentOrder { order: u32, max: u32 },
}

impl fmt::Display for PercError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PercError::RegionTooLarge { edges, max } => {
                write!(f, "region too large: {edges} edges exceeds enumeration bound {max}")
            }
            PercError::AcceptanceBudgetExceeded { attempts } => {
                write!(f, "acceptance budget exceeded after {attempts} attempts")
            }
            PercError::ClusterTouchesBoundary => write!(f, "cluster touches boundary"),
            PercError::NonpositiveEstimate { index } => {
                write!(f, "nonpositive estimate at series point {index}")
            }
            PercError::TooFewScales { got } => {
                write!(f, "need at least 3 scales for a fit, got {got}")
            }
            PercError::UnsupportedMomentOrder { order, max } => {
                write!(f, "moment order {order} not tracked (max {max})")
            }
        }
    }
}

impl core::error::Error for PercError {}
