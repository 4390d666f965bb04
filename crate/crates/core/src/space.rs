use serde::{Deserialize, Serialize};

/// The closed convex cone the variable lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpaceTag {
    /// Entrywise nonnegative `m x n` real matrices.
    NonnegRect,
    /// Real symmetric positive semidefinite matrices.
    PsdReal,
    /// Complex Hermitian positive semidefinite matrices.
    PsdHermitian,
}

impl SpaceTag {
    pub fn is_psd(self) -> bool {
        !matches!(self, SpaceTag::NonnegRect)
    }

    pub fn is_complex(self) -> bool {
        matches!(self, SpaceTag::PsdHermitian)
    }

    /// Pipeline implied by the space: PSD spaces penalize rank, the orthant penalizes cardinality.
    pub fn pipeline(self) -> PipelineKind {
        if self.is_psd() {
            PipelineKind::RankPenalized
        } else {
            PipelineKind::CardPenalized
        }
    }
}

/// Which constraint is handled by the exact penalty and which by the Moreau envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PipelineKind {
    /// `P = ||.||_* - ||.||_(r)`, `g` = indicator of `{card <= s, |u_ij| <= tau}`.
    RankPenalized,
    /// `P = ||.||_1 - |||.|||_(s)`, `g` = indicator of `{rank <= r, ||.|| <= tau}`.
    CardPenalized,
}

/// Constraint sets with closed-form projections.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConstraintSet {
    PsdCone,
    NonnegOrthant,
    Rank(usize),
    RankSpecBox(usize, f64),
    RankInCone(usize),
    /// Rank at most `r` inside the PSD cone with eigenvalues at most `tau`.
    RankInConeBox(usize, f64),
    Card(usize),
    CardBox(usize, f64),
    CardInOrthant(usize),
}
