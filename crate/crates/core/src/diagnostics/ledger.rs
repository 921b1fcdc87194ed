//! SMVP accounting.

use std::fmt;
use std::ops::AddAssign;

/// What an SMVP was spent on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    /// Curl applications inside Leapfrog steps.
    LeapfrogCurl,
    /// Polynomial recurrences of the exponential action.
    ExpmPoly,
    /// Spectral-norm estimation for parameter selection.
    ExpmNorm,
    /// Diagonal similarity transforms between physical and normalized variables.
    Transform,
    /// Arnoldi steps of the Krylov reference method.
    Krylov,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::LeapfrogCurl,
        Category::ExpmPoly,
        Category::ExpmNorm,
        Category::Transform,
        Category::Krylov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::LeapfrogCurl => "leapfrog_curl",
            Category::ExpmPoly => "expm_poly",
            Category::ExpmNorm => "expm_norm",
            Category::Transform => "transform",
            Category::Krylov => "krylov",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Category-tagged SMVP counters.
///
/// Counters only ever grow. Ledgers are owned by a single worker and merged
/// with `+=`, which is commutative and associative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct CostLedger {
    counts: [u64; 5],
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, category: Category, smvps: u64) {
        self.counts[category.index()] += smvps;
    }

    pub fn get(&self, category: Category) -> u64 {
        self.counts[category.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Leapfrog cost `C_LF`; equals `2·n_t` for a pure Leapfrog run.
    pub fn c_lf(&self) -> u64 {
        self.get(Category::LeapfrogCurl)
    }

    /// SMVPs spent inside exponential-action recurrences (`n_Leja`).
    pub fn n_leja(&self) -> u64 {
        self.get(Category::ExpmPoly)
    }

    pub fn merge(&mut self, other: &CostLedger) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Category, u64)> + '_ {
        Category::ALL.into_iter().map(|c| (c, self.get(c)))
    }
}

impl AddAssign<&CostLedger> for CostLedger {
    fn add_assign(&mut self, rhs: &CostLedger) {
        self.merge(rhs);
    }
}

impl fmt::Display for CostLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, n) in self.iter() {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{c}={n}")?;
            first = false;
        }
        Ok(())
    }
}
