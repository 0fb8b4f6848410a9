use std::fmt;

/// One point of the enable lattice over {OCP, prefetcher 0, prefetcher 1, ...}.
///
/// Bit 0 of the index enables the OCP, bit `1 + i` enables prefetcher `i`,
/// so with one prefetcher the four actions are none, ocp, pf, both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoordinationAction {
    pub index: usize,
}

pub fn action_count(num_prefetchers: usize) -> usize {
    1 << (num_prefetchers + 1)
}

impl CoordinationAction {
    pub const NONE: Self = Self { index: 0 };
    pub const OCP_ONLY: Self = Self { index: 1 };
    pub const PF_ONLY: Self = Self { index: 2 };
    pub const BOTH: Self = Self { index: 3 };

    pub fn new(index: usize) -> Self {
        Self { index }
    }

    /// Every mechanism enabled.
    pub fn all(num_prefetchers: usize) -> Self {
        Self { index: action_count(num_prefetchers) - 1 }
    }

    /// All `count` actions in index order.
    pub fn range(count: usize) -> impl Iterator<Item = Self> {
        (0..count).map(Self::new)
    }

    pub fn from_parts(ocp: bool, prefetchers: &[bool]) -> Self {
        let mut index = usize::from(ocp);
        for (i, &on) in prefetchers.iter().enumerate() {
            index |= usize::from(on) << (i + 1);
        }
        Self { index }
    }

    pub fn ocp_enabled(self) -> bool {
        self.index & 1 == 1
    }

    pub fn prefetcher_enabled(self, i: usize) -> bool {
        self.index >> (i + 1) & 1 == 1
    }

    pub fn any_prefetcher(self) -> bool {
        self.index >> 1 != 0
    }

    pub fn enabled_count(self) -> u32 {
        self.index.count_ones()
    }
}

impl fmt::Display for CoordinationAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            0 => f.pad("none"),
            1 => f.pad("ocp"),
            2 => f.pad("pf"),
            3 => f.pad("both"),
            i => f.pad(&format!("a{i}")),
        }
    }
}

/// The coordinator's output for the next epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision {
    pub action: CoordinationAction,
    /// Prefetch degree applied to every enabled prefetcher.
    pub degree: u32,
}
