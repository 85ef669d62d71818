use std::fmt;

/// Index of a tag node in the merged vocabulary.
pub type TagId = usize;

/// Index of a semantic path (one per leaf).
pub type PathId = usize;

/// An ordered set of tags. Order is the sampling order when the subset comes
/// out of a sampler; a prefix of the first `i` tags is what the policy
/// gradient surrogate scores.
#[derive(Clone, Debug, Default)]
pub struct TagSubset {
    ids: Vec<TagId>,
    weight: Option<f64>,
}

impl TagSubset {
    /// Builds a subset from ids, dropping repeated entries (first occurrence
    /// wins).
    pub fn new(ids: impl IntoIterator<Item = TagId>) -> Self {
        let mut out: Vec<TagId> = Vec::new();
        for id in ids {
            if !out.contains(&id) {
                out.push(id);
            }
        }
        TagSubset {
            ids: out,
            weight: None,
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn ids(&self) -> &[TagId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: TagId) -> bool {
        self.ids.contains(&id)
    }

    /// The first `n` tags in sampling order.
    pub fn prefix(&self, n: usize) -> TagSubset {
        TagSubset {
            ids: self.ids[..n.min(self.ids.len())].to_vec(),
            weight: None,
        }
    }

    pub(crate) fn push(&mut self, id: TagId) {
        debug_assert!(!self.ids.contains(&id));
        self.ids.push(id);
        self.weight = None;
    }

    /// Weight cached by the graph when the subset was scored, if any.
    pub fn cached_weight(&self) -> Option<f64> {
        self.weight
    }

    pub(crate) fn set_weight(&mut self, w: f64) {
        self.weight = Some(w);
    }

    /// Ids in ascending order; the identity of the subset as a set.
    pub fn sorted_ids(&self) -> Vec<TagId> {
        let mut v = self.ids.clone();
        v.sort_unstable();
        v
    }

    /// Set equality, ignoring order.
    pub fn same_set(&self, other: &TagSubset) -> bool {
        self.sorted_ids() == other.sorted_ids()
    }
}

impl PartialEq for TagSubset {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
    }
}

impl Eq for TagSubset {}

impl From<Vec<TagId>> for TagSubset {
    fn from(v: Vec<TagId>) -> Self {
        TagSubset::new(v)
    }
}

impl fmt::Display for TagSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, id) in self.ids.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}
