//! Fixed-width bit sets over node indices.

use smallvec::SmallVec;

use crate::instance::NodeId;

const WORD: usize = 64;

/// A set of node indices backed by a bit vector. Sets compared or combined
/// with each other must have been created for the same node count.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NodeSet {
    words: SmallVec<[u64; 4]>,
}

impl NodeSet {
    pub fn empty(num_nodes: usize) -> Self {
        NodeSet { words: SmallVec::from_elem(0, num_nodes.div_ceil(WORD)) }
    }

    pub fn full(num_nodes: usize) -> Self {
        let mut set = Self::empty(num_nodes);
        for i in 0..num_nodes {
            set.insert(i);
        }
        set
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(num_nodes: usize, indices: I) -> Self {
        let mut set = Self::empty(num_nodes);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn from_ids(num_nodes: usize, ids: &[NodeId]) -> Self {
        Self::from_indices(num_nodes, ids.iter().map(|id| id.index()))
    }

    #[inline]
    pub fn insert(&mut self, i: usize) -> bool {
        let (w, b) = (i / WORD, 1u64 << (i % WORD));
        let fresh = self.words[w] & b == 0;
        self.words[w] |= b;
        fresh
    }

    #[inline]
    pub fn remove(&mut self, i: usize) {
        self.words[i / WORD] &= !(1u64 << (i % WORD));
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / WORD).is_some_and(|w| w & (1u64 << (i % WORD)) != 0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn intersect_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    #[inline]
    pub fn union_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    #[inline]
    pub fn difference_with(&mut self, other: &NodeSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !b;
        }
    }

    #[inline]
    pub fn intersects(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    #[inline]
    pub fn intersection_len(&self, other: &NodeSet) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }

    #[inline]
    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD + bit)
            })
        })
    }

    pub fn to_ids(&self) -> Vec<NodeId> {
        self.iter().map(NodeId::from_index).collect()
    }
}
