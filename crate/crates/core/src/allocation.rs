//! Post-training assignment of output neurons to digits.
//!
//! `counts[digit][neuron]` records how often each neuron won for images of each
//! digit. Allocation walks the entries from the largest count down; the first
//! entry seen for a neuron assigns it to that digit and removes the neuron from
//! further consideration. Equal counts are ordered by lower digit, then lower
//! neuron index. Neurons that never fired stay unallocated.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationMap {
    classes: usize,
    neurons: usize,
    counts: Vec<u32>,
    lists: Vec<Vec<usize>>,
    label_of: Vec<Option<u8>>,
}

impl AllocationMap {
    pub fn empty(classes: usize, neurons: usize) -> Self {
        Self::from_counts(classes, neurons, vec![0; classes * neurons])
    }

    /// Build the allocation lists from a digit-major count matrix.
    pub fn from_counts(classes: usize, neurons: usize, counts: Vec<u32>) -> Self {
        assert_eq!(counts.len(), classes * neurons, "counts must be classes x neurons");
        assert!(classes <= u8::MAX as usize + 1, "class labels must fit in u8");
        let mut entries: Vec<(u32, usize, usize)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(idx, &c)| (c, idx / neurons, idx % neurons))
            .collect();
        entries.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut lists = vec![Vec::new(); classes];
        let mut label_of = vec![None; neurons];
        for (_, digit, neuron) in entries {
            if label_of[neuron].is_none() {
                label_of[neuron] = Some(digit as u8);
                lists[digit].push(neuron);
            }
        }
        Self {
            classes,
            neurons,
            counts,
            lists,
            label_of,
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn count(&self, digit: usize, neuron: usize) -> u32 {
        self.counts[digit * self.neurons + neuron]
    }

    /// `L_digit`, in allocation order.
    pub fn list(&self, digit: usize) -> &[usize] {
        &self.lists[digit]
    }

    pub fn lists(&self) -> &[Vec<usize>] {
        &self.lists
    }

    pub fn label_of(&self, neuron: usize) -> Option<u8> {
        self.label_of.get(neuron).copied().flatten()
    }

    pub fn allocated(&self) -> usize {
        self.label_of.iter().filter(|l| l.is_some()).count()
    }
}

/// Accumulates winner counts during an allocation pass.
#[derive(Debug, Clone)]
pub struct AllocationCounter {
    classes: usize,
    neurons: usize,
    counts: Vec<u32>,
}

impl AllocationCounter {
    pub fn new(classes: usize, neurons: usize) -> Self {
        Self {
            classes,
            neurons,
            counts: vec![0; classes * neurons],
        }
    }

    pub fn record(&mut self, digit: u8, neuron: usize) {
        self.counts[digit as usize * self.neurons + neuron] += 1;
    }

    pub fn finish(self) -> AllocationMap {
        AllocationMap::from_counts(self.classes, self.neurons, self.counts)
    }
}
