//! Contiguous segment index: rows 0..total are partitioned into consecutive
//! spans, one per segment. Neighborhood edge lists (receiver-major CSR) and
//! node->graph indicators both arrive in this form already.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    /// Prefix starts, length num_segments + 1; segment s covers rows
    /// starts[s] .. starts[s + 1].
    starts: Vec<usize>,
}

impl Segments {
    pub fn from_starts(starts: Vec<usize>) -> Self {
        assert!(!starts.is_empty(), "starts must hold at least one entry");
        assert!(
            starts.windows(2).all(|w| w[0] <= w[1]),
            "starts must be non-decreasing"
        );
        Segments { starts }
    }

    /// Builds from per-row segment ids that are sorted ascending (rows of one
    /// segment contiguous). Segments with no rows are allowed and empty.
    pub fn from_sorted_ids(ids: &[usize], num_segments: usize) -> Self {
        let mut starts = vec![0usize; num_segments + 1];
        for &id in ids {
            assert!(id < num_segments, "segment id {id} out of range");
            starts[id + 1] += 1;
        }
        for s in 1..starts.len() {
            starts[s] += starts[s - 1];
        }
        debug_assert!(ids.windows(2).all(|w| w[0] <= w[1]), "ids must be sorted");
        Segments { starts }
    }

    pub fn num_segments(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn total_len(&self) -> usize {
        *self.starts.last().unwrap()
    }

    pub fn bounds(&self, s: usize) -> (usize, usize) {
        (self.starts[s], self.starts[s + 1])
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn iter_spans(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.starts.windows(2).map(|w| (w[0], w[1]))
    }
}
