/// Binary sum tree over nonnegative channel rates.
///
/// Updates and sampling are `O(log n)`. Every internal node is recomputed from
/// its two children, so sums never drift and channels with rate zero are
/// never selected.
#[derive(Debug, Clone)]
pub(crate) struct RateTree {
    len: usize,
    size: usize,
    nodes: Vec<f64>,
}

impl RateTree {
    pub fn new(len: usize) -> Self {
        let size = len.max(1).next_power_of_two();
        Self {
            len,
            size,
            nodes: vec![0.0; 2 * size],
        }
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.size + i]
    }

    pub fn set(&mut self, i: usize, value: f64) {
        debug_assert!(i < self.len && value >= 0.0);
        let mut node = self.size + i;
        self.nodes[node] = value;
        while node > 1 {
            node /= 2;
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    pub fn rebuild(&mut self, rates: impl Iterator<Item = f64>) {
        self.nodes.fill(0.0);
        for (i, r) in rates.take(self.len).enumerate() {
            self.nodes[self.size + i] = r;
        }
        for node in (1..self.size).rev() {
            self.nodes[node] = self.nodes[2 * node] + self.nodes[2 * node + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u`, for `0 <= u < total()`.
    pub fn find(&self, mut u: f64) -> usize {
        debug_assert!(self.total() > 0.0);
        let mut node = 1;
        while node < self.size {
            let left = self.nodes[2 * node];
            let right = self.nodes[2 * node + 1];
            if (u < left && left > 0.0) || right == 0.0 {
                node *= 2;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        node - self.size
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_and_selection() {
        let mut tree = RateTree::new(5);
        tree.rebuild([1.0, 0.0, 2.0, 0.0, 3.0].into_iter());
        assert_eq!(tree.total(), 6.0);
        assert_eq!(tree.find(0.5), 0);
        assert_eq!(tree.find(1.0), 2);
        assert_eq!(tree.find(2.999), 2);
        assert_eq!(tree.find(3.0), 4);
        tree.set(2, 0.0);
        assert_eq!(tree.total(), 4.0);
        assert_eq!(tree.find(1.5), 4);
    }

    #[test]
    fn zero_leaves_are_never_chosen() {
        let mut tree = RateTree::new(4);
        tree.rebuild([0.1, 0.2, 0.0, 0.0].into_iter());
        // u at the very top of the range
        let u = tree.total() * (1.0 - f64::EPSILON);
        assert_eq!(tree.find(u), 1);
        for k in 0..1000 {
            let u = tree.total() * k as f64 / 1000.0;
            assert!(tree.get(tree.find(u)) > 0.0);
        }
    }
}
