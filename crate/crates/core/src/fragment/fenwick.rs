/// Growable Fenwick tree over non-negative weights, used to sample a
/// component with probability proportional to its area.
#[derive(Debug, Clone, Default)]
pub(crate) struct Fenwick {
    tree: Vec<f64>,
    weights: Vec<f64>,
    positive: usize,
}

impl Fenwick {
    fn prefix(&self, mut i: usize) -> f64 {
        // sum of weights[0..i]
        let mut s = 0.0;
        while i > 0 {
            s += self.tree[i - 1];
            i &= i - 1;
        }
        s
    }

    pub fn push(&mut self, w: f64) {
        let i = self.weights.len() + 1;
        let low = i & i.wrapping_neg();
        let node = w + self.prefix(i - 1) - self.prefix(i - low);
        self.tree.push(node);
        self.weights.push(w);
        if w > 0.0 {
            self.positive += 1;
        }
    }

    pub fn set(&mut self, idx: usize, w: f64) {
        let delta = w - self.weights[idx];
        if self.weights[idx] > 0.0 {
            self.positive -= 1;
        }
        if w > 0.0 {
            self.positive += 1;
        }
        self.weights[idx] = w;
        let mut i = idx + 1;
        while i <= self.tree.len() {
            self.tree[i - 1] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Total weight; exactly zero when no weight is positive.
    pub fn total(&self) -> f64 {
        if self.positive == 0 {
            0.0
        } else {
            self.prefix(self.weights.len()).max(0.0)
        }
    }

    /// Index `i` with `prefix(i) ≤ target < prefix(i + 1)`, restricted to
    /// positive weights.
    pub fn find(&self, target: f64) -> usize {
        let n = self.tree.len();
        let mut pos = 0;
        let mut rem = target;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next - 1] <= rem {
                rem -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        let mut i = pos.min(n - 1);
        // Rounding may land on an empty slot; move to the nearest positive one.
        if self.weights[i] <= 0.0 {
            if let Some(j) = (i..n).find(|&j| self.weights[j] > 0.0) {
                i = j;
            } else if let Some(j) = (0..i).rev().find(|&j| self.weights[j] > 0.0) {
                i = j;
            }
        }
        i
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_matches_prefix_sums() {
        let mut f = Fenwick::default();
        for w in [0.5, 0.0, 0.25, 0.25] {
            f.push(w);
        }
        assert_eq!(f.find(0.1), 0);
        assert_eq!(f.find(0.6), 2);
        assert_eq!(f.find(0.8), 3);
        f.set(0, 0.0);
        assert_eq!(f.find(0.1), 2);
        assert!((f.total() - 0.5).abs() < 1e-15);
        f.set(2, 0.0);
        f.set(3, 0.0);
        assert_eq!(f.total(), 0.0);
    }
}
