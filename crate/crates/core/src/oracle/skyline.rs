//! Symmetric variable-band (skyline) storage with in-place Cholesky, and a
//! reverse Cuthill-McKee ordering to keep the profile narrow.

use std::collections::VecDeque;

/// Lower profile of a symmetric matrix, stored row by row from the first
/// structurally nonzero column up to the diagonal.
#[derive(Debug, Clone)]
pub struct SkylineMatrix {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineMatrix {
    /// `first[i]` is the leftmost column stored in row `i` (`first[i] <= i`).
    pub fn with_profile(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            debug_assert!(f <= i);
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        SkylineMatrix {
            first,
            start,
            data: vec![0.0; total],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn profile_len(&self) -> usize {
        self.data.len()
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `v` at `(i, j)`; the upper triangle is ignored since the matrix is symmetric.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j > i {
            return;
        }
        debug_assert!(j >= self.first[i], "entry ({i},{j}) outside profile");
        self.data[self.start[i] + j - self.first[i]] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.first[i] {
            0.0
        } else {
            self.data[self.start[i] + j - self.first[i]]
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.data[self.start[i + 1] - 1])
            .collect()
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        for i in 0..self.dim() {
            self.data[self.start[i + 1] - 1] += v;
        }
    }

    /// In-place `A = L·Lᵀ`. Returns the failing row on a non-positive pivot.
    pub fn cholesky(&mut self) -> Result<(), usize> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let sj = self.start[j];
                let dot: f64 = {
                    let a = &self.data[si + (k0 - fi)..si + (j - fi)];
                    let b = &self.data[sj + (k0 - fj)..sj + (j - fj)];
                    a.iter().zip(b).map(|(x, y)| x * y).sum()
                };
                let ljj = self.data[sj + (j - fj)];
                let idx = si + (j - fi);
                self.data[idx] = (self.data[idx] - dot) / ljj;
            }
            let row = &self.data[si..si + (i - fi)];
            let sq: f64 = row.iter().map(|x| x * x).sum();
            let d = self.data[si + (i - fi)] - sq;
            if !(d > 0.0) || !d.is_finite() {
                return Err(i);
            }
            self.data[si + (i - fi)] = d.sqrt();
        }
        Ok(())
    }

    /// Solves `L·Lᵀ x = b` after a successful [`cholesky`](Self::cholesky).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.data[si..si + (i - fi)];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.data[si + (i - fi)];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            y[i] /= self.data[si + (i - fi)];
            let yi = y[i];
            for (k, l) in (fi..i).zip(&self.data[si..si + (i - fi)]) {
                y[k] -= l * yi;
            }
        }
        y
    }
}

/// Reverse Cuthill-McKee permutation of an undirected graph given as sorted
/// adjacency lists. Returns `order[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let degree = |v: usize| adjacency[v].len();
    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree(v), v))
            .expect("unvisited vertex");
        let root = pseudo_peripheral(adjacency, seed, &visited);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v]
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adjacency: &[Vec<usize>], root: usize, blocked: &[bool]) -> Vec<Option<usize>> {
    let mut level = vec![None; adjacency.len()];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let l = level[v].unwrap_or(0);
        for &w in &adjacency[v] {
            if !blocked[w] && level[w].is_none() {
                level[w] = Some(l + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], seed: usize, blocked: &[bool]) -> usize {
    let mut root = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(adjacency, root, blocked);
        let far = level.iter().filter_map(|l| *l).max().unwrap_or(0);
        if far <= ecc && root != seed {
            break;
        }
        ecc = far;
        let candidate = (0..adjacency.len())
            .filter(|&v| level[v] == Some(far))
            .min_by_key(|&v| (adjacency[v].len(), v))
            .unwrap_or(root);
        if candidate == root {
            break;
        }
        root = candidate;
    }
    root
}
