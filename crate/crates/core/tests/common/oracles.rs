//! Independent f64 reference implementations used as test oracles.
//!
//! These deliberately share no code with the crate: plain nested loops over
//! row-major `f64` matrices.

#[derive(Clone, Debug, PartialEq)]
pub struct M {
    pub r: usize,
    pub c: usize,
    pub d: Vec<f64>,
}

impl M {
    pub fn new(r: usize, c: usize, d: Vec<f64>) -> Self {
        assert_eq!(r * c, d.len());
        Self { r, c, d }
    }
    pub fn zeros(r: usize, c: usize) -> Self {
        Self::new(r, c, vec![0.0; r * c])
    }
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.c + j]
    }
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.d[i * self.c + j] = v;
    }
    pub fn map(&self, f: impl Fn(f64) -> f64) -> M {
        M::new(self.r, self.c, self.d.iter().map(|&x| f(x)).collect())
    }
    pub fn zip(&self, o: &M, f: impl Fn(f64, f64) -> f64) -> M {
        assert_eq!((self.r, self.c), (o.r, o.c));
        M::new(
            self.r,
            self.c,
            self.d.iter().zip(&o.d).map(|(&a, &b)| f(a, b)).collect(),
        )
    }
    pub fn t(&self) -> M {
        let mut out = M::zeros(self.c, self.r);
        for i in 0..self.r {
            for j in 0..self.c {
                out.set(j, i, self.at(i, j));
            }
        }
        out
    }
    pub fn sum(&self) -> f64 {
        self.d.iter().sum()
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.d[i * self.c..(i + 1) * self.c]
    }
}

pub fn matmul(a: &M, b: &M) -> M {
    assert_eq!(a.c, b.r);
    let mut out = M::zeros(a.r, b.c);
    for i in 0..a.r {
        for j in 0..b.c {
            let mut s = 0.0;
            for k in 0..a.c {
                s += a.at(i, k) * b.at(k, j);
            }
            out.set(i, j, s);
        }
    }
    out
}

pub fn add_row(a: &M, row: &[f64]) -> M {
    let mut out = a.clone();
    for i in 0..a.r {
        for j in 0..a.c {
            out.d[i * a.c + j] += row[j];
        }
    }
    out
}

pub fn linear(x: &M, w: &[f64], b: &[f64], out_dim: usize) -> M {
    let w = M::new(x.c, out_dim, w.to_vec());
    add_row(&matmul(x, &w), b)
}

pub fn relu(a: &M) -> M {
    a.map(|x| x.max(0.0))
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Training-mode batch normalization with biased batch variance.
pub fn batch_norm_train(x: &M, gamma: &[f64], beta: &[f64], eps: f64) -> M {
    let n = x.r as f64;
    let mut out = x.clone();
    for j in 0..x.c {
        let mean = (0..x.r).map(|i| x.at(i, j)).sum::<f64>() / n;
        let var = (0..x.r).map(|i| (x.at(i, j) - mean).powi(2)).sum::<f64>() / n;
        for i in 0..x.r {
            out.set(i, j, gamma[j] * (x.at(i, j) - mean) / (var + eps).sqrt() + beta[j]);
        }
    }
    out
}

pub fn gather(a: &M, idx: &[usize]) -> M {
    let mut out = M::zeros(idx.len(), a.c);
    for (r, &i) in idx.iter().enumerate() {
        for j in 0..a.c {
            out.set(r, j, a.at(i, j));
        }
    }
    out
}

pub fn segment_sum(a: &M, ids: &[usize], s: usize) -> M {
    let mut out = M::zeros(s, a.c);
    for (r, &id) in ids.iter().enumerate() {
        for j in 0..a.c {
            out.d[id * a.c + j] += a.at(r, j);
        }
    }
    out
}

pub fn normalize_rows(a: &M, eps: f64) -> M {
    let mut out = a.clone();
    for i in 0..a.r {
        let norm = a.row(i).iter().map(|x| x * x).sum::<f64>().sqrt().max(eps);
        for j in 0..a.c {
            out.set(i, j, a.at(i, j) / norm);
        }
    }
    out
}

pub fn log_softmax_rows(a: &M) -> M {
    let mut out = a.clone();
    for i in 0..a.r {
        let max = a.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + a.row(i).iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        for j in 0..a.c {
            out.set(i, j, a.at(i, j) - lse);
        }
    }
    out
}

pub fn concat_cols(a: &M, b: &M) -> M {
    let mut out = M::zeros(a.r, a.c + b.c);
    for i in 0..a.r {
        for j in 0..a.c {
            out.set(i, j, a.at(i, j));
        }
        for j in 0..b.c {
            out.set(i, a.c + j, b.at(i, j));
        }
    }
    out
}

/// Contrastive loss: mean over rows of -log softmax(cos(z1_i, z2_j)/tau)_ii.
pub fn nt_xent(z1: &M, z2: &M, tau: f64) -> f64 {
    let a = normalize_rows(z1, 1e-8);
    let b = normalize_rows(z2, 1e-8);
    let s = matmul(&a, &b.t()).map(|x| x / tau);
    let l = log_softmax_rows(&s);
    -(0..z1.r).map(|i| l.at(i, i)).sum::<f64>() / z1.r as f64
}

/// All-pairs shortest paths by Floyd–Warshall; `None` for unreachable pairs.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<Option<usize>>> {
    let mut d = vec![vec![None; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = Some(0);
    }
    for &(u, v) in edges {
        d[u][v] = Some(1);
        d[v][u] = Some(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].map_or(true, |c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

pub struct BruteMetrics {
    pub diameter: usize,
    pub avg_clustering: f64,
    pub transitivity: f64,
    pub density: f64,
}

/// Metrics by direct enumeration over node triples.
pub fn brute_metrics(n: usize, edges: &[(usize, usize)]) -> BruteMetrics {
    let mut adj = vec![vec![false; n]; n];
    for &(u, v) in edges {
        adj[u][v] = true;
        adj[v][u] = true;
    }
    let dist = floyd_warshall(n, edges);
    // Largest component by reachability classes (smallest id wins ties).
    let mut best: Vec<usize> = Vec::new();
    let mut assigned = vec![false; n];
    for s in 0..n {
        if assigned[s] {
            continue;
        }
        let comp: Vec<usize> = (0..n).filter(|&t| dist[s][t].is_some()).collect();
        comp.iter().for_each(|&t| assigned[t] = true);
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut diameter = 0;
    for &a in &best {
        for &b in &best {
            diameter = diameter.max(dist[a][b].unwrap());
        }
    }
    let mut clustering = 0.0;
    let mut closed = 0usize;
    let mut triads = 0usize;
    for v in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&u| adj[v][u]).collect();
        let mut links = 0;
        let mut pairs = 0;
        for i in 0..nbrs.len() {
            for j in i + 1..nbrs.len() {
                pairs += 1;
                if adj[nbrs[i]][nbrs[j]] {
                    links += 1;
                }
            }
        }
        if pairs > 0 {
            clustering += links as f64 / pairs as f64;
        }
        closed += links;
        triads += pairs;
    }
    BruteMetrics {
        diameter,
        avg_clustering: if n == 0 { 0.0 } else { clustering / n as f64 },
        transitivity: if triads == 0 {
            0.0
        } else {
            closed as f64 / triads as f64
        },
        density: if n < 2 {
            0.0
        } else {
            2.0 * edges.len() as f64 / (n * (n - 1)) as f64
        },
    }
}

/// Union-find acyclicity check.
pub fn is_forest(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for &(u, v) in edges {
        let (a, b) = (find(&mut parent, u), find(&mut parent, v));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// BFS hop distances from `s` over an edge list.
pub fn bfs_distances(n: usize, edges: &[(usize, usize)], s: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut d = vec![None; n];
    d[s] = Some(0);
    let mut q = std::collections::VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

/// Random d-regular graph by the configuration model with rejection.
pub fn random_regular(n: usize, d: usize, rng: &mut impl rand::Rng) -> Vec<(usize, usize)> {
    use rand::seq::SliceRandom;
    'retry: loop {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
        stubs.shuffle(rng);
        let mut seen = std::collections::HashSet::new();
        let mut edges = Vec::new();
        for pair in stubs.chunks(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u == v || !seen.insert((u, v)) {
                continue 'retry;
            }
            edges.push((u, v));
        }
        return edges;
    }
}

/// 1-WL color refinement; returns the sorted final color histogram after
/// refining both graphs jointly so colors are comparable.
pub fn wl_histograms(a: &[Vec<usize>], b: &[Vec<usize>], rounds: usize) -> (Vec<usize>, Vec<usize>) {
    use std::collections::BTreeMap;
    let mut ca = vec![0usize; a.len()];
    let mut cb = vec![0usize; b.len()];
    for _ in 0..rounds {
        let sig = |adj: &[Vec<usize>], c: &[usize]| -> Vec<(usize, Vec<usize>)> {
            (0..adj.len())
                .map(|v| {
                    let mut m: Vec<usize> = adj[v].iter().map(|&u| c[u]).collect();
                    m.sort_unstable();
                    (c[v], m)
                })
                .collect()
        };
        let sa = sig(a, &ca);
        let sb = sig(b, &cb);
        let mut table = BTreeMap::new();
        for s in sa.iter().chain(&sb) {
            let next = table.len();
            table.entry(s.clone()).or_insert(next);
        }
        ca = sa.iter().map(|s| table[s]).collect();
        cb = sb.iter().map(|s| table[s]).collect();
    }
    ca.sort_unstable();
    cb.sort_unstable();
    (ca, cb)
}
