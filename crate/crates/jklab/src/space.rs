//! Finite metric measure spaces.
//!
//! Balls are closed: `B(x, r) = {y : d(x, y) ≤ r}`. Tori keep no distance
//! matrix; distances are computed from lattice coordinates and volumes come
//! from one sorted distance profile (the torus is vertex-transitive). Graph
//! and explicit spaces store a dense distance matrix plus a per-point volume
//! profile.

use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};

/// Relative slack used when deciding `d(x, y) ≤ r`.
pub const BALL_EPS: f64 = 1e-9;

fn within(d: f64, r: f64) -> bool {
    d <= r + BALL_EPS * r.max(1.0)
}

/// Compact description of how a space was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceDoc {
    LatticeTorus { dim: usize, side: usize, spacing: f64 },
    Sierpinski { level: u32 },
    Explicit { points: usize },
}

/// Size caps applied by the builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceLimits {
    /// Maximum number of points for spaces without a stored metric.
    pub max_points: usize,
    /// Maximum number of points for spaces with a dense distance matrix.
    pub max_dense_points: usize,
}

impl Default for SpaceLimits {
    fn default() -> Self {
        Self {
            max_points: 1 << 22,
            max_dense_points: 4096,
        }
    }
}

#[derive(Debug, Clone)]
enum Geometry {
    Torus {
        dim: usize,
        side: usize,
        spacing: f64,
        /// sorted distances from point 0 (distinct values)
        radii: Vec<f64>,
        /// cumulative measure up to and including `radii[i]`
        mass: Vec<f64>,
    },
    Dense {
        d: Vec<f64>,
        /// per point: distinct sorted distances and cumulative measure
        profiles: Vec<(Vec<f64>, Vec<f64>)>,
    },
}

/// Points `0..n` with a symmetric metric and positive weights.
#[derive(Debug, Clone)]
pub struct FiniteMetricMeasureSpace {
    n: usize,
    geometry: Geometry,
    measure: Vec<f64>,
    doc: SpaceDoc,
    diameter: f64,
}

impl FiniteMetricMeasureSpace {
    /// Lattice torus `(ℤ/side)^dim` scaled by `spacing`, with wrapped
    /// Euclidean distance and `μ = spacing^dim` at every point.
    pub fn lattice_torus(dim: usize, side: usize, spacing: f64) -> Result<Self> {
        Self::lattice_torus_with(dim, side, spacing, SpaceLimits::default())
    }

    pub fn lattice_torus_with(dim: usize, side: usize, spacing: f64, limits: SpaceLimits) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Invalid(format!("torus dimension must be 1, 2 or 3, got {dim}")));
        }
        if side < 4 {
            return Err(Error::Invalid(format!("torus side must be at least 4, got {side}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Invalid(format!("torus spacing must be positive, got {spacing}")));
        }
        let n = side
            .checked_pow(dim as u32)
            .filter(|&n| n <= limits.max_points)
            .ok_or(Error::SizeCap {
                what: "lattice torus".into(),
                requested: side.saturating_pow(dim as u32),
                cap: limits.max_points,
            })?;
        let w = spacing.powi(dim as i32);
        let mut geometry = Geometry::Torus {
            dim,
            side,
            spacing,
            radii: vec![],
            mass: vec![],
        };
        let mut probe = Self {
            n,
            geometry: geometry.clone(),
            measure: vec![],
            doc: SpaceDoc::Explicit { points: 0 },
            diameter: 0.0,
        };
        let mut dists: Vec<f64> = (0..n).map(|j| probe.torus_distance(0, j)).collect();
        dists.sort_by(f64::total_cmp);
        let (radii, mass) = compress_profile(dists.iter().map(|&d| (d, w)));
        let diameter = *radii.last().expect("torus is non-empty");
        if let Geometry::Torus {
            radii: r, mass: m, ..
        } = &mut geometry
        {
            *r = radii;
            *m = mass;
        }
        probe.geometry = geometry;
        probe.measure = vec![w; n];
        probe.doc = SpaceDoc::LatticeTorus { dim, side, spacing };
        probe.diameter = diameter;
        Ok(probe)
    }

    /// Level-`level` Sierpinski gasket graph with unit edge lengths, graph
    /// distance and unit measure.
    pub fn sierpinski(level: u32) -> Result<Self> {
        Self::sierpinski_with(level, SpaceLimits::default())
    }

    pub fn sierpinski_with(level: u32, limits: SpaceLimits) -> Result<Self> {
        if level > 8 {
            return Err(Error::Invalid(format!("Sierpinski level must be at most 8, got {level}")));
        }
        let expected = 3 * (3usize.pow(level) + 1) / 2;
        if expected > limits.max_dense_points {
            return Err(Error::SizeCap {
                what: "Sierpinski graph".into(),
                requested: expected,
                cap: limits.max_dense_points,
            });
        }
        let (n, edges) = sierpinski_edges(level);
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut d = vec![f64::INFINITY; n * n];
        for s in 0..n {
            let row = &mut d[s * n..(s + 1) * n];
            row[s] = 0.0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if row[v].is_infinite() {
                        row[v] = row[u] + 1.0;
                        queue.push_back(v);
                    }
                }
            }
        }
        let mut space = Self::dense(n, d, vec![1.0; n])?;
        space.doc = SpaceDoc::Sierpinski { level };
        Ok(space)
    }

    /// Space from an explicit row-major distance matrix, validated for
    /// symmetry, zero diagonal and the triangle inequality on sampled triples.
    pub fn from_metric(n: usize, d: Vec<f64>, measure: Vec<f64>) -> Result<Self> {
        if n > SpaceLimits::default().max_dense_points {
            return Err(Error::SizeCap {
                what: "explicit metric".into(),
                requested: n,
                cap: SpaceLimits::default().max_dense_points,
            });
        }
        if d.len() != n * n || measure.len() != n || n == 0 {
            return Err(Error::Invalid("distance matrix or measure has the wrong size".into()));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(Error::Invalid(format!("d({i},{i}) is not zero")));
            }
            for j in 0..i {
                let (a, b) = (d[i * n + j], d[j * n + i]);
                if !(a.is_finite() && a > 0.0) || (a - b).abs() > 1e-12 * a.max(1.0) {
                    return Err(Error::Invalid(format!(
                        "d({i},{j}) = {a}, d({j},{i}) = {b}: not a symmetric positive distance"
                    )));
                }
            }
        }
        let check = |i: usize, j: usize, k: usize| -> Result<()> {
            if d[i * n + k] > d[i * n + j] + d[j * n + k] + 1e-12 * d[i * n + k].max(1.0) {
                return Err(Error::Invalid(format!("triangle inequality fails for ({i},{j},{k})")));
            }
            Ok(())
        };
        if n <= 40 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        check(i, j, k)?;
                    }
                }
            }
        } else {
            let mut rng = crate::rng::stream(0x7269, 0);
            for _ in 0..20_000 {
                check(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n))?;
            }
        }
        Self::dense(n, d, measure)
    }

    fn dense(n: usize, d: Vec<f64>, measure: Vec<f64>) -> Result<Self> {
        if let Some(i) = measure.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Invalid(format!("measure of point {i} is not positive")));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("metric has infinite distances (disconnected graph)".into()));
        }
        let profiles: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .map(|x| {
                let mut row: Vec<(f64, f64)> = (0..n).map(|y| (d[x * n + y], measure[y])).collect();
                row.sort_by(|a, b| a.0.total_cmp(&b.0));
                compress_profile(row.into_iter())
            })
            .collect();
        let diameter = d.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            n,
            geometry: Geometry::Dense { d, profiles },
            measure,
            doc: SpaceDoc::Explicit { points: n },
            diameter,
        })
    }

    /// Build from a document.
    pub fn from_doc(doc: &SpaceDoc, limits: SpaceLimits) -> Result<Self> {
        match *doc {
            SpaceDoc::LatticeTorus { dim, side, spacing } => Self::lattice_torus_with(dim, side, spacing, limits),
            SpaceDoc::Sierpinski { level } => Self::sierpinski_with(level, limits),
            SpaceDoc::Explicit { .. } => Err(Error::Invalid("explicit spaces cannot be rebuilt from a document".into())),
        }
    }

    pub fn doc(&self) -> &SpaceDoc {
        &self.doc
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn measure(&self, x: usize) -> f64 {
        self.measure[x]
    }

    pub fn measures(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Largest radius that checkers may probe: `diameter / 4`.
    pub fn guard_radius(&self) -> f64 {
        self.diameter / 4.0
    }

    /// Error unless `r ≤ diameter/4`.
    pub fn check_guard(&self, r: f64) -> Result<()> {
        if within(r, self.guard_radius()) {
            Ok(())
        } else {
            Err(Error::Guard {
                radius: r,
                guard: self.guard_radius(),
            })
        }
    }

    /// Whether every point looks the same (tori).
    pub fn is_transitive(&self) -> bool {
        matches!(self.geometry, Geometry::Torus { .. })
    }

    /// Lattice coordinates of a torus point.
    pub fn torus_coords(&self, x: usize) -> Option<Vec<usize>> {
        match self.geometry {
            Geometry::Torus { dim, side, .. } => {
                let mut c = Vec::with_capacity(dim);
                let mut i = x;
                for _ in 0..dim {
                    c.push(i % side);
                    i /= side;
                }
                Some(c)
            }
            Geometry::Dense { .. } => None,
        }
    }

    fn torus_distance(&self, x: usize, y: usize) -> f64 {
        let Geometry::Torus { dim, side, spacing, .. } = self.geometry else {
            unreachable!("torus_distance on a non-torus space");
        };
        let (mut a, mut b) = (x, y);
        let mut s = 0usize;
        for _ in 0..dim {
            let (ca, cb) = (a % side, b % side);
            a /= side;
            b /= side;
            let diff = ca.abs_diff(cb);
            let w = diff.min(side - diff);
            s += w * w;
        }
        (s as f64).sqrt() * spacing
    }

    pub fn distance(&self, x: usize, y: usize) -> f64 {
        match &self.geometry {
            Geometry::Torus { .. } => self.torus_distance(x, y),
            Geometry::Dense { d, .. } => d[x * self.n + y],
        }
    }

    /// `V(x, r) = μ(B(x, r))` for the closed ball; `V(x, 0) = μ_x`.
    pub fn volume(&self, x: usize, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let (radii, mass) = match &self.geometry {
            Geometry::Torus { radii, mass, .. } => (radii, mass),
            Geometry::Dense { profiles, .. } => (&profiles[x].0, &profiles[x].1),
        };
        let k = radii.partition_point(|&d| within(d, r));
        if k == 0 {
            0.0
        } else {
            mass[k - 1]
        }
    }

    /// Points of the closed ball `B(x, r)` in increasing index order.
    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| within(self.distance(x, y), r)).collect()
    }

    /// Smallest positive distance from `x`.
    pub fn min_step(&self, x: usize) -> f64 {
        match &self.geometry {
            Geometry::Torus { radii, .. } => radii[1],
            Geometry::Dense { profiles, .. } => profiles[x].0.get(1).copied().unwrap_or(f64::INFINITY),
        }
    }

    /// Heuristic ε-midpoint scan: the fraction of sampled pairs `(x, y)` for
    /// which some `z` has `d(x,z), d(z,y) ≤ d(x,y)/2 + ε`, with `ε` the
    /// smallest positive distance. Assumes the usual ε-midpoint reading of
    /// the chain condition; it certifies nothing.
    pub fn midpoint_scan(&self, samples: usize, seed: u64) -> f64 {
        if self.n < 2 || samples == 0 {
            return 1.0;
        }
        let mut rng = crate::rng::stream(seed, 0);
        let mut hits = 0usize;
        for _ in 0..samples {
            let x = rng.random_range(0..self.n);
            let y = rng.random_range(0..self.n);
            let eps = self.min_step(x);
            let half = 0.5 * self.distance(x, y) + eps;
            if (0..self.n).any(|z| within(self.distance(x, z), half) && within(self.distance(z, y), half)) {
                hits += 1;
            }
        }
        hits as f64 / samples as f64
    }
}

fn compress_profile(sorted: impl Iterator<Item = (f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    let mut radii: Vec<f64> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    let mut acc = 0.0;
    for (d, m) in sorted {
        acc += m;
        match radii.last() {
            Some(&last) if d <= last + BALL_EPS * last.max(1.0) => {
                *mass.last_mut().expect("non-empty") = acc;
            }
            _ => {
                radii.push(d);
                mass.push(acc);
            }
        }
    }
    (radii, mass)
}

/// Vertices (sorted lexicographically by triangular-lattice coordinates) and
/// edges of the level-`level` gasket graph.
fn sierpinski_edges(level: u32) -> (usize, Vec<(usize, usize)>) {
    let mut offsets: Vec<(i64, i64)> = vec![(0, 0)];
    for k in (0..level).rev() {
        let h = 1i64 << k;
        offsets = offsets
            .iter()
            .flat_map(|&(a, b)| [(a, b), (a + h, b), (a, b + h)])
            .collect();
    }
    let mut raw = Vec::with_capacity(offsets.len() * 3);
    for &(a, b) in &offsets {
        let p = [(a, b), (a + 1, b), (a, b + 1)];
        raw.push((p[0], p[1]));
        raw.push((p[0], p[2]));
        raw.push((p[1], p[2]));
    }
    let mut ids: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for &(p, q) in &raw {
        ids.insert(p, 0);
        ids.insert(q, 0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    let edges = raw.iter().map(|(p, q)| (ids[p], ids[q])).collect();
    (ids.len(), edges)
}

/// Result of [`check_vd_rvd`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeFit {
    /// Pooled log-log slope of `V(x, r)` against `r`.
    pub slope: f64,
    /// Upper exponent `d₂` (the pooled slope).
    pub d2: f64,
    /// Smallest `C_μ` with `V(x,R)/V(x,r) ≤ C_μ (R/r)^{d₂}` on the grid.
    pub c_upper: f64,
    /// Lower exponent `d₁` (the pooled slope).
    pub d1: f64,
    /// Largest `c_μ` with `V(x,R)/V(x,r) ≥ c_μ (R/r)^{d₁}` on the grid.
    pub c_lower: f64,
    /// Whether all base points produced identical ratios.
    pub x_independent: bool,
    pub pass: bool,
}

/// Fit volume doubling and reverse volume doubling over all points and all
/// pairs of grid radii.
///
/// The exponent is the least-squares slope of `log V(x, r)` against `log r`
/// with one intercept per point; the constants are then the extreme
/// residual ratios over all pairs `r < R`. Passes iff the fit is finite and
/// the exponent is positive. The diameter/4 guard is applied whenever the
/// space has more than one point.
pub fn check_vd_rvd(space: &FiniteMetricMeasureSpace, radii: &[f64]) -> Result<VolumeFit> {
    if radii.is_empty() {
        return Err(Error::Invalid("empty radius grid".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    if radii.len() < 2 {
        return Err(Error::Invalid("VD/RVD fit needs at least two distinct radii".into()));
    }
    for &r in &radii {
        if !(r > 0.0) {
            return Err(Error::Invalid(format!("radius {r} is not positive")));
        }
        if space.len() > 1 {
            space.check_guard(r)?;
        }
    }
    let lr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mean_lr = lr.iter().sum::<f64>() / lr.len() as f64;
    let sxx: f64 = lr.iter().map(|x| (x - mean_lr).powi(2)).sum();
    let logs: Vec<Vec<f64>> = (0..space.len())
        .map(|x| radii.iter().map(|&r| space.volume(x, r).ln()).collect())
        .collect();
    let mut sxy = 0.0;
    for lv in &logs {
        let mean_lv = lv.iter().sum::<f64>() / lv.len() as f64;
        sxy += lr.iter().zip(lv).map(|(a, b)| (a - mean_lr) * (b - mean_lv)).sum::<f64>();
    }
    let slope = if sxx > 0.0 { sxy / (sxx * logs.len() as f64) } else { 0.0 };
    let mut c_upper = 0.0f64;
    let mut c_lower = f64::INFINITY;
    for lv in &logs {
        for i in 0..radii.len() {
            for j in i + 1..radii.len() {
                let resid = (lv[j] - lv[i]) - slope * (lr[j] - lr[i]);
                c_upper = c_upper.max(resid.exp());
                c_lower = c_lower.min(resid.exp());
            }
        }
    }
    let x_independent = logs.windows(2).all(|w| w[0] == w[1]);
    let finite = slope.is_finite() && c_upper.is_finite() && c_lower > 0.0;
    Ok(VolumeFit {
        slope,
        d2: slope,
        c_upper,
        d1: slope,
        c_lower,
        x_independent,
        pass: finite && slope > 0.0,
    })
}
