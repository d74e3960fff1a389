//! Demand clustering and VM type selection.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::resources::Resources;
use crate::seed;

pub const DEFAULT_K_MAX: usize = 8;
pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmType {
    pub name: String,
    pub pe: u32,
    pub mips: f64,
    pub ram_gb: f64,
    pub storage_gb: f64,
}

impl VmType {
    pub fn capacity(&self) -> Resources {
        Resources::new(self.mips, self.ram_gb)
    }
}

/// VM types ordered from smallest to largest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VmCatalog {
    pub types: Vec<VmType>,
}

impl Default for VmCatalog {
    fn default() -> Self {
        let t = |name: &str, pe, mips, ram_gb, storage_gb| VmType { name: name.into(), pe, mips, ram_gb, storage_gb };
        VmCatalog {
            types: vec![
                t("small", 1, 500.0, 0.5, 40.0),
                t("medium", 2, 1000.0, 1.0, 60.0),
                t("large", 3, 1500.0, 2.0, 80.0),
                t("Xlarge", 4, 2000.0, 3.0, 100.0),
            ],
        }
    }
}

impl VmCatalog {
    pub fn new(types: Vec<VmType>) -> Result<Self> {
        let c = VmCatalog { types };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.types.is_empty() {
            return Err(Error::config("catalog", "needs at least one VM type"));
        }
        for t in &self.types {
            let cap = t.capacity();
            if !(cap.cpu > 0.0 && cap.mem > 0.0 && cap.is_valid()) || t.pe == 0 {
                return Err(Error::config("catalog", format!("type {} needs positive capacities", t.name)));
            }
        }
        for w in self.types.windows(2) {
            if !(w[0].capacity().strictly_below(&w[1].capacity()) && w[0].storage_gb < w[1].storage_gb && w[0].pe <= w[1].pe) {
                return Err(Error::config("catalog", format!("capacities must strictly increase ({} -> {})", w[0].name, w[1].name)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn largest(&self) -> &VmType {
        self.types.last().expect("validated catalog is non-empty")
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    /// Smallest type covering `demand` on every resource.
    pub fn smallest_covering(&self, demand: &Resources) -> Result<usize> {
        self.types.iter().position(|t| demand.fits_in(&t.capacity())).ok_or(Error::DemandExceedsLargest)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDemand {
    pub task_id: String,
    pub demand: Resources,
}

impl TaskDemand {
    pub fn new(task_id: impl Into<String>, demand: Resources) -> Result<Self> {
        if !demand.is_valid() {
            return Err(Error::invalid(format!("demand must be finite and non-negative: {demand:?}")));
        }
        Ok(TaskDemand { task_id: task_id.into(), demand })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering<T> {
    pub k: usize,
    pub centroids: Vec<Vec<T>>,
    pub assignment: Vec<usize>,
    pub wcss: T,
    /// Objective after every Lloyd iteration.
    pub history: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> Clustering<T> {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }
}

pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid, lowest index on ties.
pub fn nearest<T: Scalar>(point: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, squared_distance(point, &centroids[0]));
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = squared_distance(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

pub fn wcss<T: Scalar>(points: &[Vec<T>], centroids: &[Vec<T>], assignment: &[usize]) -> T {
    points.iter().zip(assignment).map(|(p, &a)| squared_distance(p, &centroids[a])).sum()
}

fn check_points<T: Scalar>(points: &[Vec<T>]) -> Result<usize> {
    let dim = points.first().map(Vec::len).unwrap_or(0);
    for p in points {
        if p.len() != dim {
            return Err(Error::Dimension { expected: dim, got: p.len() });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
    }
    Ok(dim)
}

fn kmeans_pp<T: Scalar>(points: &[Vec<T>], k: usize, rng: &mut seed::Rng) -> Vec<Vec<T>> {
    let m = points.len();
    let mut chosen = vec![false; m];
    let first = rng.gen_range(0..m);
    chosen[first] = true;
    let mut centroids = vec![points[first].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| squared_distance(p, &points[first]).as_f64()).collect();
    while centroids.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total has a positive entry")
        } else {
            let free: Vec<usize> = (0..m).filter(|&i| !chosen[i]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[next] = true;
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &points[next]).as_f64());
        }
        centroids.push(points[next].clone());
    }
    centroids
}

fn assign<T: Scalar>(points: &[Vec<T>], centroids: &[Vec<T>]) -> Vec<usize> {
    points.iter().map(|p| nearest(p, centroids).0).collect()
}

/// Moves the point farthest from its centroid, among clusters with at least two
/// members, into each empty cluster.
fn fill_empty<T: Scalar>(points: &[Vec<T>], centroids: &mut [Vec<T>], assignment: &mut [usize]) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignment.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else { return };
        let mut far: Option<(usize, T)> = None;
        for (i, p) in points.iter().enumerate() {
            if sizes[assignment[i]] < 2 {
                continue;
            }
            let d = squared_distance(p, &centroids[assignment[i]]);
            if far.is_none_or(|(_, fd)| d > fd) {
                far = Some((i, d));
            }
        }
        let (i, _) = far.expect("k <= points leaves a cluster with two members");
        centroids[empty] = points[i].clone();
        assignment[i] = empty;
    }
}

fn update<T: Scalar>(points: &[Vec<T>], k: usize, dim: usize, assignment: &[usize]) -> Vec<Vec<T>> {
    let mut sums = vec![vec![T::zero(); dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(p) {
            *s = *s + v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        let n = T::lit(c as f64);
        for v in s.iter_mut() {
            *v = *v / n;
        }
    }
    sums
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans<T: Scalar>(points: &[Vec<T>], k: usize, seed: u64, max_iters: usize) -> Result<Clustering<T>> {
    let dim = check_points(points)?;
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::invalid(format!("k = {k} exceeds {} points", points.len())));
    }
    let mut rng = seed::stream(seed, &[seed::tag_str("kmeans"), k as u64]);
    let mut centroids = kmeans_pp(points, k, &mut rng);
    let mut assignment = assign(points, &centroids);
    fill_empty(points, &mut centroids, &mut assignment);
    let mut history = Vec::new();
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        centroids = update(points, k, dim, &assignment);
        history.push(wcss(points, &centroids, &assignment));
        let mut next = assign(points, &centroids);
        fill_empty(points, &mut centroids, &mut next);
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let centroids_final = update(points, k, dim, &assignment);
    let total = wcss(points, &centroids_final, &assignment);
    if history.last().is_none_or(|&h| total < h) {
        history.push(total);
    }
    Ok(Clustering { k, centroids: centroids_final, assignment, wcss: total, history, iterations })
}

/// Elbow selection result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elbow<T> {
    pub k: usize,
    /// `wcss[i]` is the objective at `K = i + 1`.
    pub wcss: Vec<T>,
}

/// Knee of a wcss curve (index 0 is `K = 1`): the `K` in `2..len` with the largest
/// second difference, smaller `K` on ties.
pub fn knee_from_wcss(wcss: &[f64]) -> usize {
    if wcss.is_empty() || wcss[0] == 0.0 {
        return 1;
    }
    if wcss.len() < 3 {
        return wcss.len();
    }
    let mut best = (2, f64::NEG_INFINITY);
    for k in 2..wcss.len() {
        let d2 = wcss[k - 2] - 2.0 * wcss[k - 1] + wcss[k];
        if d2 > best.1 {
            best = (k, d2);
        }
    }
    best.0
}

pub fn elbow<T: Scalar>(points: &[Vec<T>], k_max: usize, seed: u64) -> Result<Elbow<T>> {
    if k_max < 2 {
        return Err(Error::invalid("k_max must be at least 2"));
    }
    check_points(points)?;
    if points.len() < 3 {
        return Ok(Elbow { k: 1, wcss: Vec::new() });
    }
    let mut distinct: Vec<&Vec<T>> = Vec::new();
    for p in points {
        if !distinct.contains(&p) {
            distinct.push(p);
        }
    }
    if distinct.len() == 1 {
        return Ok(Elbow { k: 1, wcss: vec![T::zero()] });
    }
    let top = k_max.min(distinct.len());
    let curve = (1..=top).map(|k| kmeans(points, k, seed, DEFAULT_MAX_ITERS).map(|c| c.wcss)).collect::<Result<Vec<T>>>()?;
    let k = knee_from_wcss(&curve.iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    Ok(Elbow { k, wcss: curve })
}

/// Type index for a cluster: the first band `(cap[t-1], cap[t]]` containing the
/// whole cluster, else the smallest type covering its maximum.
pub fn map_cluster_to_vm(demands: &[Resources], catalog: &VmCatalog) -> Result<usize> {
    let Some(first) = demands.first() else {
        return Err(Error::invalid("cluster is empty"));
    };
    let (lo, hi) = demands.iter().fold((*first, *first), |(lo, hi), d| (lo.min(d), hi.max(d)));
    for (t, ty) in catalog.types.iter().enumerate() {
        let above_prev = t == 0 || catalog.types[t - 1].capacity().strictly_below(&lo);
        if above_prev && hi.fits_in(&ty.capacity()) {
            return Ok(t);
        }
    }
    catalog.smallest_covering(&hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoscaleOptions {
    pub k_max: usize,
    pub max_iters: usize,
}

impl Default for AutoscaleOptions {
    fn default() -> Self {
        AutoscaleOptions { k_max: DEFAULT_K_MAX, max_iters: DEFAULT_MAX_ITERS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmDemand {
    pub k: usize,
    /// Instances per catalog type.
    pub counts: Vec<usize>,
    pub cluster_types: Vec<usize>,
    /// Cluster of each task.
    pub assignment: Vec<usize>,
    /// Catalog type of each task.
    pub task_types: Vec<usize>,
    pub wcss: f64,
}

impl VmDemand {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Clusters task demands and maps each cluster to a VM type; one VM per task.
pub fn autoscale(tasks: &[TaskDemand], catalog: &VmCatalog, options: &AutoscaleOptions, seed: u64) -> Result<VmDemand> {
    if tasks.is_empty() {
        return Err(Error::invalid("autoscale needs at least one task"));
    }
    catalog.validate()?;
    for t in tasks {
        if !t.demand.is_valid() {
            return Err(Error::invalid(format!("task {} has invalid demand", t.task_id)));
        }
    }
    let scale = catalog.largest().capacity();
    let points: Vec<Vec<f64>> = tasks.iter().map(|t| vec![t.demand.cpu / scale.cpu, t.demand.mem / scale.mem]).collect();
    let k = elbow(&points, options.k_max, seed)?.k;
    let clustering = kmeans(&points, k, seed, options.max_iters)?;
    let mut members: Vec<Vec<Resources>> = vec![Vec::new(); k];
    for (t, &c) in tasks.iter().zip(&clustering.assignment) {
        members[c].push(t.demand);
    }
    let cluster_types = members.iter().map(|m| map_cluster_to_vm(m, catalog)).collect::<Result<Vec<_>>>()?;
    let task_types: Vec<usize> = clustering.assignment.iter().map(|&c| cluster_types[c]).collect();
    let mut counts = vec![0; catalog.len()];
    for &t in &task_types {
        counts[t] += 1;
    }
    Ok(VmDemand { k, counts, cluster_types, assignment: clustering.assignment, task_types, wcss: clustering.wcss })
}

/// Per-task sizing without clustering.
pub fn size_individually(tasks: &[TaskDemand], catalog: &VmCatalog) -> Result<VmDemand> {
    let task_types = tasks.iter().map(|t| catalog.smallest_covering(&t.demand)).collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0; catalog.len()];
    for &t in &task_types {
        counts[t] += 1;
    }
    Ok(VmDemand {
        k: tasks.len(),
        counts,
        cluster_types: task_types.clone(),
        assignment: (0..tasks.len()).collect(),
        task_types,
        wcss: 0.0,
    })
}

/// `task_id,cluster,type` rows.
pub fn write_clustering<W: Write>(writer: W, tasks: &[TaskDemand], demand: &VmDemand, catalog: &VmCatalog) -> Result<()> {
    if tasks.len() != demand.assignment.len() {
        return Err(Error::Dimension { expected: demand.assignment.len(), got: tasks.len() });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["task_id", "cluster", "type"])?;
    for ((t, &c), &ty) in tasks.iter().zip(&demand.assignment).zip(&demand.task_types) {
        w.write_record([t.task_id.as_str(), &c.to_string(), &catalog.types[ty].name])?;
    }
    w.flush()?;
    Ok(())
}
