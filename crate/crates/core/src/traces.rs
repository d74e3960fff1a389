//! Workload traces: ingestion, aggregation, normalization, windowing and
//! synthetic generation.
//!
//! Trace files are delimited text with a header `timestamp,vm_id,<res>...`.
//! Demands are fractions of a reference capacity, one column per resource.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::seed;

/// Interval assumed when a trace has no two samples for the same VM.
pub const DEFAULT_INTERVAL_MINUTES: u32 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Epoch seconds.
    pub timestamp: i64,
    /// Demand per resource, in the order of [`TaskSeries::resources`].
    pub demand: Vec<f64>,
}

/// Multi-resource utilization series of one VM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSeries {
    pub vm_id: String,
    pub interval_minutes: u32,
    pub resources: Vec<String>,
    pub samples: Vec<Sample>,
}

impl TaskSeries {
    pub fn new(vm_id: impl Into<String>, interval_minutes: u32, resources: Vec<String>, samples: Vec<Sample>) -> Result<Self> {
        let s = TaskSeries { vm_id: vm_id.into(), interval_minutes, resources, samples };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval_minutes == 0 {
            return Err(Error::invalid("interval_minutes must be positive"));
        }
        if self.resources.is_empty() {
            return Err(Error::invalid("series needs at least one resource"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.demand.len() != self.resources.len() {
                return Err(Error::Dimension { expected: self.resources.len(), got: s.demand.len() });
            }
            if s.demand.iter().any(|d| !d.is_finite() || *d < 0.0) {
                return Err(Error::invalid(format!("sample {i}: demand must be finite and non-negative")));
            }
            if i > 0 && self.samples[i - 1].timestamp >= s.timestamp {
                return Err(Error::invalid(format!("sample {i}: timestamps must be strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn resource_count(&self) -> usize {
        self.resources.len()
    }

    /// Values of one resource across all samples.
    pub fn column(&self, resource: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.demand[resource]).collect()
    }

    /// Restriction to a subset of resources, in the given order.
    pub fn select_resources(&self, which: &[usize]) -> Result<TaskSeries> {
        if let Some(&bad) = which.iter().find(|&&r| r >= self.resources.len()) {
            return Err(Error::invalid(format!("resource index {bad} out of range")));
        }
        Ok(TaskSeries {
            vm_id: self.vm_id.clone(),
            interval_minutes: self.interval_minutes,
            resources: which.iter().map(|&r| self.resources[r].clone()).collect(),
            samples: self
                .samples
                .iter()
                .map(|s| Sample { timestamp: s.timestamp, demand: which.iter().map(|&r| s.demand[r]).collect() })
                .collect(),
        })
    }

    /// First `len` samples.
    pub fn prefix(&self, len: usize) -> TaskSeries {
        TaskSeries {
            vm_id: self.vm_id.clone(),
            interval_minutes: self.interval_minutes,
            resources: self.resources.clone(),
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
        }
    }

    fn step_seconds(&self) -> i64 {
        self.interval_minutes as i64 * 60
    }
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
    pub delimiter: u8,
    /// Native sampling interval. Inferred from the smallest timestamp gap when `None`.
    pub interval_minutes: Option<u32>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { delimiter: b',', interval_minutes: None }
    }
}

/// Parses a trace into one series per VM, ordered by `vm_id`.
pub fn parse_trace<R: Read>(reader: R, opts: &ParseOptions) -> Result<Vec<TaskSeries>> {
    let mut rdr =
        csv::ReaderBuilder::new().delimiter(opts.delimiter).has_headers(true).trim(csv::Trim::All).flexible(true).from_reader(reader);

    let header = rdr.headers()?.clone();
    if header.len() < 3 || !header[0].eq_ignore_ascii_case("timestamp") || !header[1].eq_ignore_ascii_case("vm_id") {
        return Err(Error::Parse { line: 1, msg: "header must be `timestamp,vm_id,<resource>...`".into() });
    }
    let resources: Vec<String> = header.iter().skip(2).map(str::to_string).collect();

    let mut by_vm: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    let mut seen: HashMap<(String, i64), u64> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |msg: String| Error::Parse { line, msg };
        if record.len() != header.len() {
            return Err(bad(format!("expected {} fields, found {}", header.len(), record.len())));
        }
        let timestamp: i64 = record[0].parse().map_err(|_| bad(format!("invalid timestamp `{}`", &record[0])))?;
        let vm_id = record[1].to_string();
        if vm_id.is_empty() {
            return Err(bad("empty vm_id".into()));
        }
        let mut demand = Vec::with_capacity(resources.len());
        for (k, field) in record.iter().skip(2).enumerate() {
            let v: f64 = field.parse().map_err(|_| bad(format!("invalid {} value `{field}`", resources[k])))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite {} value", resources[k])));
            }
            if v < 0.0 {
                return Err(bad(format!("negative {} demand {v}", resources[k])));
            }
            demand.push(v);
        }
        if let Some(first) = seen.insert((vm_id.clone(), timestamp), line) {
            return Err(bad(format!("duplicate sample for vm `{vm_id}` at timestamp {timestamp} (first on line {first})")));
        }
        by_vm.entry(vm_id).or_default().push(Sample { timestamp, demand });
    }

    let mut out = Vec::with_capacity(by_vm.len());
    let mut min_gap: Option<i64> = None;
    for (vm_id, mut samples) in by_vm {
        samples.sort_by_key(|s| s.timestamp);
        for w in samples.windows(2) {
            let gap = w[1].timestamp - w[0].timestamp;
            min_gap = Some(min_gap.map_or(gap, |g| g.min(gap)));
        }
        out.push((vm_id, samples));
    }

    let interval = match opts.interval_minutes {
        Some(0) => return Err(Error::invalid("interval_minutes must be positive")),
        Some(m) => m,
        None => match min_gap {
            Some(g) if g % 60 == 0 => (g / 60) as u32,
            Some(g) => return Err(Error::invalid(format!("sampling gap of {g}s is not a whole number of minutes"))),
            None => DEFAULT_INTERVAL_MINUTES,
        },
    };

    Ok(out
        .into_iter()
        .map(|(vm_id, samples)| TaskSeries { vm_id, interval_minutes: interval, resources: resources.clone(), samples })
        .collect())
}

/// Writes series in the trace format, rows ordered by timestamp then `vm_id`.
pub fn write_trace<W: Write>(writer: W, series: &[TaskSeries], delimiter: u8) -> Result<()> {
    let resources: Vec<String> = match series.first() {
        Some(s) => s.resources.clone(),
        None => vec!["cpu".into(), "mem".into()],
    };
    if series.iter().any(|s| s.resources != resources) {
        return Err(Error::invalid("all series must share the same resource columns"));
    }
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let mut header = vec!["timestamp".to_string(), "vm_id".to_string()];
    header.extend(resources.iter().cloned());
    w.write_record(&header)?;

    let mut rows: Vec<(i64, &str, &Sample)> =
        series.iter().flat_map(|s| s.samples.iter().map(move |x| (x.timestamp, s.vm_id.as_str(), x))).collect();
    rows.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    for (ts, vm, sample) in rows {
        let mut rec = vec![ts.to_string(), vm.to_string()];
        // `{}` on f64 prints the shortest representation that round-trips.
        rec.extend(sample.demand.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Averages samples into windows of `window_minutes`, aligned to the first sample.
pub fn aggregate(series: &TaskSeries, window_minutes: u32) -> Result<TaskSeries> {
    if window_minutes == 0 || !window_minutes.is_multiple_of(series.interval_minutes) {
        return Err(Error::invalid(format!(
            "window of {window_minutes} min is not a multiple of the {} min sampling interval",
            series.interval_minutes
        )));
    }
    if window_minutes == series.interval_minutes || series.samples.is_empty() {
        let mut out = series.clone();
        out.interval_minutes = window_minutes;
        return Ok(out);
    }
    let width = window_minutes as i64 * 60;
    let origin = series.samples[0].timestamp;
    let x = series.resource_count();

    let mut buckets: Vec<(i64, Vec<f64>, usize)> = Vec::new();
    for s in &series.samples {
        let b = (s.timestamp - origin).div_euclid(width);
        match buckets.last_mut() {
            Some((idx, sum, n)) if *idx == b => {
                for (acc, v) in sum.iter_mut().zip(&s.demand) {
                    *acc += v;
                }
                *n += 1;
            }
            _ => {
                if let Some((prev, _, _)) = buckets.last() {
                    if b != prev + 1 {
                        return Err(Error::InsufficientData(format!(
                            "vm `{}`: no samples in aggregation window starting at {}",
                            series.vm_id,
                            origin + (prev + 1) * width
                        )));
                    }
                }
                buckets.push((b, s.demand.clone(), 1));
            }
        }
    }
    let samples = buckets
        .into_iter()
        .map(|(b, sum, n)| Sample { timestamp: origin + b * width, demand: (0..x).map(|k| sum[k] / n as f64).collect() })
        .collect();
    Ok(TaskSeries { vm_id: series.vm_id.clone(), interval_minutes: window_minutes, resources: series.resources.clone(), samples })
}

/// Min/max bounds of one resource.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn normalize(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (v - self.min) / span
        } else {
            0.0
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        denormalize(v, self.min, self.max)
    }
}

/// Series rescaled per resource to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSeries {
    pub base: TaskSeries,
    pub bounds: Vec<Bounds>,
    /// `values[t][k]`: sample `t`, resource `k`.
    pub values: Vec<Vec<f64>>,
}

impl NormalizedSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Min-max normalization per resource. Constant resources map to 0.
pub fn normalize(series: &TaskSeries) -> Result<NormalizedSeries> {
    if series.samples.is_empty() {
        return Err(Error::InsufficientData(format!("vm `{}`: cannot normalize an empty series", series.vm_id)));
    }
    let bounds: Vec<Bounds> = (0..series.resource_count())
        .map(|k| {
            let col = series.samples.iter().map(|s| s.demand[k]);
            let (min, max) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            Bounds { min, max }
        })
        .collect();
    let values = series.samples.iter().map(|s| s.demand.iter().zip(&bounds).map(|(v, b)| b.normalize(*v)).collect()).collect();
    Ok(NormalizedSeries { base: series.clone(), bounds, values })
}

pub fn denormalize(value: f64, d_min: f64, d_max: f64) -> f64 {
    d_min + value * (d_max - d_min)
}

/// One supervised example: `n` lags of every resource and the next sample.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingWindow<T> {
    /// Lag-major: `inputs[lag * x + resource]`, oldest lag first.
    pub inputs: Vec<T>,
    pub target: Vec<T>,
}

/// Sliding windows of `n` consecutive samples followed by their successor.
/// Windows spanning a gap in the timestamps are skipped.
pub fn make_windows<T: Scalar>(series: &NormalizedSeries, n: usize) -> Result<Vec<TrainingWindow<T>>> {
    if n == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    let len = series.len();
    if len < n + 1 {
        return Err(Error::InsufficientData(format!("series of length {len} is too short for {n} lags")));
    }
    let step = series.base.step_seconds();
    let ts: Vec<i64> = series.base.samples.iter().map(|s| s.timestamp).collect();
    // run[t]: length of the contiguous run ending at t
    let mut run = vec![1usize; len];
    for t in 1..len {
        if ts[t] - ts[t - 1] == step {
            run[t] = run[t - 1] + 1;
        }
    }
    let windows = (0..len - n)
        .filter(|&t| run[t + n] > n)
        .map(|t| TrainingWindow {
            inputs: series.values[t..t + n].iter().flatten().map(|&v| T::lit(v)).collect(),
            target: series.values[t + n].iter().map(|&v| T::lit(v)).collect(),
        })
        .collect();
    Ok(windows)
}

/// Input vector made from the last `n` normalized samples.
pub fn latest_inputs<T: Scalar>(series: &NormalizedSeries, n: usize) -> Result<Vec<T>> {
    if series.len() < n {
        return Err(Error::InsufficientData(format!("need {n} samples, have {}", series.len())));
    }
    Ok(series.values[series.len() - n..].iter().flatten().map(|&v| T::lit(v)).collect())
}

/// Per-resource pattern of the synthetic generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePattern {
    pub name: String,
    /// Per-task base level is drawn from `[base_min, base_max]`, skewed toward
    /// `base_min` by `base_skew >= 1`.
    pub base_min: f64,
    pub base_max: f64,
    #[serde(default = "one")]
    pub base_skew: f64,
    /// Relative sinusoid amplitude: `base * (1 + amplitude * sin(..))`.
    #[serde(default)]
    pub amplitude: f64,
    /// Sinusoid period in samples.
    #[serde(default = "default_period")]
    pub period: f64,
    /// Standard deviation of additive Gaussian noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub burst_probability: f64,
    #[serde(default)]
    pub burst_size: f64,
}

fn one() -> f64 {
    1.0
}

fn default_period() -> f64 {
    24.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub tasks: usize,
    /// Samples per task.
    pub length: usize,
    pub interval_minutes: u32,
    #[serde(default)]
    pub start_timestamp: i64,
    /// When true every task shares phase zero; otherwise phases are random.
    #[serde(default)]
    pub aligned_phase: bool,
    pub resources: Vec<ResourcePattern>,
    /// Optional demand classes; each task joins one class and every base level
    /// it draws is multiplied by the class scale.
    #[serde(default)]
    pub classes: Vec<TaskClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskClass {
    pub name: String,
    /// Relative frequency.
    pub weight: f64,
    pub scale: f64,
}

impl Default for SynthSpec {
    /// Mostly small tasks with a tail of heavier classes, each following a daily
    /// cycle with light noise.
    fn default() -> Self {
        let pattern = |name: &str| ResourcePattern {
            name: name.into(),
            base_min: 0.9,
            base_max: 1.0,
            base_skew: 1.0,
            amplitude: 0.2,
            period: 24.0,
            noise: 0.01,
            burst_probability: 0.0,
            burst_size: 0.0,
        };
        let class = |name: &str, weight, scale| TaskClass { name: name.into(), weight, scale };
        SynthSpec {
            tasks: 50,
            length: 48,
            interval_minutes: 5,
            start_timestamp: 0,
            aligned_phase: false,
            resources: vec![pattern("cpu"), pattern("mem")],
            classes: vec![class("light", 0.6, 0.11), class("moderate", 0.2, 0.26), class("heavy", 0.15, 0.52), class("peak", 0.05, 0.86)],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::config("length", "must be positive"));
        }
        if self.interval_minutes == 0 {
            return Err(Error::config("interval_minutes", "must be positive"));
        }
        if self.resources.is_empty() {
            return Err(Error::config("resources", "at least one resource pattern is required"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::config(format!("classes[{i}].weight"), "must be finite and >= 0"));
            }
            if !(c.scale >= 0.0 && c.scale.is_finite()) {
                return Err(Error::config(format!("classes[{i}].scale"), "must be finite and >= 0"));
            }
        }
        if !self.classes.is_empty() && !(self.classes.iter().map(|c| c.weight).sum::<f64>() > 0.0) {
            return Err(Error::config("classes", "weights must not all be zero"));
        }
        for (i, r) in self.resources.iter().enumerate() {
            let f = |name: &str| format!("resources[{i}].{name}");
            if !(0.0..=1.0).contains(&r.base_min) || !(r.base_min..=1.0).contains(&r.base_max) {
                return Err(Error::config(f("base_min/base_max"), "need 0 <= base_min <= base_max <= 1"));
            }
            if !(r.base_skew >= 1.0) {
                return Err(Error::config(f("base_skew"), "must be >= 1"));
            }
            if !(r.amplitude >= 0.0) {
                return Err(Error::config(f("amplitude"), "must be >= 0"));
            }
            if !(r.period > 0.0) {
                return Err(Error::config(f("period"), "must be > 0"));
            }
            if !(r.noise >= 0.0) {
                return Err(Error::config(f("noise"), "must be >= 0"));
            }
            if !(0.0..=1.0).contains(&r.burst_probability) {
                return Err(Error::config(f("burst_probability"), "must lie in [0, 1]"));
            }
            if !(r.burst_size >= 0.0) {
                return Err(Error::config(f("burst_size"), "must be >= 0"));
            }
        }
        Ok(())
    }
}

fn pick_class(classes: &[TaskClass], rng: &mut seed::Rng) -> f64 {
    if classes.is_empty() {
        return 1.0;
    }
    let total: f64 = classes.iter().map(|c| c.weight).sum();
    let mut u = rng.gen::<f64>() * total;
    for c in classes {
        if u < c.weight {
            return c.scale;
        }
        u -= c.weight;
    }
    classes.iter().rev().find(|c| c.weight > 0.0).map_or(1.0, |c| c.scale)
}

/// Deterministic synthetic workload; values are clipped to `[0, 1]`.
pub fn synth_workload(spec: &SynthSpec, seed: u64) -> Result<Vec<TaskSeries>> {
    spec.validate()?;
    let names: Vec<String> = spec.resources.iter().map(|r| r.name.clone()).collect();
    let width = (spec.tasks.max(1) - 1).to_string().len();
    let step = spec.interval_minutes as i64 * 60;
    let mut out = Vec::with_capacity(spec.tasks);
    for task in 0..spec.tasks {
        let mut rng = seed::stream(seed, &[task as u64]);
        let scale = pick_class(&spec.classes, &mut rng);
        let params: Vec<(f64, f64)> = spec
            .resources
            .iter()
            .map(|r| {
                let u: f64 = rng.gen();
                let base = scale * (r.base_min + (r.base_max - r.base_min) * u.powf(r.base_skew));
                let phase = if spec.aligned_phase { 0.0 } else { rng.gen::<f64>() * std::f64::consts::TAU };
                (base, phase)
            })
            .collect();
        let samples = (0..spec.length)
            .map(|t| {
                let demand = spec
                    .resources
                    .iter()
                    .zip(&params)
                    .map(|(r, &(base, phase))| {
                        let angle = std::f64::consts::TAU * t as f64 / r.period + phase;
                        let mut v = base * (1.0 + r.amplitude * angle.sin());
                        if r.noise > 0.0 {
                            v += Normal::new(0.0, r.noise).expect("noise is validated").sample(&mut rng);
                        }
                        if r.burst_probability > 0.0 && rng.gen::<f64>() < r.burst_probability {
                            v += r.burst_size;
                        }
                        v.clamp(0.0, 1.0)
                    })
                    .collect();
                Sample { timestamp: spec.start_timestamp + t as i64 * step, demand }
            })
            .collect();
        out.push(TaskSeries {
            vm_id: format!("vm-{task:0width$}"),
            interval_minutes: spec.interval_minutes,
            resources: names.clone(),
            samples,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(vals: &[f64]) -> TaskSeries {
        TaskSeries::new(
            "v",
            5,
            vec!["cpu".into()],
            vals.iter().enumerate().map(|(i, &v)| Sample { timestamp: i as i64 * 300, demand: vec![v] }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn parse_header_only_is_empty() {
        let out = parse_trace("timestamp,vm_id,cpu,mem\n".as_bytes(), &ParseOptions::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn parse_single_vm_in_order() {
        let text = "timestamp,vm_id,cpu\n0,a,0.1\n300,a,0.2\n600,a,0.3\n";
        let out = parse_trace(text.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].column(0), vec![0.1, 0.2, 0.3]);
        assert_eq!(out[0].interval_minutes, 5);
    }

    #[test]
    fn parse_interleaved_vms_sorted_per_vm() {
        let rows = [(600, "b", 0.6), (0, "a", 0.1), (300, "b", 0.5), (600, "a", 0.3), (300, "a", 0.2), (0, "b", 0.4)];
        let mut text = String::from("timestamp,vm_id,cpu\n");
        for (t, vm, v) in rows {
            text.push_str(&format!("{t},{vm},{v}\n"));
        }
        let out = parse_trace(text.as_bytes(), &ParseOptions::default()).unwrap();
        // oracle: filter raw rows by vm and sort by timestamp
        for s in &out {
            let mut expect: Vec<(i64, f64)> = rows.iter().filter(|r| r.1 == s.vm_id).map(|r| (r.0 as i64, r.2)).collect();
            expect.sort_by_key(|r| r.0);
            let got: Vec<(i64, f64)> = s.samples.iter().map(|x| (x.timestamp, x.demand[0])).collect();
            assert_eq!(got, expect);
        }
        assert_eq!(out.iter().map(|s| s.vm_id.as_str()).collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn parse_errors_name_line() {
        let err = parse_trace("timestamp,vm_id,cpu\n0,a,0.1\n300,a,abc\n".as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_trace("timestamp,vm_id,cpu\n0,a,-0.1\n".as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
        let err = parse_trace("timestamp,vm_id,cpu\n0,a,0.1\n0,a,0.2\n".as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        let err = parse_trace("time,vm,cpu\n".as_bytes(), &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_custom_delimiter() {
        let out =
            parse_trace("timestamp;vm_id;cpu;mem\n0;a;0.1;0.2\n".as_bytes(), &ParseOptions { delimiter: b';', interval_minutes: Some(10) })
                .unwrap();
        assert_eq!(out[0].samples[0].demand, vec![0.1, 0.2]);
        assert_eq!(out[0].interval_minutes, 10);
    }

    #[test]
    fn aggregate_identity_and_mean() {
        let s = series(&[0.2, 0.4, 0.6, 0.8]);
        assert_eq!(aggregate(&s, 5).unwrap().samples, s.samples);
        let a = aggregate(&s, 10).unwrap();
        assert_eq!(a.len(), 2);
        assert!((a.samples[0].demand[0] - 0.3).abs() < 1e-12);
        assert!((a.samples[1].demand[0] - 0.7).abs() < 1e-12);
        assert_eq!(a.interval_minutes, 10);
    }

    #[test]
    fn aggregate_twelve_into_one_hour() {
        let vals: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let a = aggregate(&series(&vals), 60).unwrap();
        assert_eq!(a.len(), 1);
        let mut hand = 0.0;
        for v in &vals {
            hand += v;
        }
        assert!((a.samples[0].demand[0] - hand / 12.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_rejects_non_multiple_and_gaps() {
        let s = series(&[0.1, 0.2]);
        assert!(aggregate(&s, 7).is_err());
        let gap = TaskSeries::new(
            "g",
            5,
            vec!["cpu".into()],
            vec![Sample { timestamp: 0, demand: vec![0.1] }, Sample { timestamp: 1800, demand: vec![0.2] }],
        )
        .unwrap();
        assert!(matches!(aggregate(&gap, 10), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&series(&[2.0, 4.0, 6.0])).unwrap();
        assert_eq!(n.values, vec![vec![0.0], vec![0.5], vec![1.0]]);
        let n = normalize(&series(&[5.0, 5.0, 5.0])).unwrap();
        assert_eq!(n.values, vec![vec![0.0]; 3]);
        assert_eq!(n.bounds[0].denormalize(0.0), 5.0);
        let n = normalize(&series(&[0.1, 0.7, 0.4])).unwrap();
        let expect = [0.0, 1.0, 0.5];
        for (v, e) in n.values.iter().zip(expect) {
            assert!((v[0] - e).abs() < 1e-12);
        }
        assert!(normalize(&series(&[])).is_err());
    }

    #[test]
    fn denormalize_examples() {
        assert_eq!(denormalize(0.0, 2.0, 6.0), 2.0);
        assert_eq!(denormalize(1.0, 2.0, 6.0), 6.0);
        assert_eq!(denormalize(0.5, 2.0, 6.0), 4.0);
    }

    #[test]
    fn windows_count_and_shape() {
        let n = 3;
        let norm = normalize(&series(&[0.0, 0.1, 0.2, 0.3])).unwrap();
        assert_eq!(make_windows::<f64>(&norm, n).unwrap().len(), 1);

        let vals: Vec<f64> = (0..n + 3).map(|i| i as f64).collect();
        let norm = normalize(&series(&vals)).unwrap();
        let w = make_windows::<f64>(&norm, n).unwrap();
        assert_eq!(w.len(), 3);
        // enumerate index ranges by hand: [0,3)->3, [1,4)->4, [2,5)->5
        for (t, win) in w.iter().enumerate() {
            let expect: Vec<f64> = (t..t + n).map(|i| norm.values[i][0]).collect();
            assert_eq!(win.inputs, expect);
            assert_eq!(win.target, vec![norm.values[t + n][0]]);
        }
        assert_eq!(w[0].inputs[1..], w[1].inputs[..n - 1]);

        let two = TaskSeries::new(
            "x",
            5,
            vec!["cpu".into(), "mem".into()],
            (0..6).map(|i| Sample { timestamp: i * 300, demand: vec![i as f64, 10.0 - i as f64] }).collect(),
        )
        .unwrap();
        let w = make_windows::<f64>(&normalize(&two).unwrap(), 3).unwrap();
        assert!(w.iter().all(|w| w.inputs.len() == 6 && w.target.len() == 2));

        assert!(make_windows::<f64>(&normalize(&series(&[0.1, 0.2])).unwrap(), 3).is_err());
    }

    #[test]
    fn windows_skip_gaps() {
        let ts = [0, 300, 600, 900, 2400, 2700, 3000, 3300];
        let s = TaskSeries::new(
            "g",
            5,
            vec!["cpu".into()],
            ts.iter().enumerate().map(|(i, &t)| Sample { timestamp: t, demand: vec![i as f64] }).collect(),
        )
        .unwrap();
        let w = make_windows::<f64>(&normalize(&s).unwrap(), 2).unwrap();
        // runs of 4 and 4 → 2 windows each
        assert_eq!(w.len(), 4);
    }

    #[test]
    fn synth_degenerate_is_constant() {
        let mut spec = SynthSpec { tasks: 3, ..SynthSpec::default() };
        for r in &mut spec.resources {
            r.amplitude = 0.0;
            r.noise = 0.0;
        }
        for s in synth_workload(&spec, 1).unwrap() {
            for k in 0..2 {
                let col = s.column(k);
                assert!(col.iter().all(|&v| v == col[0]));
            }
        }
    }

    #[test]
    fn synth_is_deterministic() {
        let spec = SynthSpec::default();
        assert_eq!(synth_workload(&spec, 9).unwrap(), synth_workload(&spec, 9).unwrap());
        assert_ne!(synth_workload(&spec, 9).unwrap(), synth_workload(&spec, 10).unwrap());
    }

    #[test]
    fn synth_autocorrelation_peaks_at_period() {
        let period = 12usize;
        let spec = SynthSpec {
            tasks: 1,
            length: 240,
            interval_minutes: 5,
            start_timestamp: 0,
            aligned_phase: false,
            resources: vec![ResourcePattern {
                name: "cpu".into(),
                base_min: 0.4,
                base_max: 0.4,
                base_skew: 1.0,
                amplitude: 0.5,
                period: period as f64,
                noise: 0.02,
                burst_probability: 0.0,
                burst_size: 0.0,
            }],
            classes: Vec::new(),
        };
        let col = synth_workload(&spec, 3).unwrap()[0].column(0);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let acf = |lag: usize| -> f64 {
            (0..col.len() - lag).map(|t| (col[t] - mean) * (col[t + lag] - mean)).sum::<f64>() / (col.len() - lag) as f64
        };
        let best = (period / 2 + 1..=period * 3 / 2).max_by(|&a, &b| acf(a).total_cmp(&acf(b))).unwrap();
        assert_eq!(best, period);
    }

    #[test]
    fn synth_rejects_bad_spec() {
        let spec = SynthSpec { length: 0, ..SynthSpec::default() };
        assert!(synth_workload(&spec, 0).is_err());
        let spec = SynthSpec { tasks: 0, ..SynthSpec::default() };
        assert!(synth_workload(&spec, 0).unwrap().is_empty());
        let mut spec = SynthSpec::default();
        spec.classes.iter_mut().for_each(|c| c.weight = 0.0);
        assert!(synth_workload(&spec, 0).is_err());
    }

    #[test]
    fn synth_classes_scale_base_levels() {
        let mut spec = SynthSpec { tasks: 400, length: 1, aligned_phase: true, ..SynthSpec::default() };
        spec.resources.iter_mut().for_each(|r| r.noise = 0.0);
        let levels: Vec<f64> = synth_workload(&spec, 2).unwrap().iter().map(|s| s.samples[0].demand[0]).collect();
        for v in &levels {
            assert!(spec.classes.iter().any(|c| *v >= 0.9 * c.scale - 1e-12 && *v <= c.scale + 1e-12), "{v}");
        }
        let light = levels.iter().filter(|&&v| v <= 0.11).count() as f64 / levels.len() as f64;
        assert!((light - 0.6).abs() < 0.08, "{light}");
    }
}
