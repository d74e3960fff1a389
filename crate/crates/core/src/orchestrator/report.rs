use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{resource_columns, ScenarioKind, ScenarioRun};
use crate::error::{Error, Result};
use crate::predictor::Topology;
use crate::traces::{aggregate, make_windows, normalize, TaskSeries, TrainingWindow};
use crate::training::{train_tade, TadeConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: ScenarioKind,
    pub intervals: usize,
    pub failed_intervals: usize,
    pub mean_ru: f64,
    pub mean_pw: f64,
    pub mean_active_pms: f64,
    pub violations: usize,
    /// Power saved relative to WPWA, percent.
    pub power_saving_pct: Option<f64>,
    /// Utilization gained relative to WPWA, percentage points.
    pub ru_gain_pts: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, kind: ScenarioKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scenario == kind)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Per-scenario means over successful intervals, ordered OA, PA, PWA, WPWA.
pub fn compare_scenarios(runs: &[ScenarioRun]) -> Result<Comparison> {
    if let Some(first) = runs.first() {
        if let Some(r) = runs.iter().find(|r| r.intervals.len() != first.intervals.len()) {
            return Err(Error::Mismatch(format!(
                "scenario {} has {} intervals, {} has {}",
                r.scenario.kind,
                r.intervals.len(),
                first.scenario.kind,
                first.intervals.len()
            )));
        }
    }
    let mut rows: Vec<ComparisonRow> = runs
        .iter()
        .map(|run| {
            let ok: Vec<_> = run.intervals.iter().filter(|m| m.error.is_none()).collect();
            ComparisonRow {
                scenario: run.scenario.kind,
                intervals: run.intervals.len(),
                failed_intervals: run.intervals.len() - ok.len(),
                mean_ru: mean(ok.iter().map(|m| m.ru)),
                mean_pw: mean(ok.iter().map(|m| m.pw)),
                mean_active_pms: mean(ok.iter().map(|m| m.active_pms as f64)),
                violations: ok.iter().map(|m| m.violations).sum(),
                power_saving_pct: None,
                ru_gain_pts: None,
            }
        })
        .collect();
    rows.sort_by_key(|r| r.scenario);
    if let Some(base) = rows.iter().find(|r| r.scenario == ScenarioKind::Wpwa).cloned() {
        for r in &mut rows {
            r.power_saving_pct = Some(if base.mean_pw > 0.0 { 100.0 * (base.mean_pw - r.mean_pw) / base.mean_pw } else { 0.0 });
            r.ru_gain_pts = Some(100.0 * (r.mean_ru - base.mean_ru));
        }
    }
    Ok(Comparison { rows })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per interval.
pub fn write_metrics<W: Write>(writer: W, run: &ScenarioRun, type_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["interval", "ru", "pw", "active_pms", "vms"].map(String::from).to_vec();
    header.extend(type_names.iter().map(|n| format!("vm_{n}")));
    header.extend(["unprovisioned", "violations", "churn", "xi_cpu", "xi_mem", "sizing_ok", "error"].map(String::from));
    w.write_record(&header)?;
    for m in &run.intervals {
        let mut rec = vec![m.interval.to_string(), m.ru.to_string(), m.pw.to_string(), m.active_pms.to_string(), m.vms.to_string()];
        for i in 0..type_names.len() {
            rec.push(m.vm_counts.get(i).copied().unwrap_or(0).to_string());
        }
        rec.push(m.unprovisioned.to_string());
        rec.push(m.violations.to_string());
        rec.push(m.churn.to_string());
        rec.push(opt(m.xi.map(|x| x[0])));
        rec.push(opt(m.xi.map(|x| x[1])));
        rec.push(m.sizing_ok.to_string());
        rec.push(m.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparison<W: Write>(writer: W, comparison: &Comparison) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "scenario",
        "intervals",
        "failed_intervals",
        "mean_ru",
        "mean_pw",
        "mean_active_pms",
        "violations",
        "power_saving_pct",
        "ru_gain_pts",
    ])?;
    for r in &comparison.rows {
        w.write_record([
            r.scenario.label().to_string(),
            r.intervals.to_string(),
            r.failed_intervals.to_string(),
            r.mean_ru.to_string(),
            r.mean_pw.to_string(),
            r.mean_active_pms.to_string(),
            r.violations.to_string(),
            opt(r.power_saving_pct),
            opt(r.ru_gain_pts),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Accuracy and cost of one predictor family at one window size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub pws: u32,
    /// `OM-FNN` (one multi-output network) or `SISO-FNN` (one network per resource).
    pub family: String,
    /// Mean validation error across tasks, per resource.
    pub xi: [f64; 2],
    /// Summed training wall time; only filled when timing is requested.
    pub train_ms: Option<f64>,
    /// Floating-point values held by one training population per task.
    pub population_values: usize,
    pub tasks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub rows: Vec<PredictionRow>,
}

fn windows_for(series: &TaskSeries, cols: &[usize], n: usize) -> Result<Vec<TrainingWindow<f64>>> {
    make_windows(&normalize(&series.select_resources(cols)?)?, n)
}

/// Trains a two-output network and two single-output networks per task at every
/// window size and reports validation error, training time and population size.
pub fn prediction_report(
    traces: &[TaskSeries],
    pws_set: &[u32],
    inputs: usize,
    hidden: usize,
    tade: &TadeConfig,
    timing: bool,
) -> Result<PredictionReport> {
    let om_topology = Topology::new(inputs, hidden, 1, 2)?;
    let siso_topology = Topology::new(inputs, hidden, 1, 1)?;
    let mut rows = Vec::new();
    for &pws in pws_set {
        let mut om_xi = [0.0; 2];
        let mut siso_xi = [0.0; 2];
        let mut om_time = 0.0;
        let mut siso_time = 0.0;
        let mut tasks = 0;
        for (i, raw) in traces.iter().enumerate() {
            let series = aggregate(raw, pws)?;
            let cols = resource_columns(&series)?;
            let both = windows_for(&series, &cols, inputs)?;
            if both.len() < 2 {
                continue;
            }
            let cfg = TadeConfig { seed: crate::seed::derive(tade.seed, &[pws as u64, i as u64]), ..tade.clone() };
            let clock = Instant::now();
            let om = train_tade(&both, &om_topology, &cfg)?;
            om_time += clock.elapsed().as_secs_f64();
            for (k, &col) in cols.iter().enumerate() {
                let single = windows_for(&series, &[col], inputs)?;
                let clock = Instant::now();
                let siso = train_tade(&single, &siso_topology, &cfg)?;
                siso_time += clock.elapsed().as_secs_f64();
                siso_xi[k] += siso.validation_fitness.per_resource[0];
                om_xi[k] += om.validation_fitness.per_resource[k];
            }
            tasks += 1;
        }
        if tasks == 0 {
            return Err(Error::InsufficientData(format!("no task has enough samples at PWS {pws}")));
        }
        let avg = |x: [f64; 2]| [x[0] / tasks as f64, x[1] / tasks as f64];
        let ms = |s: f64| timing.then_some(s * 1e3);
        rows.push(PredictionRow {
            pws,
            family: "OM-FNN".into(),
            xi: avg(om_xi),
            train_ms: ms(om_time),
            population_values: tade.population * om_topology.genome_len(),
            tasks,
        });
        rows.push(PredictionRow {
            pws,
            family: "SISO-FNN".into(),
            xi: avg(siso_xi),
            train_ms: ms(siso_time),
            population_values: 2 * tade.population * siso_topology.genome_len(),
            tasks,
        });
    }
    Ok(PredictionReport { rows })
}

pub fn write_prediction_report<W: Write>(writer: W, report: &PredictionReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["pws", "family", "xi_cpu", "xi_mem", "train_ms", "population_values", "tasks"])?;
    for r in &report.rows {
        w.write_record([
            r.pws.to_string(),
            r.family.clone(),
            r.xi[0].to_string(),
            r.xi[1].to_string(),
            opt(r.train_ms),
            r.population_values.to_string(),
            r.tasks.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
