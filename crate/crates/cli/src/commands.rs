//! Subcommand implementations.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use serde::Serialize;
use vmscale::autoscaler::{autoscale as cluster, write_clustering, TaskDemand, VmDemand};
use vmscale::orchestrator::{
    absolute_demand, compare_scenarios, prediction_report, resource_columns, run_scenarios, write_comparison, write_metrics,
    write_prediction_report, Scenario, ScenarioRun, Workload,
};
use vmscale::placement::{place as place_vms, write_allocation, Engine, PlacementSummary, VmInstance};
use vmscale::predictor::{Predictor, TrainerMeta};
use vmscale::seed;
use vmscale::traces::{aggregate, make_windows, normalize, parse_trace, synth_workload, write_trace, ParseOptions, TaskSeries};
use vmscale::training::{train_tade, write_generation_log, TadeConfig};
use vmscale::{Error, Result};

use crate::config::RunConfig;

pub struct Context {
    pub config: RunConfig,
    pub dry_run: bool,
}

impl Context {
    pub fn new(config: RunConfig, dry_run: bool) -> Self {
        Context { config, dry_run }
    }

    /// Renders `name` into memory and writes it under the output directory.
    fn emit(&self, name: &str, render: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        if self.dry_run {
            return Ok(());
        }
        let path = self.config.paths.out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, buf)?;
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.emit(name, |buf| {
            serde_json::to_writer_pretty(&mut *buf, value)?;
            buf.push(b'\n');
            Ok(())
        })
    }

    fn raw_traces(&self) -> Result<Vec<TaskSeries>> {
        let path = self.config.trace_path()?;
        parse_trace(BufReader::new(File::open(path)?), &ParseOptions::default())
    }

    /// Configured trace, aggregated to the window size.
    fn traces(&self) -> Result<Vec<TaskSeries>> {
        self.raw_traces()?
            .iter()
            .map(|s| aggregate(s, self.config.pws).map_err(|e| Error::Config { field: "pws".into(), msg: e.to_string() }))
            .collect()
    }
}

pub fn gen(ctx: &Context) -> Result<()> {
    let series = synth_workload(&ctx.config.synth, ctx.config.seed)?;
    ctx.emit("trace.csv", |buf| write_trace(buf, &series, b','))
}

#[derive(Serialize)]
struct TrainRow {
    vm_id: String,
    generations: usize,
    stopped_early: bool,
    train_fitness: Vec<f64>,
    validation_fitness: Vec<f64>,
}

fn model_path(vm_id: &str) -> String {
    format!("predictors/{vm_id}.json")
}

pub fn train(ctx: &Context, only: Option<&str>) -> Result<()> {
    let c = &ctx.config;
    let traces = ctx.traces()?;
    let selected: Vec<&TaskSeries> = traces.iter().filter(|s| only.is_none_or(|v| v == s.vm_id)).collect();
    if let Some(v) = only {
        if selected.is_empty() {
            return Err(Error::InvalidArgument(format!("vm `{v}` is not in the trace")));
        }
    }
    let forecast = c.forecast_config();
    let mut rows = Vec::with_capacity(selected.len());
    for s in selected {
        let cols = resource_columns(s)?;
        let two = s.select_resources(&cols)?;
        let normalized = normalize(&two)?;
        let windows = make_windows::<f64>(&normalized, forecast.inputs)?;
        let topology = forecast.topology(2)?;
        let tade = TadeConfig { seed: seed::derive(c.seed, &[seed::tag_str(&s.vm_id)]), ..forecast.tade.clone() };
        let out = train_tade(&windows, &topology, &tade)?;
        let mut predictor = Predictor::<f64>::new(topology, two.resources.clone()).with_alpha(forecast.alpha)?;
        predictor.install(out.best.clone(), normalized.bounds.clone(), out.train_fitness.per_resource.clone())?;
        predictor.meta = TrainerMeta {
            trainer: "tade".into(),
            seed: tade.seed,
            generations: out.generations(),
            train_fitness: Some(out.train_fitness.per_resource.clone()),
            validation_fitness: Some(out.validation_fitness.per_resource.clone()),
        };
        let json = predictor.to_json()?;
        ctx.emit(&model_path(&s.vm_id), |buf| {
            buf.extend_from_slice(json.as_bytes());
            buf.push(b'\n');
            Ok(())
        })?;
        ctx.emit(&format!("convergence/{}.csv", s.vm_id), |buf| write_generation_log(buf, &two.resources, &out.history))?;
        rows.push(TrainRow {
            vm_id: s.vm_id.clone(),
            generations: out.generations(),
            stopped_early: out.stopped_early,
            train_fitness: out.train_fitness.per_resource,
            validation_fitness: out.validation_fitness.per_resource,
        });
    }
    ctx.emit_json("train.json", &rows)
}

pub fn predict(ctx: &Context, models: Option<&Path>) -> Result<()> {
    let traces = ctx.traces()?;
    let dir = models.unwrap_or(&ctx.config.paths.out);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["vm_id", "timestamp", "resource", "predicted", "padded"])?;
    for s in &traces {
        let path = dir.join(model_path(&s.vm_id));
        let text = fs::read_to_string(&path).map_err(|e| Error::InvalidArgument(format!("cannot read model {}: {e}", path.display())))?;
        let predictor = Predictor::<f64>::from_json(&text)?;
        let cols = predictor
            .resources
            .iter()
            .map(|r| {
                s.resources
                    .iter()
                    .position(|x| x == r)
                    .ok_or_else(|| Error::InvalidArgument(format!("vm `{}` has no `{r}` column", s.vm_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = predictor.topology.inputs;
        if s.len() < n {
            return Err(Error::InsufficientData(format!("vm `{}` has {} samples, need {n}", s.vm_id, s.len())));
        }
        let inputs: Vec<f64> = s.samples[s.len() - n..]
            .iter()
            .flat_map(|x| cols.iter().zip(&predictor.bounds).map(|(&c, b)| b.normalize(x.demand[c])))
            .collect();
        let f = predictor.predict_padded(&inputs)?;
        let predicted = predictor.denormalize(&f.predicted);
        let padded = predictor.denormalize(&f.padded);
        let next = s.samples[s.len() - 1].timestamp + s.interval_minutes as i64 * 60;
        for (k, r) in predictor.resources.iter().enumerate() {
            w.write_record([s.vm_id.clone(), next.to_string(), r.clone(), predicted[k].to_string(), padded[k].to_string()])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    ctx.emit("forecast.csv", |buf| {
        buf.extend_from_slice(&bytes);
        Ok(())
    })
}

/// Provisioned tasks and their absolute demand at interval `at`.
fn demand_at(ctx: &Context, traces: &[TaskSeries], at: Option<usize>) -> Result<(usize, Vec<TaskDemand>)> {
    let len = traces.iter().map(TaskSeries::len).min().unwrap_or(0);
    if len == 0 {
        return Err(Error::InsufficientData("trace has no samples".into()));
    }
    let t = at.unwrap_or(len - 1);
    if t >= len {
        return Err(Error::InvalidArgument(format!("interval {t} is past the last one ({})", len - 1)));
    }
    let mut tasks = Vec::new();
    for s in traces {
        let d = absolute_demand(s, resource_columns(s)?, t, ctx.config.simulation.reference);
        if !d.is_zero() {
            tasks.push(TaskDemand::new(s.vm_id.clone(), d)?);
        }
    }
    if tasks.is_empty() {
        return Err(Error::InsufficientData(format!("no task has demand at interval {t}")));
    }
    Ok((t, tasks))
}

#[derive(Serialize)]
struct AutoscaleSummary<'a> {
    interval: usize,
    k: usize,
    wcss: f64,
    counts: Vec<(&'a str, usize)>,
}

fn sized(ctx: &Context, at: Option<usize>) -> Result<(usize, Vec<TaskDemand>, VmDemand)> {
    let traces = ctx.traces()?;
    let (t, tasks) = demand_at(ctx, &traces, at)?;
    let interval_seed = seed::derive(ctx.config.seed, &[seed::tag_str("interval"), t as u64]);
    let demand = cluster(&tasks, &ctx.config.catalog, &ctx.config.autoscale, interval_seed)?;
    Ok((t, tasks, demand))
}

fn write_sizing(ctx: &Context, t: usize, tasks: &[TaskDemand], demand: &VmDemand) -> Result<()> {
    let catalog = &ctx.config.catalog;
    ctx.emit("clustering.csv", |buf| write_clustering(buf, tasks, demand, catalog))?;
    let counts = catalog.types.iter().map(|v| v.name.as_str()).zip(demand.counts.iter().copied()).collect();
    ctx.emit_json("autoscale.json", &AutoscaleSummary { interval: t, k: demand.k, wcss: demand.wcss, counts })
}

pub fn autoscale(ctx: &Context, at: Option<usize>) -> Result<()> {
    let (t, tasks, demand) = sized(ctx, at)?;
    write_sizing(ctx, t, &tasks, &demand)
}

#[derive(Serialize)]
struct PlaceSummary {
    interval: usize,
    engine: Engine,
    #[serde(flatten)]
    cost: PlacementSummary,
}

pub fn place(ctx: &Context, at: Option<usize>) -> Result<()> {
    let c = &ctx.config;
    let (t, tasks, demand) = sized(ctx, at)?;
    let vms: Vec<VmInstance> = tasks
        .iter()
        .zip(&demand.task_types)
        .map(|(task, &ty)| VmInstance::new(task.task_id.clone(), c.catalog.types[ty].name.clone(), c.catalog.types[ty].capacity()))
        .collect();
    let servers = c.fleet();
    let ga = c.sim_config().ga;
    let ga = vmscale::placement::GaConfig { seed: seed::derive(c.seed, &[seed::tag_str("interval"), t as u64]), ..ga };
    let allocation = place_vms(c.engine, &vms, &servers, &ga)?;
    write_sizing(ctx, t, &tasks, &demand)?;
    ctx.emit("allocation.csv", |buf| write_allocation(buf, &allocation, &servers, &vms))?;
    ctx.emit_json("placement.json", &PlaceSummary { interval: t, engine: c.engine, cost: PlacementSummary::of(&allocation) })
}

fn type_names(ctx: &Context) -> Vec<String> {
    ctx.config.catalog.types.iter().map(|t| t.name.clone()).collect()
}

fn emit_comparison(ctx: &Context, runs: &[ScenarioRun]) -> Result<()> {
    let comparison = compare_scenarios(runs)?;
    ctx.emit("summary.csv", |buf| write_comparison(buf, &comparison))?;
    ctx.emit_json("summary.json", &comparison)
}

pub fn simulate(ctx: &Context) -> Result<()> {
    let c = &ctx.config;
    let traces = ctx.traces()?;
    let servers = c.fleet();
    let workload = Workload { traces: &traces, servers: &servers, catalog: &c.catalog };
    if ctx.dry_run {
        c.sim_config().span(traces.iter().map(TaskSeries::len).min().unwrap_or(0))?;
        return Ok(());
    }
    let scenarios: Vec<Scenario> = c.scenarios.iter().map(|&kind| Scenario { kind, engine: c.engine }).collect();
    let runs = run_scenarios(&scenarios, &workload, &c.sim_config(), c.seed)?;
    let names = type_names(ctx);
    for run in &runs {
        ctx.emit(&format!("metrics-{}.csv", run.scenario.kind), |buf| write_metrics(buf, run, &names))?;
    }
    ctx.emit_json("runs.json", &runs)?;
    emit_comparison(ctx, &runs)
}

pub fn report(ctx: &Context, timing: bool) -> Result<()> {
    let c = &ctx.config;
    let traces = ctx.raw_traces()?;
    if ctx.dry_run {
        return Ok(());
    }
    let tade = TadeConfig { seed: c.seed, ..c.training.clone() };
    let prediction = prediction_report(&traces, &c.report.pws_set, c.predictor.inputs, c.predictor.hidden, &tade, timing)?;
    ctx.emit("prediction.csv", |buf| write_prediction_report(buf, &prediction))?;
    ctx.emit_json("prediction.json", &prediction)?;
    let runs_path = c.paths.out.join("runs.json");
    if runs_path.is_file() {
        let runs: Vec<ScenarioRun> = serde_json::from_reader(BufReader::new(File::open(&runs_path)?))?;
        emit_comparison(ctx, &runs)?;
    }
    Ok(())
}
