use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use enf_core::abc::{
    abc_accept, build_reference_table, Acceptance, AbcConfig, PosteriorDraws, PosteriorSummary, PriorSpec,
    Target, MIN_POSTERIOR_DRAWS,
};
use enf_core::curve::linear_grid;
use enf_core::envelopes::{
    posterior_predictive_band, territory_marks, Envelope, PredictiveTarget, Statistic, StatisticConfig,
};
use enf_core::io::{load_sample_dir, load_sample_set, read_window_json, save_sample_set};
use enf_core::simulate::{fit_matern_mincontrast, simulate_matern, simulate_poisson, MaternParams};
use enf_core::summaries::{
    abc_summary, centered_l, empty_space_f, estimate_k, mark_correlation, pool_hierarchical, FConfig, Replicate,
};
use enf_core::thinning::{dependent_thin, p_thin_endpoints, p_thin_trees, thin_trees_to_count};
use enf_core::{Error, Group, NerveSample, NerveTree, Result, RngSpec, SampleSet, SummaryCurve, Window};

use crate::{
    EnvelopeArgs, FitArgs, Function, InferArgs, Model, Points, PredictiveArgs, ReportArgs, SimulateArgs,
    SummarizeArgs, ThinArgs, ThinModel,
};

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn parse_group(s: &str) -> Result<Group> {
    s.parse().map_err(|e: Error| usage(e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// A pattern CSV or a directory of them.
fn load_patterns(path: &Path) -> Result<SampleSet> {
    if path.is_dir() {
        load_sample_dir(path)
    } else {
        load_sample_set(path)
    }
}

fn file_stem_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PoissonParams {
    lambda: f64,
}

impl Default for PoissonParams {
    fn default() -> Self {
        PoissonParams {
            lambda: 40.0 / (330.0 * 432.0),
        }
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    seed: u64,
    n_trees: usize,
    n_ends: usize,
}

#[derive(Serialize)]
struct Manifest {
    model: &'static str,
    params: serde_json::Value,
    window: Window,
    base_seed: u64,
    replicates: Vec<ManifestEntry>,
}

fn read_params<T: for<'de> Deserialize<'de> + Default>(path: Option<&PathBuf>) -> Result<T> {
    match path {
        Some(p) => Ok(serde_json::from_reader(File::open(p)?)?),
        None => Ok(T::default()),
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    if a.n_reps == 0 {
        return Err(usage("--n-reps must be at least 1"));
    }
    let group = parse_group(&a.group)?;
    let window = match &a.window {
        Some(p) => read_window_json(p)?,
        None => Window::default(),
    };
    let (model, params_json) = match a.model {
        Model::Poisson => {
            let p: PoissonParams = read_params(a.params.as_ref())?;
            ("poisson", serde_json::to_value(p)?)
        }
        Model::Matern => {
            let p: MaternParams = read_params(a.params.as_ref())?;
            p.validate()?;
            ("matern", serde_json::to_value(p)?)
        }
    };
    create_dir(&a.out)?;
    let base = RngSpec::new(a.seed);
    let mut entries = Vec::with_capacity(a.n_reps);
    for i in 0..a.n_reps {
        let spec = base.derive(i as u64);
        let id = format!("{}_{:04}", a.prefix, i + 1);
        let mut sample = match a.model {
            Model::Poisson => {
                let p: PoissonParams = serde_json::from_value(params_json.clone())?;
                let pattern = simulate_poisson(p.lambda, &window, spec)?;
                let trees = pattern
                    .points()
                    .iter()
                    .enumerate()
                    .map(|(k, pt)| NerveTree::new(k as u64 + 1, *pt, Vec::new()))
                    .collect();
                NerveSample::new(id.clone(), id.clone(), group, trees, window)?
            }
            Model::Matern => {
                let p: MaternParams = serde_json::from_value(params_json.clone())?;
                simulate_matern(&p, &window, spec)?.sample
            }
        };
        sample.sample_id = id.clone();
        sample.subject_id = id.clone();
        sample.group = group;
        let file = format!("{id}.csv");
        entries.push(ManifestEntry {
            file: file.clone(),
            seed: spec.base_seed,
            n_trees: sample.n_trees(),
            n_ends: sample.n_ends(),
        });
        save_sample_set(&SampleSet::new(vec![sample])?, &a.out.join(file))?;
    }
    write_json(
        &a.out.join("manifest.json"),
        &Manifest {
            model,
            params: params_json,
            window,
            base_seed: a.seed,
            replicates: entries,
        },
    )
}

pub fn thin(a: &ThinArgs) -> Result<()> {
    let set = load_patterns(&a.input)?;
    let group = a.group.as_deref().map(parse_group).transpose()?;
    let need = |v: Option<f64>, name: &str| v.ok_or_else(|| usage(format!("--{name} is required for this model")));
    let need_n = || a.n_b.ok_or_else(|| usage("--n-b is required for this model"));
    let base = RngSpec::new(a.seed);
    let mut out = Vec::with_capacity(set.len());
    for (i, s) in set.samples().iter().enumerate() {
        let spec = base.derive(i as u64);
        let mut t = match a.model {
            ThinModel::PEnds => p_thin_endpoints(s, need(a.p, "p")?, spec)?,
            ThinModel::PTrees => p_thin_trees(s, need(a.p, "p")?, spec)?,
            ThinModel::Count => thin_trees_to_count(s, need_n()?, spec)?,
            ThinModel::Dependent => dependent_thin(s, need(a.theta, "theta")?, need_n()?, spec)?,
        };
        if let Some(g) = group {
            t.group = g;
        }
        if let Some(suffix) = &a.suffix {
            t.sample_id.push_str(suffix);
            t.subject_id.push_str(suffix);
        }
        out.push(t);
    }
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_sample_set(&SampleSet::new(out)?, &a.out)
}

fn pattern_of(s: &NerveSample, points: Points) -> enf_core::PointPattern {
    match points {
        Points::Bases => s.bases(),
        Points::Ends => s.ends(),
    }
}

pub fn summarize(a: &SummarizeArgs) -> Result<()> {
    let set = load_patterns(&a.input)?;
    if set.is_empty() {
        return Err(Error::InvalidData("no samples in input".into()));
    }
    if !(a.r_step > 0.0) || !(a.r_max > 0.0) {
        return Err(usage("--r-max and --r-step must be positive"));
    }
    let grid = linear_grid(0.0, a.r_max, a.r_step);
    let fconfig = FConfig {
        n_test_points: a.f_points,
        grid: grid.clone(),
    };
    let seed = || a.seed.ok_or_else(|| usage("--seed is required for F and the ABC summary"));
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }

    if a.function == Function::AbcSummary {
        let base = RngSpec::new(seed()?);
        let mut w = csv::Writer::from_path(&a.out)?;
        w.write_record(["sample_id", "summary"])?;
        for (i, s) in set.samples().iter().enumerate() {
            let v = abc_summary(&pattern_of(s, a.points), &fconfig, base.derive(i as u64))?;
            w.write_record([s.sample_id.clone(), v.to_string()])?;
        }
        w.flush()?;
        return Ok(());
    }

    let base = match a.function {
        Function::F => Some(RngSpec::new(seed()?)),
        _ => None,
    };
    let mut reps = Vec::with_capacity(set.len());
    for (i, s) in set.samples().iter().enumerate() {
        let p = pattern_of(s, a.points);
        let curve = match a.function {
            Function::K | Function::L if p.len() < 2 => None,
            Function::K => Some(estimate_k(&p, &grid)?),
            Function::L => Some(centered_l(&estimate_k(&p, &grid)?)?),
            Function::F => Some(empty_space_f(&p, &fconfig, base.unwrap().derive(i as u64))?),
            Function::Markcorr => {
                let m = territory_marks(s)?;
                if m.len() < 2 {
                    None
                } else {
                    Some(mark_correlation(&m, &grid, a.bandwidth)?)
                }
            }
            Function::AbcSummary => unreachable!(),
        };
        if let Some(curve) = curve {
            let count = match a.function {
                Function::Markcorr => territory_marks(s)?.len(),
                _ => p.len(),
            };
            reps.push(Replicate {
                subject_id: s.subject_id.as_str(),
                curve,
                count,
            });
        }
    }
    if reps.is_empty() {
        return Err(Error::Numeric("summary undefined for every sample".into()));
    }
    let pooled = pool_hierarchical(&reps)?;
    pooled.write_csv(File::create(&a.out)?)
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let set = load_patterns(&a.input)?;
    if !(a.r_min >= 0.0 && a.r_max > a.r_min) {
        return Err(usage("need 0 <= --r-min < --r-max"));
    }
    let grid = linear_grid(a.r_min, a.r_max, (a.r_max - a.r_min) / 99.0);
    let mut reps = Vec::new();
    let (mut trees, mut ends) = (0usize, 0usize);
    for s in set.samples() {
        trees += s.n_trees();
        ends += s.n_ends();
        let p = s.ends();
        if p.len() >= 2 {
            reps.push(Replicate {
                subject_id: s.subject_id.as_str(),
                curve: estimate_k(&p, &grid)?,
                count: p.len(),
            });
        }
    }
    if reps.is_empty() || trees == 0 {
        return Err(Error::InvalidData("no sample has two or more end points".into()));
    }
    let pooled = pool_hierarchical(&reps)?;
    let fitted = fit_matern_mincontrast(&pooled, ends as f64 / trees as f64)?;
    write_json(&a.out, &fitted)
}

fn parse_prior(spec: &str, trunc: f64) -> Result<PriorSpec> {
    let rate = spec
        .strip_prefix("exp:")
        .and_then(|r| r.parse::<f64>().ok())
        .ok_or_else(|| usage(format!("unsupported prior '{spec}'; expected exp:RATE")))?;
    PriorSpec::exponential(rate, trunc)
}

#[derive(Debug, Deserialize)]
struct TargetRow {
    target_id: String,
    #[serde(rename = "n_B")]
    n_b: usize,
    observed_summary: f64,
}

#[derive(Serialize)]
struct TargetSummary {
    target_id: String,
    n_b: usize,
    observed_summary: f64,
    n_rows: usize,
    n_invalid: usize,
    n_accepted: usize,
    tolerance: f64,
    median: f64,
    ci_low: f64,
    ci_high: f64,
    warning: Option<String>,
}

#[derive(Serialize)]
struct InferSummary {
    prior: PriorSpec,
    n_sims: usize,
    acceptance: Acceptance,
    f_threshold: f64,
    f_test_points: usize,
    seed: u64,
    invalid_fraction: f64,
    targets: Vec<TargetSummary>,
}

pub fn infer(a: &InferArgs) -> Result<()> {
    let prior = parse_prior(&a.prior, a.trunc)?;
    let acceptance = match (a.quantile, a.epsilon) {
        (Some(_), Some(_)) => return Err(usage("--quantile and --epsilon are mutually exclusive")),
        (_, Some(e)) => Acceptance::Epsilon(e),
        (q, None) => Acceptance::Quantile(q.unwrap_or(0.001)),
    };
    acceptance.validate()?;
    let config = AbcConfig {
        n_sims: a.n_sims,
        acceptance,
        f_config: FConfig {
            n_test_points: a.f_points,
            ..FConfig::default()
        },
        ..AbcConfig::default()
    };
    let healthy = load_patterns(&a.healthy)?;
    let top = RngSpec::new(a.seed);

    let observed: Vec<(Target, f64)> = if let Some(path) = &a.targets {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut v = Vec::new();
        for row in rdr.deserialize() {
            let r: TargetRow = row?;
            v.push((Target::new(r.target_id, r.n_b), r.observed_summary));
        }
        v
    } else {
        let dir = a.target_patterns.as_ref().expect("clap requires one target source");
        let set = load_patterns(dir)?;
        let obs_rng = top.derive(1);
        set.samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let summary = abc_summary(&s.bases(), &config.f_config, obs_rng.derive(i as u64))?;
                Ok((Target::new(s.sample_id.clone(), s.n_trees()), summary))
            })
            .collect::<Result<_>>()?
    };
    if observed.is_empty() {
        return Err(Error::InvalidData("no targets".into()));
    }
    let targets: Vec<Target> = observed.iter().map(|(t, _)| t.clone()).collect();
    let table = build_reference_table(&healthy, &targets, &prior, &config, top.derive(0))?;

    create_dir(&a.out)?;
    table.write_csv(BufWriter::new(File::create(a.out.join("reference_table.csv"))?))?;
    let mut all_draws = Vec::with_capacity(targets.len());
    let mut summaries = Vec::with_capacity(targets.len());
    for (target, obs) in &observed {
        let rep = abc_accept(&table, &target.target_id, *obs, acceptance)?;
        let ps = PosteriorSummary::from_values(&rep.draws.thetas)?;
        let warning = (ps.n_draws < MIN_POSTERIOR_DRAWS).then(|| {
            format!(
                "only {} accepted draws; credible interval is unreliable below {MIN_POSTERIOR_DRAWS}",
                ps.n_draws
            )
        });
        if let Some(w) = &warning {
            log::warn!("target {}: {w}", target.target_id);
        }
        PosteriorDraws::write_csv(
            std::slice::from_ref(&rep.draws),
            File::create(a.out.join(format!("posterior_{}.csv", file_stem_safe(&target.target_id))))?,
        )?;
        summaries.push(TargetSummary {
            target_id: target.target_id.clone(),
            n_b: target.n_b,
            observed_summary: *obs,
            n_rows: rep.n_rows,
            n_invalid: rep.n_invalid,
            n_accepted: ps.n_draws,
            tolerance: rep.tolerance,
            median: ps.median,
            ci_low: ps.ci_low,
            ci_high: ps.ci_high,
            warning,
        });
        all_draws.push(rep.draws);
    }
    PosteriorDraws::write_csv(&all_draws, File::create(a.out.join("posterior.csv"))?)?;
    write_json(
        &a.out.join("summary.json"),
        &InferSummary {
            prior,
            n_sims: config.n_sims,
            acceptance,
            f_threshold: config.f_threshold,
            f_test_points: config.f_config.n_test_points,
            seed: a.seed,
            invalid_fraction: table.invalid_fraction(),
            targets: summaries,
        },
    )
}

struct Predictive {
    healthy: SampleSet,
    observed: SampleSet,
    targets: Vec<PredictiveTarget>,
}

fn load_predictive(a: &PredictiveArgs) -> Result<Predictive> {
    let healthy = load_patterns(&a.healthy)?;
    let observed = load_patterns(&a.target_patterns)?;
    if observed.is_empty() {
        return Err(Error::InvalidData("no target patterns".into()));
    }
    let draws = PosteriorDraws::read_csv(File::open(&a.posterior)?)?;
    let targets = observed
        .samples()
        .iter()
        .map(|s| {
            let d = draws
                .iter()
                .find(|d| d.target_id == s.sample_id)
                .ok_or_else(|| Error::InvalidData(format!("no posterior draws for target {}", s.sample_id)))?;
            Ok(PredictiveTarget {
                target_id: s.sample_id.clone(),
                subject_id: s.subject_id.clone(),
                n_b: s.n_trees(),
                thetas: d.thetas.clone(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Predictive {
        healthy,
        observed,
        targets,
    })
}

#[derive(Serialize)]
struct Verdict {
    statistic: String,
    alpha: f64,
    n_sim: usize,
    n_curves: usize,
    verdict: &'static str,
    exit_points: Vec<f64>,
    dropped_r: Vec<f64>,
    warning: Option<String>,
}

fn run_statistic(p: &Predictive, a: &PredictiveArgs, stat: Statistic, svg: bool) -> Result<Verdict> {
    let cfg = StatisticConfig::default();
    let refs: Vec<&NerveSample> = p.observed.samples().iter().collect();
    let observed: SummaryCurve = stat.group_curve(&refs, &cfg)?;
    let index = Statistic::ALL.iter().position(|s| *s == stat).unwrap() as u64;
    let env: Envelope = posterior_predictive_band(
        &p.healthy,
        &p.targets,
        stat,
        &cfg,
        a.n_sim,
        a.alpha,
        Some(&observed),
        RngSpec::new(a.seed).derive(index),
    )?;
    create_dir(&a.out)?;
    env.write_csv(File::create(a.out.join(format!("{}_envelope.csv", stat.name())))?)?;
    if svg {
        fs::write(a.out.join(format!("{}.svg", stat.name())), crate::svg::render(&env, stat.name()))?;
    }
    let report = env.report();
    let verdict = Verdict {
        statistic: stat.name().to_string(),
        alpha: report.alpha,
        n_sim: a.n_sim,
        n_curves: report.n_curves,
        verdict: if report.inside == Some(true) { "inside" } else { "outside" },
        exit_points: report.exit_points,
        dropped_r: report.dropped_r,
        warning: report.warning,
    };
    write_json(&a.out.join(format!("{}_verdict.json", stat.name())), &verdict)?;
    Ok(verdict)
}

pub fn envelope(a: &EnvelopeArgs) -> Result<()> {
    let stat: Statistic = a.statistic.parse()?;
    let p = load_predictive(&a.common)?;
    run_statistic(&p, &a.common, stat, a.svg).map(|_| ())
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let p = load_predictive(&a.common)?;
    let verdicts = Statistic::ALL
        .iter()
        .map(|s| run_statistic(&p, &a.common, *s, true))
        .collect::<Result<Vec<_>>>()?;
    write_json(&a.common.out.join("report.json"), &verdicts)
}
