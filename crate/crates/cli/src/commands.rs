use std::path::{Path, PathBuf};

use dmtl_core::data::{self, generate, split};
use dmtl_core::trainer::{ablation_sweep, evaluate};
use dmtl_core::{model_file, report, trainer, Dataset};

use crate::config::{EvalSplit, RunConfig};
use crate::output::commit;
use crate::CliError;

pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

impl Context {
    fn path(&self, p: &Path) -> PathBuf {
        self.out_dir.join(p)
    }

    fn load_data(&self, tasks: &[dmtl_core::TaskSpec]) -> Result<Dataset, CliError> {
        Ok(data::load(&self.path(&self.cfg.data_in), tasks)?)
    }
}

pub fn gen_data(ctx: &Context) -> Result<(), CliError> {
    let ds = generate(&ctx.cfg.gen_config())?;
    let mut csv = Vec::new();
    data::write_csv(&ds, &mut csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    let csv = String::from_utf8(csv).map_err(|e| CliError::Runtime(e.to_string()))?;
    let path = ctx.path(&ctx.cfg.data_out);
    commit(&[(path.clone(), csv)])?;

    println!("wrote {}", path.display());
    println!("n = {}", ds.len());
    println!("D = {}", ds.feature_dim());
    for (t, spec) in ds.tasks.iter().enumerate() {
        let counts: Vec<String> = ds
            .histogram(t)
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{}:{c}", i + spec.min_label()))
            .collect();
        println!("{} histogram = {}", spec.name, counts.join(" "));
    }
    Ok(())
}

pub fn train(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let ds = ctx.load_data(&cfg.tasks)?;
    let (train_data, test_data) = split(&ds, cfg.test_fraction, cfg.seed)?;
    let outcome = trainer::train(
        &cfg.net_config(ds.feature_dim()),
        &cfg.train_config(),
        &train_data,
    )?;
    let metrics = evaluate(&outcome.model, &test_data)?;

    let mut files = vec![
        (
            ctx.path(&cfg.model_path),
            model_file::to_string(&outcome.model),
        ),
        (
            ctx.path(&cfg.trace_out),
            report::trace_csv(&cfg.tasks, &outcome.trace),
        ),
        (ctx.path(&cfg.report_out), report::metrics_text(&metrics)),
    ];
    if cfg.trace_steps {
        files.push((
            ctx.path(&cfg.step_trace_out),
            report::step_trace_csv(&cfg.tasks, &outcome.steps),
        ));
    }
    commit(&files)?;

    if let Some(last) = outcome.trace.last() {
        println!("epoch {} joint_loss = {}", last.epoch, last.joint_loss);
    }
    print!("{}", report::metrics_text(&metrics));
    Ok(())
}

pub fn eval(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let model = model_file::load(&ctx.path(&cfg.model_path))?;
    let ds = ctx.load_data(&model.config.tasks)?;
    let scored = match cfg.eval_split {
        EvalSplit::Test => split(&ds, cfg.test_fraction, cfg.seed)?.1,
        EvalSplit::All => ds,
    };
    let metrics = evaluate(&model, &scored)?;
    let text = report::metrics_text(&metrics);
    commit(&[(ctx.path(&cfg.eval_report_out), text.clone())])?;
    print!("{text}");
    Ok(())
}

pub fn ablation(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let ds = ctx.load_data(&cfg.tasks)?;
    let rows = ablation_sweep(
        &cfg.net_config(ds.feature_dim()),
        &cfg.train_config(),
        &ds,
        &cfg.ablation_seeds,
        cfg.test_fraction,
    )?;
    let csv = report::ablation_csv(&cfg.tasks, &rows);
    commit(&[(ctx.path(&cfg.ablation_out), csv.clone())])?;
    for line in csv
        .lines()
        .filter(|l| l.contains(",mean,") || l.starts_with("mode,"))
    {
        println!("{line}");
    }
    Ok(())
}
