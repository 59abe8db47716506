use std::path::{Path, PathBuf};

use serde::Serialize;
use tabsynth::attacks::{
    attribute_attack, membership_attack, AttackReport, AttributeAttackConfig, DpGanFactory, GanFactory,
    GeneratorFactory, MembershipAttackConfig, NoiseFactory, ReplayFactory,
};
use tabsynth::data::{load_csv, subsample_rows};
use tabsynth::encoder::Span;
use tabsynth::gan::{self, EpochLosses, GanModel, LossMode};
use tabsynth::metrics::{dcr_nndr, ml_utility, similarity_report, PrivacyDistanceReport, SimilarityReport, UtilityReport};
use tabsynth::privacy::{train_dp as run_dp, DpVariant, PrivacyReport, PrivacySpec};
use tabsynth::{ColumnKind, ColumnSpec, Error, Table, TableEncoder, TableSchema};

use crate::config::{config_hash, load_config, resolve, AttackTarget, GeneratorKind, Resolved};
use crate::error::{CliError, Context};
use crate::report::{ensure_dir, envelope, write_json};
use crate::{default_out, Common, PrivacyFlags, TrainFlags};

fn resolved(common: &Common, train: Option<&TrainFlags>, inputs: bool) -> Result<Resolved, CliError> {
    let config = load_config(common.config.as_deref())?;
    let mut o = common.overrides();
    if let Some(t) = train {
        o.epochs = t.epochs;
        o.batch_size = t.batch_size;
    }
    resolve(config, o, default_out(), inputs)
}

fn load_inputs(r: &Resolved) -> Result<Table, CliError> {
    let (schema_path, data_path) = r.inputs.as_ref().expect("command resolved with inputs");
    let schema = TableSchema::from_path(schema_path).ctx("loading schema")?;
    load_csv(data_path, &schema).ctx("loading data")
}

#[derive(Debug, Serialize)]
struct ColumnLayout<'a> {
    name: &'a str,
    kind: ColumnKind,
    span: Option<Span>,
}

#[derive(Debug, Serialize)]
struct LayoutReport<'a> {
    n_rows: usize,
    /// Encoded width `T`.
    width: usize,
    /// Conditional vector width `E`.
    cond_width: usize,
    side_d: usize,
    side_g: usize,
    columns: Vec<ColumnLayout<'a>>,
}

fn layout_report(enc: &TableEncoder, n_rows: usize) -> LayoutReport<'_> {
    let l = &enc.layout;
    LayoutReport {
        n_rows,
        width: l.width,
        cond_width: l.cond_width,
        side_d: l.side_d,
        side_g: l.side_g,
        columns: enc
            .schema
            .columns
            .iter()
            .enumerate()
            .map(|(j, c): (usize, &ColumnSpec)| ColumnLayout {
                name: &c.name,
                kind: c.kind,
                span: l.span_of(j),
            })
            .collect(),
    }
}

pub fn fit(common: &Common) -> Result<(), CliError> {
    let r = resolved(common, None, true)?;
    let table = load_inputs(&r)?;
    let enc = TableEncoder::fit(&table, &r.config.train.encoder).ctx("fitting encoder")?;
    ensure_dir(&r.output_dir)?;
    enc.save(r.output_dir.join("encoder.json")).ctx("writing encoder sidecar")?;
    let hash = r.hash();
    let report = layout_report(&enc, table.n_rows());
    write_json(&r.output_dir, "layout.json", &envelope("fit", &hash, r.seed, &report))?;
    println!("T={} E={} d={}", report.width, report.cond_width, report.side_d);
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainReport {
    n_rows: usize,
    epochs_run: usize,
    width: usize,
    cond_width: usize,
    final_losses: Option<EpochLosses>,
    final_gp_grad_norm_median: Option<f64>,
}

fn save_model(dir: &Path, model: &GanModel, trace: &gan::LossTrace) -> Result<(), CliError> {
    ensure_dir(dir)?;
    model.save(dir.join("model.json")).ctx("writing checkpoint")?;
    trace.write_csv_path(dir.join("losses.csv")).ctx("writing loss trace")
}

fn train_report(n_rows: usize, model: &GanModel, trace: &gan::LossTrace) -> TrainReport {
    TrainReport {
        n_rows,
        epochs_run: trace.epochs.len(),
        width: model.width(),
        cond_width: model.cond_width(),
        final_losses: trace.epochs.last().copied(),
        final_gp_grad_norm_median: trace.gp_grad_norm_medians.last().copied(),
    }
}

pub fn train(common: &Common, flags: &TrainFlags) -> Result<(), CliError> {
    let r = resolved(common, Some(flags), true)?;
    let table = load_inputs(&r)?;
    let cfg = &r.config.train;
    let (model, trace) = match &flags.encoder {
        Some(p) => {
            let enc = TableEncoder::load(p).ctx("loading encoder sidecar")?;
            gan::train_with_encoder(&table, enc, cfg)
        }
        None => gan::train(&table, cfg),
    }
    .ctx("training")?;
    save_model(&r.output_dir, &model, &trace)?;
    let hash = r.hash();
    let report = train_report(table.n_rows(), &model, &trace);
    write_json(&r.output_dir, "train_report.json", &envelope("train", &hash, r.seed, &report))?;
    println!("trained {} epochs on {} rows", report.epochs_run, report.n_rows);
    Ok(())
}

/// Applies privacy flags on top of `base`, or builds a spec from the
/// flags alone. `n_rows` replaces the training-set size when given.
fn privacy_spec(base: Option<PrivacySpec>, f: &PrivacyFlags, n_rows: Option<usize>) -> Result<PrivacySpec, CliError> {
    let mut spec = match base {
        Some(s) => s,
        None => {
            let sigma = f
                .sigma
                .ok_or_else(|| CliError::Config("no privacy spec in config and no --sigma".into()))?;
            let batch = f
                .batch
                .ok_or_else(|| CliError::Config("no privacy spec in config and no --batch".into()))?;
            PrivacySpec::new(f.variant.unwrap_or(DpVariant::DDp), sigma, batch)
        }
    };
    if let Some(v) = f.variant {
        spec.variant = v;
    }
    if let Some(s) = f.sigma {
        spec.sigma = s;
    }
    if let Some(b) = f.batch {
        spec.batch_size = b;
    }
    if let Some(n) = f.n {
        spec.n_rows = Some(n);
    }
    if let Some(d) = f.delta {
        spec.delta = d;
    }
    if let Some(c) = f.clip {
        spec.clip = c;
    }
    if let Some(k) = f.n_discriminators {
        spec.n_discriminators = k;
    }
    match (f.epsilon, f.iterations) {
        (Some(_), Some(_)) => return Err(CliError::Config("--epsilon and --iterations are exclusive".into())),
        (Some(e), None) => {
            spec.epsilon = Some(e);
            spec.iterations = None;
        }
        (None, Some(t)) => {
            spec.iterations = Some(t);
            spec.epsilon = None;
        }
        (None, None) => {}
    }
    if n_rows.is_some() {
        spec.n_rows = n_rows;
    }
    if spec.n_rows.is_none() {
        return Err(CliError::Config("the training-set size is unknown (--n)".into()));
    }
    spec.validate().ctx("privacy spec")?;
    Ok(spec)
}

#[derive(Debug, Serialize)]
struct DpTrainReport {
    training: TrainReport,
    privacy: PrivacyReport,
    ledger_steps: u64,
}

pub fn train_dp(common: &Common, flags: &TrainFlags, privacy: &PrivacyFlags) -> Result<(), CliError> {
    if flags.encoder.is_some() {
        return Err(CliError::Config("train-dp fits its own encoder; drop --encoder".into()));
    }
    let mut r = resolved(common, Some(flags), true)?;
    let table = load_inputs(&r)?;
    let spec = privacy_spec(r.config.privacy.take(), privacy, Some(table.n_rows()))?;
    r.config.privacy = Some(spec.clone());
    r.config.train.loss_mode = LossMode::WganGp;
    let out = run_dp(&table, &r.config.train, &spec).ctx("private training")?;
    save_model(&r.output_dir, &out.model, &out.trace)?;
    let hash = r.hash();
    let report = DpTrainReport {
        training: train_report(table.n_rows(), &out.model, &out.trace),
        privacy: out.report.clone(),
        ledger_steps: out.ledger.steps,
    };
    write_json(&r.output_dir, "privacy_report.json", &envelope("train-dp", &hash, r.seed, &report))?;
    println!(
        "T={} epsilon={:.6} delta={} order={}",
        out.report.iterations, out.report.epsilon, out.report.delta, out.report.order
    );
    Ok(())
}

/// Parses `column=label` against the model's schema. Numeric columns take
/// a mode index instead of a label.
fn parse_condition(schema: &TableSchema, text: &str) -> Result<(usize, usize), CliError> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("condition `{text}` is not of the form column=label")))?;
    let j = schema
        .index_of(name.trim())
        .ok_or_else(|| CliError::Config(format!("unknown condition column `{name}`")))?;
    let col = &schema.columns[j];
    let value = value.trim();
    let class = match col.kind {
        ColumnKind::Categorical => col.categorical_values.iter().position(|v| v == value),
        _ => value.parse().ok(),
    };
    class
        .map(|k| (j, k))
        .ok_or_else(|| CliError::Config(format!("`{value}` is not a class of column `{name}`")))
}

#[derive(Debug, Serialize)]
struct SampleReport {
    n: usize,
    condition: Option<String>,
    model: PathBuf,
    output: PathBuf,
}

pub fn sample(
    common: &Common,
    model_path: Option<PathBuf>,
    n: usize,
    condition: Option<&str>,
    output: Option<PathBuf>,
) -> Result<(), CliError> {
    let r = resolved(common, None, false)?;
    let model_path = model_path.unwrap_or_else(|| r.output_dir.join("model.json"));
    let model = GanModel::load(&model_path).ctx("loading checkpoint")?;
    let cond = condition
        .map(|c| parse_condition(&model.encoder.schema, c))
        .transpose()?;
    let table = model.sample(n, cond, r.seed).ctx("sampling")?;
    let output = output.unwrap_or_else(|| r.output_dir.join("synthetic.csv"));
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    table.write_csv_path(&output).ctx("writing synthetic rows")?;
    let hash = r.hash();
    let report = SampleReport {
        n,
        condition: condition.map(str::to_string),
        model: model_path,
        output: output.clone(),
    };
    write_json(&r.output_dir, "sample_report.json", &envelope("sample", &hash, r.seed, &report))?;
    println!("wrote {n} rows to {}", output.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvaluationReport {
    n_real: usize,
    n_synthetic: usize,
    similarity: Option<SimilarityReport>,
    distance: Option<PrivacyDistanceReport>,
    utility: Option<UtilityReport>,
}

pub fn evaluate(common: &Common, synthetic: Option<PathBuf>) -> Result<(), CliError> {
    let r = resolved(common, None, true)?;
    let real = load_inputs(&r)?;
    let synth_path = synthetic.unwrap_or_else(|| r.output_dir.join("synthetic.csv"));
    let synth = load_csv(&synth_path, real.schema()).ctx("loading synthetic data")?;
    let e = &r.config.evaluate;
    let similarity = if e.similarity {
        Some(similarity_report(&real, &synth, e.normalize_wd).ctx("similarity")?)
    } else {
        None
    };
    let distance = if e.distance {
        Some(dcr_nndr(&real, &synth).ctx("distance to closest record")?)
    } else {
        None
    };
    let utility = match &e.test_data {
        Some(p) => {
            let test = load_csv(p, real.schema()).ctx("loading test data")?;
            Some(ml_utility(&real, &synth, &test, &e.models, r.seed).ctx("ml utility")?)
        }
        None => None,
    };
    let report = EvaluationReport {
        n_real: real.n_rows(),
        n_synthetic: synth.n_rows(),
        similarity,
        distance,
        utility,
    };
    let hash = r.hash();
    write_json(&r.output_dir, "evaluation.json", &envelope("evaluate", &hash, r.seed, &report))?;
    if let Some(s) = &report.similarity {
        println!("avg_jsd={:.6} avg_wd={:.6} diff_corr={:.6}", s.avg_jsd, s.avg_wd, s.diff_corr);
    }
    if let Some(d) = &report.distance {
        println!("dcr_rs={:.6} nndr_rs={:.6}", d.real_synth.dcr, d.real_synth.nndr);
    }
    Ok(())
}

fn factory(r: &Resolved, n_rows: usize) -> Result<Box<dyn GeneratorFactory>, CliError> {
    Ok(match r.config.attack.generator {
        GeneratorKind::Gan => Box::new(GanFactory(r.config.train.clone())),
        GeneratorKind::DpGan => {
            let base = r
                .config
                .privacy
                .clone()
                .ok_or_else(|| CliError::Config("dp_gan generator needs a `privacy` section".into()))?;
            let mut spec = privacy_spec(Some(base), &PrivacyFlags::default(), Some(n_rows))?;
            spec.n_rows = None;
            let train = gan::TrainConfig {
                loss_mode: LossMode::WganGp,
                ..r.config.train.clone()
            };
            Box::new(DpGanFactory(train, spec))
        }
        GeneratorKind::Replay => Box::new(ReplayFactory),
        GeneratorKind::Noise => Box::new(NoiseFactory),
    })
}

#[derive(Debug, Serialize)]
struct AttackSummary {
    kind: AttackTarget,
    generator: GeneratorKind,
    attack: AttackReport,
}

pub fn attack(common: &Common) -> Result<(), CliError> {
    let r = resolved(common, None, true)?;
    let table = load_inputs(&r)?;
    let a = &r.config.attack;
    let f = factory(&r, table.n_rows())?;
    let report = match a.kind {
        AttackTarget::Membership => {
            let want = a.reference_rows + a.targets;
            let rows = subsample_rows(&table, want, r.seed).map_err(|e| match e {
                Error::NTooLarge { .. } => CliError::Config(format!(
                    "membership attack needs {want} rows (reference + targets), data has {}",
                    table.n_rows()
                )),
                e => CliError::from_lib("selecting attack rows", e),
            })?;
            let reference = rows.select(&(0..a.reference_rows).collect::<Vec<_>>());
            let targets: Vec<_> = (a.reference_rows..want).map(|i| rows.row(i).to_vec()).collect();
            let cfg = MembershipAttackConfig {
                seed: r.seed,
                ..a.membership.clone()
            };
            membership_attack(f.as_ref(), &reference, &targets, &cfg).ctx("membership attack")?
        }
        AttackTarget::Attribute => {
            let sensitive = a
                .sensitive
                .as_deref()
                .ok_or_else(|| CliError::Config("attribute attack needs `attack.sensitive`".into()))?;
            let cfg = AttributeAttackConfig {
                seed: r.seed,
                ..a.attribute.clone()
            };
            attribute_attack(f.as_ref(), &table, sensitive, &cfg).ctx("attribute attack")?
        }
    };
    println!(
        "p_real={:.4} p_fake={:.4} privacy_gain={:.4}",
        report.p_real, report.p_fake, report.privacy_gain
    );
    let summary = AttackSummary {
        kind: a.kind,
        generator: a.generator,
        attack: report,
    };
    let hash = r.hash();
    write_json(&r.output_dir, "attack.json", &envelope("attack", &hash, r.seed, &summary))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct AccountReport {
    planned: bool,
    privacy: PrivacyReport,
}

pub fn account(common: &Common, flags: &PrivacyFlags) -> Result<(), CliError> {
    let config = load_config(common.config.as_deref())?;
    let seed = common.seed.or(config.seed).unwrap_or(0);
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(default_out);
    let spec = privacy_spec(config.privacy, flags, None)?;
    let (planned, t) = match (spec.epsilon, spec.iterations) {
        (Some(_), _) => (true, spec.plan_iterations().ctx("planning iterations")?),
        (None, Some(t)) => (false, t),
        (None, None) => return Err(CliError::Config("give --epsilon to plan or --iterations to report".into())),
    };
    let privacy = spec.report(t).ctx("converting to (epsilon, delta)")?;
    println!(
        "T={t} epsilon={:.6} delta={} order={}",
        privacy.epsilon, privacy.delta, privacy.order
    );
    let hash = config_hash(&spec);
    write_json(&out, "account.json", &envelope("account", &hash, seed, &AccountReport { planned, privacy }))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> TableSchema {
        TableSchema::new(vec![
            ColumnSpec::continuous("x"),
            ColumnSpec::categorical("y", ["no", "yes"]).as_target(),
        ])
        .unwrap()
    }

    #[test]
    fn condition_parsing() {
        let s = schema();
        assert_eq!(parse_condition(&s, "y=yes").unwrap(), (1, 1));
        assert_eq!(parse_condition(&s, "x=0").unwrap(), (0, 0));
        assert!(parse_condition(&s, "y=maybe").is_err());
        assert!(parse_condition(&s, "z=1").is_err());
        assert!(parse_condition(&s, "y").is_err());
    }

    #[test]
    fn privacy_flags_override_and_validate() {
        let flags = PrivacyFlags {
            sigma: Some(2.0),
            batch: Some(16),
            n: Some(1000),
            epsilon: Some(1.0),
            ..PrivacyFlags::default()
        };
        let s = privacy_spec(None, &flags, None).unwrap();
        assert_eq!((s.sigma, s.batch_size, s.n_rows, s.epsilon), (2.0, 16, Some(1000), Some(1.0)));
        let both = PrivacyFlags {
            iterations: Some(5),
            ..flags.clone()
        };
        assert!(matches!(privacy_spec(None, &both, None), Err(CliError::Config(_))));
        let mut base = PrivacySpec::new(DpVariant::GDp, 5.0, 8);
        base.iterations = Some(10);
        let s = privacy_spec(Some(base.clone()), &PrivacyFlags::default(), Some(100)).unwrap();
        assert_eq!((s.variant, s.n_rows), (DpVariant::GDp, Some(100)));
        assert!(matches!(privacy_spec(Some(base), &PrivacyFlags::default(), None), Err(CliError::Config(_))));
        assert!(matches!(privacy_spec(None, &PrivacyFlags::default(), None), Err(CliError::Config(_))));
    }
}
