use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rockfrag::features::{FeatureKind, FeatureRecord, SignalSource};
use rockfrag::fixtures;
use rockfrag::granulometry::{fit_rr, fit_rr_refined, FitConstraints, RrFit, SieveTable};
use rockfrag::pipeline::{trial_features, PipelineConfig};
use rockfrag::relative::{
    calibrate, classify, size_ratios, summarize, ClassCounts, Confidence, RatioTable, ReferenceCalibration, Scope,
    SizeClass,
};
use rockfrag::report::{write_features_csv, write_ratio_plot_csv, write_series_csv, SCHEMA_VERSION};
use rockfrag::simulate::{campaign_trial, pile_truth, CampaignSpec, PileTruth, TrialTruth};
use rockfrag::telemetry::{load_trial_dir, write_trial, MANIFEST_FILE};
use serde::{Deserialize, Serialize};

use crate::provenance::Provenance;
use crate::{
    CalibrateArgs, ClassifyArgs, Cli, CliError, Command, EstimateArgs, FeaturesArgs, FitRrArgs, ReferenceArgs,
    ReportArgs, SimulateArgs,
};

const DEFAULT_OUT: &str = "rockfrag-out";
const DEFAULT_SEED: u64 = 7;

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Features(a) => features(cli, a),
        Command::FitRr(a) => fit(cli, a),
        Command::Calibrate(a) => calibrate_cmd(cli, a),
        Command::Estimate(a) => estimate(cli, a),
        Command::Classify(a) => classify_cmd(cli, a),
        Command::Report(a) => report(cli, a),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let cfg: PipelineConfig = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn apply_reference(cfg: &mut PipelineConfig, r: &ReferenceArgs) {
    if let Some(p) = &r.reference {
        cfg.reference.pile = p.clone();
    }
    if r.operator.is_some() {
        cfg.reference.operator = r.operator.clone();
    }
    if r.epoch.is_some() {
        cfg.reference.epoch = r.epoch;
    }
    if r.xbar_mm.is_some() {
        cfg.reference.xbar_mm = r.xbar_mm;
    }
    if let Some(p) = r.p {
        cfg.confidence = p;
    }
}

fn sources(cli: &Cli) -> Vec<SignalSource> {
    if cli.source.is_empty() {
        vec![SignalSource::Bucket, SignalSource::Boom]
    } else {
        let set: BTreeSet<SignalSource> = cli.source.iter().copied().collect();
        set.into_iter().collect()
    }
}

fn source_overrides(cli: &Cli) -> Vec<String> {
    if cli.source.is_empty() {
        Vec::new()
    } else {
        vec![format!(
            "source={}",
            sources(cli).iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")
        )]
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, CliError> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

#[derive(Serialize)]
struct CampaignSummary {
    name: String,
    seed: u64,
    trials_per_pile: usize,
    payload_kg: f64,
}

#[derive(Serialize)]
struct GroundTruth {
    schema_version: u32,
    provenance: Provenance,
    campaign: CampaignSummary,
    piles: Vec<PileTruth>,
    trials: Vec<TrialTruth>,
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    let mut spec = CampaignSpec::named(&a.preset)?;
    let mut extra = vec![format!("preset={}", a.preset)];
    spec.seed = cli.seed.unwrap_or(DEFAULT_SEED);
    if let Some(n) = a.trials {
        spec.trials_per_pile = n;
        extra.push(format!("trials={n}"));
    }
    if let Some(m) = a.payload_kg {
        spec.payload_kg = m;
        extra.push(format!("payload_kg={m}"));
    }
    if !a.operators.is_empty() {
        spec.operators = a.operators.clone();
        extra.push(format!("operators={}", a.operators.join(",")));
    }
    if !a.days.is_empty() {
        spec.days = a.days.clone();
        extra.push(format!(
            "days={}",
            a.days.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
        ));
    }
    spec.validate()?;
    let out = out_dir(cli)?;
    let trials_dir = out.join("trials");
    let results: Vec<Result<TrialTruth, CliError>> = (0..spec.n_trials())
        .into_par_iter()
        .map(|i| {
            let (p, t) = spec.coordinates(i);
            let (record, truth) = campaign_trial(&spec, p, t)?;
            write_trial(&record, &trials_dir.join(&record.trial_id))?;
            Ok(truth)
        })
        .collect();
    let trials: Vec<TrialTruth> = results.into_iter().collect::<Result<_, _>>()?;
    let piles = spec
        .piles
        .iter()
        .map(|p| {
            let own: Vec<&TrialTruth> = trials.iter().filter(|t| t.pile_label == p.label).collect();
            pile_truth(p, &own)
        })
        .collect();
    let truth = GroundTruth {
        schema_version: SCHEMA_VERSION,
        provenance: Provenance::new("simulate", &cfg, &extra).with_seed(spec.seed),
        campaign: CampaignSummary {
            name: spec.name.clone(),
            seed: spec.seed,
            trials_per_pile: spec.trials_per_pile,
            payload_kg: spec.payload_kg,
        },
        piles,
        trials,
    };
    write_json(&out.join("ground_truth.json"), &truth)?;
    println!("wrote {} trials to {}", truth.trials.len(), trials_dir.display());
    Ok(())
}

fn find_manifests(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::data(format!("cannot list {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::data(e.to_string()))?.path();
        if path.is_dir() {
            find_manifests(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrialError {
    trial: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    source: Option<SignalSource>,
    error: String,
}

#[derive(Serialize, Deserialize)]
struct FeatureReport<P> {
    schema_version: u32,
    provenance: P,
    rows: Vec<FeatureRecord>,
    errors: Vec<TrialError>,
}

fn features(cli: &Cli, a: &FeaturesArgs) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if !a.dir.is_dir() {
        return Err(CliError::data(format!("{} is not a directory", a.dir.display())));
    }
    let mut manifests = Vec::new();
    find_manifests(&a.dir, &mut manifests)?;
    manifests.sort();
    if manifests.is_empty() {
        return Err(CliError::data(format!(
            "no trials: no {MANIFEST_FILE} below {}",
            a.dir.display()
        )));
    }
    let srcs = sources(cli);
    let per_trial: Vec<(Vec<FeatureRecord>, Vec<TrialError>)> = manifests
        .par_iter()
        .map(|m| {
            let name = m.parent().unwrap_or(m).display().to_string();
            let trial = match load_trial_dir(m) {
                Ok(t) => t,
                Err(e) => {
                    return (
                        Vec::new(),
                        vec![TrialError {
                            trial: name,
                            source: None,
                            error: e.to_string(),
                        }],
                    )
                }
            };
            let mut rows = Vec::new();
            let mut errors = Vec::new();
            for &s in &srcs {
                match trial_features(&trial, s, &cfg) {
                    Ok([b, z]) => {
                        if a.with_beta {
                            rows.push(b);
                        }
                        rows.push(z);
                    }
                    Err(e) => errors.push(TrialError {
                        trial: trial.trial_id.clone(),
                        source: Some(s),
                        error: e.to_string(),
                    }),
                }
            }
            (rows, errors)
        })
        .collect();
    let mut rows: Vec<FeatureRecord> = Vec::new();
    let mut errors: Vec<TrialError> = Vec::new();
    for (r, e) in per_trial {
        rows.extend(r);
        errors.extend(e);
    }
    rows.sort_by(|x, y| {
        (&x.trial_id, x.source, x.kind == FeatureKind::Zeta).cmp(&(&y.trial_id, y.source, y.kind == FeatureKind::Zeta))
    });
    errors.sort_by(|x, y| (&x.trial, x.source).cmp(&(&y.trial, y.source)));

    let mut extra = source_overrides(cli);
    if a.with_beta {
        extra.push("with_beta".into());
    }
    let mut prov = Provenance::new("features", &cfg, &extra);
    prov.input(&a.dir)?;
    let out = out_dir(cli)?;
    write_features_csv(&out.join("features.csv"), &rows)?;
    let n_rows = rows.len();
    let n_errors = errors.len();
    write_json(
        &out.join("features.json"),
        &FeatureReport {
            schema_version: SCHEMA_VERSION,
            provenance: prov,
            rows,
            errors: errors.clone(),
        },
    )?;
    println!("{} trials, {n_rows} feature rows, {n_errors} failures", manifests.len());
    if n_errors > 0 {
        for e in &errors {
            let src = e.source.map(|s| format!(" [{s}]")).unwrap_or_default();
            eprintln!("  {}{src}: {}", e.trial, e.error);
        }
        return Err(CliError::data(format!("{n_errors} trial/source evaluations failed")));
    }
    Ok(())
}

fn read_features(path: &Path) -> Result<Vec<FeatureRecord>, CliError> {
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        let report: FeatureReport<serde_json::Value> =
            serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Ok(report.rows)
    } else {
        Ok(rockfrag::report::read_features_csv(path)?)
    }
}

#[derive(Serialize)]
struct FitOutput {
    schema_version: u32,
    pile_label: String,
    method: rockfrag::granulometry::FitMethod,
    n: f64,
    x_c_mm: f64,
    xbar_mm: f64,
    rows_used: Vec<usize>,
    rms_residual: f64,
    constraints: FitConstraints,
    #[serde(skip_serializing_if = "Option::is_none")]
    input_sha256: Option<String>,
}

fn fit(cli: &Cli, a: &FitRrArgs) -> Result<(), CliError> {
    let (table, digest) = match (&a.sieve, &a.fixture) {
        (Some(p), None) => {
            let label = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (
                SieveTable::read_csv(p, 1.0, &label)?,
                Some(crate::provenance::digest_file(p)?),
            )
        }
        (None, Some(label)) => (
            fixtures::sieve_table(label)
                .ok_or_else(|| CliError::usage(format!("no bundled sieve table `{label}`")))??,
            None,
        ),
        _ => return Err(CliError::usage("give a sieve CSV or --fixture LABEL")),
    };
    let c = FitConstraints {
        p_lo: a.p_lo,
        p_hi_min: a.p_hi_min,
        p_hi_max: a.p_hi_max,
    };
    let f: RrFit = if a.refined {
        fit_rr_refined(&table, &c)?
    } else {
        fit_rr(&table, &c)?
    };
    let output = FitOutput {
        schema_version: SCHEMA_VERSION,
        pile_label: table.pile_label.clone(),
        method: f.method,
        n: f.model.n,
        x_c_mm: f.model.x_c_mm,
        xbar_mm: f.model.mean_mm(),
        rows_used: f.rows_used,
        rms_residual: f.rms_residual,
        constraints: c,
        input_sha256: digest,
    };
    println!(
        "{}: n = {:.4}, x_c = {:.2} mm, mean size = {:.2} mm",
        output.pile_label, output.n, output.x_c_mm, output.xbar_mm
    );
    if cli.out.is_some() {
        write_json(&out_dir(cli)?.join("fit_rr.json"), &output)?;
    }
    Ok(())
}

/// Reference mean size: explicit value, or the published sieve value when
/// the reference is one of the bundled piles.
fn reference_xbar(cfg: &PipelineConfig) -> Option<f64> {
    cfg.reference
        .xbar_mm
        .or_else(|| fixtures::published_mean_mm(&cfg.reference.pile))
}

/// One calibration per (source, epoch) present for the reference pile.
fn calibrations(
    rows: &[FeatureRecord],
    cfg: &PipelineConfig,
    srcs: &[SignalSource],
) -> Result<Vec<ReferenceCalibration>, CliError> {
    let r = &cfg.reference;
    let mut out = Vec::new();
    for &s in srcs {
        let epochs: BTreeSet<u32> = rows
            .iter()
            .filter(|f| f.source == s && f.kind == FeatureKind::Zeta && f.pile_label == r.pile)
            .filter(|f| r.operator.as_ref().is_none_or(|o| o == &f.operator))
            .map(|f| f.epoch)
            .filter(|e| r.epoch.is_none_or(|x| x == *e))
            .collect();
        for e in epochs {
            let mut scope = Scope::new(s).with_epoch(e);
            scope.operator = r.operator.clone();
            let mut cal = calibrate(rows, &scope, &r.pile)?;
            cal.xbar_ref_mm = reference_xbar(cfg);
            out.push(cal);
        }
    }
    if out.is_empty() {
        return Err(CliError::usage(format!(
            "reference pile `{}` has no ζ rows for the selected sources",
            r.pile
        )));
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct CalibrationFile<P> {
    schema_version: u32,
    provenance: P,
    calibrations: Vec<ReferenceCalibration>,
}

fn calibrate_cmd(cli: &Cli, a: &CalibrateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    apply_reference(&mut cfg, &a.reference);
    let rows = read_features(&a.features)?;
    let cals = calibrations(&rows, &cfg, &sources(cli))?;
    let mut prov = Provenance::new("calibrate", &cfg, &source_overrides(cli));
    prov.input(&a.features)?;
    for c in &cals {
        println!(
            "{} epoch {}: mu = {:.6}, sigma = {:.6}, n = {}",
            c.source, c.epoch, c.mu_ref, c.sigma_ref, c.n_trials
        );
    }
    write_json(
        &out_dir(cli)?.join("calibration.json"),
        &CalibrationFile {
            schema_version: SCHEMA_VERSION,
            provenance: prov,
            calibrations: cals,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
struct SieveRatio {
    pile: String,
    xbar_mm: f64,
    ratio: f64,
}

fn sieve_ratio_table(reference: &str) -> Result<Vec<SieveRatio>, CliError> {
    let means: Vec<(String, f64)> = fixtures::PUBLISHED_RR.iter().map(|r| (r.0.to_string(), r.3)).collect();
    let ratios = size_ratios(&means, reference)?;
    Ok(means
        .iter()
        .zip(ratios)
        .map(|((pile, x), (_, ratio))| SieveRatio {
            pile: pile.clone(),
            xbar_mm: *x,
            ratio,
        })
        .collect())
}

#[derive(Serialize)]
struct EstimateFile {
    schema_version: u32,
    provenance: Provenance,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tables: Vec<RatioTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sieve_ratios: Option<Vec<SieveRatio>>,
}

fn ratio_tables(
    rows: &[FeatureRecord],
    cfg: &PipelineConfig,
    srcs: &[SignalSource],
) -> Result<Vec<RatioTable>, CliError> {
    calibrations(rows, cfg, srcs)?
        .iter()
        .map(|c| summarize(rows, c, cfg.confidence).map_err(CliError::from))
        .collect()
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    apply_reference(&mut cfg, &a.reference);
    let out = out_dir(cli)?;
    let mut extra = source_overrides(cli);
    if a.sieve_only {
        extra.push("sieve_only".into());
        let table = sieve_ratio_table(&cfg.reference.pile)?;
        for r in &table {
            println!("{:>7}: {:.2}", r.pile, r.ratio);
        }
        let series: Vec<(String, f64)> = table.iter().map(|r| (r.pile.clone(), r.ratio)).collect();
        write_series_csv(&out.join("sieve_ratios.csv"), ["pile", "ratio"], &series)?;
        return write_json(
            &out.join("summary.json"),
            &EstimateFile {
                schema_version: SCHEMA_VERSION,
                provenance: Provenance::new("estimate", &cfg, &extra),
                tables: Vec::new(),
                sieve_ratios: Some(table),
            },
        );
    }
    let path = a
        .features
        .as_ref()
        .ok_or_else(|| CliError::usage("estimate needs a feature report or --sieve-only"))?;
    let rows = read_features(path)?;
    let tables = ratio_tables(&rows, &cfg, &sources(cli))?;
    let mut prov = Provenance::new("estimate", &cfg, &extra);
    prov.input(path)?;
    print_tables(&tables);
    write_ratio_plot_csv(&out.join("ratios.csv"), &tables)?;
    write_json(
        &out.join("summary.json"),
        &EstimateFile {
            schema_version: SCHEMA_VERSION,
            provenance: prov,
            tables,
            sieve_ratios: None,
        },
    )
}

fn print_tables(tables: &[RatioTable]) {
    for t in tables {
        println!(
            "reference {} ({} epoch {}): mu = {:.6}, sigma = {:.6}, n = {}",
            t.reference.pile, t.reference.source, t.reference.epoch, t.reference.mu, t.reference.sigma, t.reference.n
        );
        for r in &t.rows {
            let tag = if r.is_reference { " (ref)" } else { "" };
            println!(
                "  {:>7} {:>3}: {:.2} ± {:.2}{tag}  n = {}  smaller/indist/larger = {}/{}/{}",
                r.pile,
                r.operator,
                r.ratio_mean,
                r.ratio_std,
                r.n,
                r.class_counts.smaller,
                r.class_counts.indistinguishable,
                r.class_counts.larger
            );
        }
    }
}

#[derive(Serialize)]
struct ClassRow {
    trial_id: String,
    pile: String,
    operator: String,
    source: SignalSource,
    epoch: u32,
    zeta: f64,
    z: f64,
    class: SizeClass,
    cross_operator: bool,
}

#[derive(Serialize)]
struct PileCounts {
    pile: String,
    source: SignalSource,
    epoch: u32,
    counts: ClassCounts,
}

#[derive(Serialize)]
struct ClassificationFile {
    schema_version: u32,
    provenance: Provenance,
    confidence: Confidence,
    rows: Vec<ClassRow>,
    counts: Vec<PileCounts>,
}

fn classify_cmd(cli: &Cli, a: &ClassifyArgs) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    if let Some(p) = a.p {
        cfg.confidence = p;
    }
    let text = fs::read_to_string(&a.calibration)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", a.calibration.display())))?;
    let cal_file: CalibrationFile<serde_json::Value> =
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", a.calibration.display())))?;
    let rows = read_features(&a.features)?;
    let srcs = sources(cli);
    let mut out_rows = Vec::new();
    let mut skipped = 0usize;
    for f in rows
        .iter()
        .filter(|f| f.kind == FeatureKind::Zeta && srcs.contains(&f.source))
    {
        let Some(cal) = cal_file
            .calibrations
            .iter()
            .find(|c| c.source == f.source && c.epoch == f.epoch)
        else {
            skipped += 1;
            continue;
        };
        out_rows.push(ClassRow {
            trial_id: f.trial_id.clone(),
            pile: f.pile_label.clone(),
            operator: f.operator.clone(),
            source: f.source,
            epoch: f.epoch,
            zeta: f.value,
            z: cal.z_score(f.value)?,
            class: classify(f.value, cal, cfg.confidence)?,
            cross_operator: cal.operator.as_ref().is_some_and(|o| o != &f.operator),
        });
    }
    if skipped > 0 {
        log::warn!("{skipped} ζ rows have no calibration for their source and epoch");
    }
    if out_rows.is_empty() {
        return Err(CliError::data("no ζ rows match the calibrations"));
    }
    out_rows.sort_by(|x, y| (&x.trial_id, x.source).cmp(&(&y.trial_id, y.source)));
    let mut counts: Vec<PileCounts> = Vec::new();
    for r in &out_rows {
        match counts
            .iter_mut()
            .find(|c| c.pile == r.pile && c.source == r.source && c.epoch == r.epoch)
        {
            Some(c) => c.counts.add(r.class),
            None => {
                let mut c = ClassCounts::default();
                c.add(r.class);
                counts.push(PileCounts {
                    pile: r.pile.clone(),
                    source: r.source,
                    epoch: r.epoch,
                    counts: c,
                });
            }
        }
    }
    counts.sort_by(|x, y| {
        rockfrag::relative::pile_order_key(&x.pile)
            .partial_cmp(&rockfrag::relative::pile_order_key(&y.pile))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then((x.source, x.epoch).cmp(&(y.source, y.epoch)))
    });
    for c in &counts {
        println!(
            "{:>7} {} epoch {}: smaller/indist/larger = {}/{}/{}",
            c.pile, c.source, c.epoch, c.counts.smaller, c.counts.indistinguishable, c.counts.larger
        );
    }
    let mut prov = Provenance::new("classify", &cfg, &source_overrides(cli));
    prov.input(&a.features)?;
    prov.input(&a.calibration)?;
    write_json(
        &out_dir(cli)?.join("classification.json"),
        &ClassificationFile {
            schema_version: SCHEMA_VERSION,
            provenance: prov,
            confidence: cfg.confidence,
            rows: out_rows,
            counts,
        },
    )
}

#[derive(Serialize)]
struct GranulometryRow {
    pile: String,
    linearized: RrSummary,
    refined: RrSummary,
    published: RrSummary,
}

#[derive(Serialize)]
struct RrSummary {
    n: f64,
    x_c_mm: f64,
    xbar_mm: f64,
}

#[derive(Serialize)]
struct ReportFile {
    schema_version: u32,
    provenance: Provenance,
    granulometry: Vec<GranulometryRow>,
    sieve_ratios: Vec<SieveRatio>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    tables: Vec<RatioTable>,
}

fn report(cli: &Cli, a: &ReportArgs) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    apply_reference(&mut cfg, &a.reference);
    let out = out_dir(cli)?;
    let c = FitConstraints::default();
    let mut granulometry = Vec::new();
    let mut curves = String::from("pile,sieve_mm,passing_pct,model_pct\n");
    for table in fixtures::sieve_tables()? {
        let lin = fit_rr(&table, &c)?;
        let nl = fit_rr_refined(&table, &c)?;
        for (x, p) in table.sieve_mm.iter().zip(&table.passing_pct) {
            curves.push_str(&format!(
                "{},{x},{p},{}\n",
                table.pile_label,
                100.0 * lin.model.cdf(*x)?
            ));
        }
        let published = fixtures::published_model(&table.pile_label).expect("bundled pile");
        granulometry.push(GranulometryRow {
            pile: table.pile_label.clone(),
            linearized: summary(&lin),
            refined: summary(&nl),
            published: RrSummary {
                n: published.n,
                x_c_mm: published.x_c_mm,
                xbar_mm: fixtures::published_mean_mm(&table.pile_label).expect("bundled pile"),
            },
        });
    }
    fs::write(out.join("sieve_curves.csv"), curves).map_err(|e| CliError::data(e.to_string()))?;
    let sieve_ratios = if fixtures::published_mean_mm(&cfg.reference.pile).is_some() {
        sieve_ratio_table(&cfg.reference.pile)?
    } else {
        Vec::new()
    };
    let mut prov = Provenance::new("report", &cfg, &source_overrides(cli));
    let tables = match &a.features {
        Some(path) => {
            prov.input(path)?;
            let rows = read_features(path)?;
            let t = ratio_tables(&rows, &cfg, &sources(cli))?;
            write_ratio_plot_csv(&out.join("ratios.csv"), &t)?;
            print_tables(&t);
            t
        }
        None => Vec::new(),
    };
    for g in &granulometry {
        println!(
            "{:>6}: n = {:.4}, x_c = {:.2} mm, mean = {:.2} mm (published {:.4} / {} / {})",
            g.pile,
            g.linearized.n,
            g.linearized.x_c_mm,
            g.linearized.xbar_mm,
            g.published.n,
            g.published.x_c_mm,
            g.published.xbar_mm
        );
    }
    write_json(
        &out.join("report.json"),
        &ReportFile {
            schema_version: SCHEMA_VERSION,
            provenance: prov,
            granulometry,
            sieve_ratios,
            tables,
        },
    )
}

fn summary(f: &RrFit) -> RrSummary {
    RrSummary {
        n: f.model.n,
        x_c_mm: f.model.x_c_mm,
        xbar_mm: f.model.mean_mm(),
    }
}
