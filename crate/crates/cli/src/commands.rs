use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tablewright::codegen::{emit_entries, emit_p4, load_entries, Arch};
use tablewright::ir::{ProgramOutput, SimOutput};
use tablewright::metrics::{self, ConfusionMatrix};
use tablewright::report::resource_report;
use tablewright::{ConvertConfig, Family, FeatureVector, ModelSpec, PipelineProgram, Simulator};

use crate::dataset::{self, Column, Dataset, LABEL_COLUMN};
use crate::{Bits, Invalid, MappingArgs};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    let text = read_text(path)?;
    ModelSpec::from_json(&text).with_context(|| format!("invalid model {}", path.display()))
}

pub fn load_program(path: &Path, entries: Option<&Path>) -> Result<PipelineProgram> {
    let program = PipelineProgram::from_json(&read_text(path)?)
        .with_context(|| format!("invalid program {}", path.display()))?;
    match entries {
        None => Ok(program),
        Some(e) => load_entries(&program, &read_text(e)?).with_context(|| format!("cannot install {}", e.display())),
    }
}

/// Preset first, then explicit flags on top.
pub fn mapping_config(args: &MappingArgs, family: Family) -> ConvertConfig {
    let mut cfg = ConvertConfig { variant: args.variant, ..ConvertConfig::default() };
    if let Some(p) = args.preset {
        cfg = p.apply(family, cfg);
    }
    if let Some(Bits(b)) = args.bits {
        cfg.action_bits = b;
    }
    if let Some(d) = args.depth {
        cfg.max_depth = Some(d);
    }
    if let Some(m) = args.mode {
        cfg.population = m;
    }
    if let Some(k) = args.keys {
        cfg.keys = k;
    }
    cfg
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn convert(model: &Path, args: &MappingArgs, out: &Path) -> Result<()> {
    let spec = load_model(model)?;
    let cfg = mapping_config(args, spec.family());
    log::info!("converting {} model with {:?}", spec.family(), cfg);
    let program = tablewright::convert(&spec, &cfg)?;
    let report = resource_report(&program)?.with_profile(args.profile).with_config(&cfg);
    let p4 = emit_p4(&program, Arch::V1Model)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_file(out, "program.json", &program.to_json())?;
    write_file(out, "entries.json", &emit_entries(&program))?;
    write_file(out, "model.p4", &p4)?;
    write_file(out, "report.json", &report.to_json())?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    println!(
        "{}: {} tables, {} entries, {} stages -> {}",
        program.name,
        report.tables.len(),
        report.total_entries,
        report.stages,
        out.display()
    );
    Ok(())
}

fn program_columns(p: &PipelineProgram) -> Vec<Column<'_>> {
    p.inputs().map(|f| Column { name: f.column(), width: f.width }).collect()
}

fn run_all(sim: &Simulator, data: &Dataset) -> Result<Vec<SimOutput>> {
    data.x
        .iter()
        .enumerate()
        .map(|(i, x)| sim.run(x).with_context(|| format!("row {}", i + 1)))
        .collect()
}

pub fn simulate(program: &Path, entries: Option<&Path>, data: &Path, out: Option<&Path>) -> Result<()> {
    let p = load_program(program, entries)?;
    let sim = Simulator::new(&p)?;
    let data = dataset::read(data, &program_columns(&p))?;
    let outputs = run_all(&sim, &data)?;
    let header: Vec<String> = match &p.output {
        ProgramOutput::Label { .. } => vec!["prediction".into()],
        ProgramOutput::Vector { fields, .. } => (0..fields.len()).map(|j| format!("out_{j}")).collect(),
    };
    let rows = outputs.iter().map(|o| match o {
        SimOutput::Label(l) => vec![l.to_string()],
        v => v.values().iter().map(|x| x.to_string()).collect(),
    });
    dataset::write_rows(dataset::output(out)?, &header, rows)?;
    log::info!("simulated {} rows", data.len());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CompareReport {
    family: String,
    variant: String,
    rows: usize,
    /// `labels` when the dataset has a label column, else `reference`.
    truth: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    macro_f1: Option<f64>,
    /// `confusion[actual][predicted]` for the pipeline.
    #[serde(skip_serializing_if = "Option::is_none")]
    confusion: Option<Vec<Vec<u64>>>,
    /// Per output dimension; null where a series is constant.
    #[serde(skip_serializing_if = "Option::is_none")]
    pearson: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_error: Option<f64>,
}

pub fn compare(model: &Path, program: &Path, entries: Option<&Path>, data: &Path, out: Option<&Path>) -> Result<()> {
    let spec = load_model(model)?;
    let p = load_program(program, entries)?;
    if p.family != spec.family().as_str() || p.inputs().count() != spec.schema.len() {
        return Err(Invalid(format!(
            "program `{}` ({} inputs, family {}) was not converted from this {} model with {} features",
            p.name,
            p.inputs().count(),
            p.family,
            spec.family(),
            spec.schema.len()
        ))
        .into());
    }
    let sim = Simulator::new(&p)?;
    let data = dataset::read(data, &program_columns(&p))?;
    let outputs = run_all(&sim, &data)?;
    let mut report = CompareReport {
        family: p.family.clone(),
        variant: p.variant.clone(),
        rows: data.len(),
        truth: if data.labels.is_some() { LABEL_COLUMN } else { "reference" },
        agreement: None,
        pipeline_accuracy: None,
        reference_accuracy: None,
        relative_accuracy: None,
        macro_f1: None,
        confusion: None,
        pearson: None,
        max_abs_error: None,
    };
    if spec.family().is_classifier() {
        let pred: Vec<u64> = outputs.iter().map(|o| o.label().expect("classifier programs emit labels")).collect();
        let reference = data
            .x
            .iter()
            .map(|x| Ok(spec.reference_predict(&FeatureVector(x.clone()))? as u64))
            .collect::<Result<Vec<u64>>>()?;
        report.agreement = Some(metrics::agreement(&pred, &reference));
        let truth = data.labels.as_ref().unwrap_or(&reference);
        if data.labels.is_some() {
            report.pipeline_accuracy = Some(metrics::accuracy(&pred, truth));
            report.reference_accuracy = Some(metrics::accuracy(&reference, truth));
            report.relative_accuracy = metrics::relative_accuracy(&pred, &reference, truth);
        } else {
            // the reference is the ground truth
            report.relative_accuracy = Some(metrics::agreement(&pred, &reference));
        }
        let cm = ConfusionMatrix::new(&pred, truth, spec.n_outputs);
        report.macro_f1 = Some(cm.macro_f1());
        report.confusion = Some(cm.matrix);
    } else {
        let got: Vec<Vec<f64>> = outputs.iter().map(SimOutput::values).collect();
        let want = data
            .x
            .iter()
            .map(|x| Ok(spec.reference_transform(&FeatureVector(x.clone()))?))
            .collect::<Result<Vec<Vec<f64>>>>()?;
        let column = |rows: &[Vec<f64>], j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
        report.pearson = Some((0..spec.n_outputs).map(|j| metrics::pearson(&column(&got, j), &column(&want, j))).collect());
        report.max_abs_error = Some(
            got.iter()
                .zip(&want)
                .flat_map(|(g, w)| g.iter().zip(w).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max),
        );
    }
    let mut w = dataset::output(out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
