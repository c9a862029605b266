//! Lookup-based converters.
//!
//! Each model is rewritten as `score_j(x) = bias_j + Σ_i term_ij(x_i)`. Feature
//! table `i` stores the quantized terms for every populated value of `x_i`,
//! and final-stage logic adds them per output and selects a result. All words
//! share one offset-binary quantizer, so sums compare correctly and decode as
//! `(acc - n_terms · offset) / scale`.

use super::{declare_inputs, ConvertConfig, KeyStyle, Population, FULL_PRECISION_BITS};
use crate::error::{Error, Result};
use crate::ir::{
    bits_for, Action, ActionCall, Cmp, Dequant, LogicOp, MatchKind, Operand, PipelineProgram, ProgramOutput, Table,
    TableEntry, TableKey,
};
use crate::model::{ModelParams, ModelSpec};
use crate::table::{exact_to_lpm, exact_to_ternary, MatchKey, QuantizerConfig};

/// Log-likelihood span, in bits below the largest term, kept above the floor
/// word when quantizing naive Bayes tables at finite precision.
const LOG_FLOOR_SPAN: f64 = 32.0;

struct Sums {
    acc: Vec<String>,
    quantizer: QuantizerConfig,
    n_terms: u32,
}

fn ceil_log2(n: u32) -> u32 {
    if n <= 1 {
        0
    } else {
        32 - (n - 1).leading_zeros()
    }
}

/// Feature values given table entries, and the value whose vector serves as
/// the default action when not every value is present.
fn populated_values(spec: &ModelSpec, i: usize, cfg: &ConvertConfig) -> Result<(Vec<u64>, Option<u64>)> {
    let width = spec.schema.bit_width(i);
    let mode = match cfg.population {
        Population::Auto if width <= 16 => Population::FullDomain,
        Population::Auto => Population::Unique,
        m => m,
    };
    match mode {
        Population::FullDomain => {
            cfg.check_entries(&format!("full-domain lookup table for feature {i}"), 1u128 << width)
                .map_err(|e| Error::Budget(format!("{e}; use unique-value mode")))?;
            Ok(((0..=spec.schema.max_value(i)).collect(), None))
        }
        _ => {
            let observed = spec.schema.feature(i).observed.as_ref().ok_or_else(|| {
                Error::invalid(
                    format!("features[{i}].observed"),
                    "unique-value mode needs the observed feature values",
                )
            })?;
            let mut values = observed.clone();
            values.sort_unstable();
            values.dedup();
            cfg.check_entries(&format!("lookup table for feature {i}"), values.len() as u128)?;
            Ok((values, Some(spec.schema.max_value(i) / 2)))
        }
    }
}

/// Builds the feature tables and per-output accumulators.
fn build_sums(
    p: &mut PipelineProgram,
    spec: &ModelSpec,
    cfg: &ConvertConfig,
    n_out: usize,
    term: impl Fn(usize, u64) -> Vec<f64>,
    bias: Option<&[f64]>,
    log_floor: bool,
) -> Result<Sums> {
    let n = spec.schema.len();
    let bits = cfg.action_bits.unwrap_or(FULL_PRECISION_BITS);
    if !(2..=FULL_PRECISION_BITS).contains(&bits) {
        return Err(Error::invalid("action_bits", format!("{bits} outside 2..={FULL_PRECISION_BITS}")));
    }
    let inputs = declare_inputs(p, spec);

    let mut rows: Vec<(Vec<(u64, Vec<f64>)>, Option<Vec<f64>>)> = Vec::with_capacity(n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut track = |v: &[f64]| {
        for &x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    };
    for i in 0..n {
        let (values, default) = populated_values(spec, i, cfg)?;
        let table: Vec<(u64, Vec<f64>)> = values.into_iter().map(|v| (v, term(i, v))).collect();
        table.iter().for_each(|(_, t)| track(t));
        let default = default.map(|v| term(i, v));
        if let Some(d) = &default {
            track(d);
        }
        rows.push((table, default));
    }
    if let Some(b) = bias {
        track(b);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("params", "model terms are not finite over the feature domain"));
    }
    if log_floor && cfg.action_bits.is_some() {
        lo = lo.max(hi - LOG_FLOOR_SPAN);
    }

    let n_terms = (n + usize::from(bias.is_some())) as u32;
    let quantizer = match cfg.action_bits {
        Some(b) => QuantizerConfig::fit(lo, hi, b, n_terms),
        None => QuantizerConfig::fit_lossless(lo, hi, FULL_PRECISION_BITS, n_terms),
    };
    let acc_width = (bits + ceil_log2(n_terms)).min(64);

    let mut words: Vec<Vec<String>> = Vec::with_capacity(n);
    for (i, (table_rows, default)) in rows.into_iter().enumerate() {
        let params: Vec<String> = (0..n_out).map(|j| p.declare(format!("w_f{i}_{j}"), bits)).collect();
        let call = |t: &[f64]| ActionCall {
            action_id: 0,
            action_data: t.iter().map(|&v| quantizer.quantize(v)).collect(),
        };
        let exact: Vec<TableEntry> = table_rows
            .iter()
            .map(|(v, t)| TableEntry::new(vec![MatchKey::exact(*v)], call(t)))
            .collect();
        let width = spec.schema.bit_width(i);
        let (kind, entries) = match cfg.lb_keys {
            KeyStyle::Exact => (MatchKind::Exact, exact),
            KeyStyle::Ternary => (MatchKind::Ternary, exact_to_ternary(&exact, width)?),
            KeyStyle::Lpm => (MatchKind::Lpm, exact_to_lpm(&exact, width)?),
        };
        let mut table = Table::new(
            format!("lookup_f{i}"),
            vec![TableKey { field: inputs[i].clone(), kind }],
            vec![Action { name: format!("set_terms_f{i}"), params: params.clone() }],
        );
        table.entries = entries;
        table.default_action = default.as_deref().map(call);
        p.tables.push(table);
        words.push(params);
    }

    let acc: Vec<String> = (0..n_out)
        .map(|j| {
            let dst = p.declare(format!("acc_{j}"), acc_width);
            let mut srcs: Vec<Operand> = words.iter().map(|w| Operand::field(&w[j])).collect();
            if let Some(b) = bias {
                srcs.push(Operand::Const(quantizer.quantize(b[j])));
            }
            p.logic.push(LogicOp::Sum { dst: dst.clone(), srcs });
            dst
        })
        .collect();
    Ok(Sums { acc, quantizer, n_terms })
}

fn label_field(p: &mut PipelineProgram, spec: &ModelSpec) -> String {
    p.declare("label", bits_for(spec.n_outputs.saturating_sub(1) as u64))
}

pub(super) fn map_svm(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Svm(params) = &spec.params else { unreachable!() };
    let planes = &params.hyperplanes;
    let mut p = PipelineProgram::new("svm_lb", "svm", "lb");
    let bias: Vec<f64> = planes.iter().map(|h| h.b).collect();
    let sums = build_sums(
        &mut p,
        spec,
        cfg,
        planes.len(),
        |i, v| planes.iter().map(|h| h.w[i] * v as f64).collect(),
        Some(&bias),
        false,
    )?;
    // real zero of a full sum
    let zero = sums.n_terms as u64 * sums.quantizer.offset as u64;
    let label_bits = bits_for(spec.n_outputs.saturating_sub(1) as u64);
    let mut votes = Vec::new();
    for (h, plane) in planes.iter().enumerate() {
        let [a, b] = plane.classes;
        let positive = p.declare(format!("positive_{h}"), 1);
        // a zero decision value votes for the lower class of the pair
        let cmp = if a < b { Cmp::Ge } else { Cmp::Gt };
        p.logic.push(LogicOp::Compare {
            dst: positive.clone(),
            lhs: Operand::field(&sums.acc[h]),
            cmp,
            rhs: Operand::Const(zero),
        });
        let vote = p.declare(format!("vote_{h}"), label_bits);
        p.logic.push(LogicOp::Select {
            dst: vote.clone(),
            cond: positive,
            then: Operand::Const(a as u64),
            otherwise: Operand::Const(b as u64),
        });
        votes.push(vote);
    }
    let label = label_field(&mut p, spec);
    p.logic.push(LogicOp::VoteCount { dst: label.clone(), srcs: votes, n_classes: spec.n_outputs as u32 });
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

pub(super) fn map_nb(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Nb(params) = &spec.params else { unreachable!() };
    let k = spec.n_outputs;
    let mut p = PipelineProgram::new("nb_lb", "nb", "lb");
    let priors: Vec<f64> = params.priors.iter().map(|q| q.log2()).collect();
    let sums = build_sums(
        &mut p,
        spec,
        cfg,
        k,
        |i, v| {
            (0..k)
                .map(|c| {
                    let (mean, var) = (params.means[c][i], params.variances[c][i]);
                    let ln = -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (v as f64 - mean).powi(2) / (2.0 * var);
                    ln / std::f64::consts::LN_2
                })
                .collect()
        },
        Some(&priors),
        true,
    )?;
    let label = label_field(&mut p, spec);
    p.logic.push(LogicOp::ArgMax { dst: label.clone(), srcs: sums.acc });
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

pub(super) fn map_kmeans(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Kmeans(params) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("kmeans_lb", "kmeans", "lb");
    let sums = build_sums(
        &mut p,
        spec,
        cfg,
        params.centroids.len(),
        |i, v| params.centroids.iter().map(|c| (v as f64 - c[i]).powi(2)).collect(),
        None,
        false,
    )?;
    let label = label_field(&mut p, spec);
    p.logic.push(LogicOp::ArgMin { dst: label.clone(), srcs: sums.acc });
    p.output = ProgramOutput::Label { field: label };
    Ok(p)
}

fn vector_output(p: &mut PipelineProgram, sums: Sums) {
    p.output = ProgramOutput::Vector {
        fields: sums.acc,
        dequant: Some(Dequant {
            scale: sums.quantizer.scale,
            zero: sums.n_terms as i64 * sums.quantizer.offset,
        }),
    };
}

pub(super) fn map_pca(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Pca(params) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("pca_lb", "pca", "lb");
    let sums = build_sums(
        &mut p,
        spec,
        cfg,
        spec.n_outputs,
        |i, v| params.components[i].iter().map(|w| (v as f64 - params.means[i]) * w).collect(),
        None,
        false,
    )?;
    vector_output(&mut p, sums);
    Ok(p)
}

pub(super) fn map_ae(spec: &ModelSpec, cfg: &ConvertConfig) -> Result<PipelineProgram> {
    let ModelParams::Ae(params) = &spec.params else { unreachable!() };
    let mut p = PipelineProgram::new("ae_lb", "ae", "lb");
    let sums = build_sums(
        &mut p,
        spec,
        cfg,
        spec.n_outputs,
        |i, v| params.weights[i].iter().map(|w| v as f64 * w).collect(),
        Some(&params.bias),
        false,
    )?;
    vector_output(&mut p, sums);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{stage_schedule, Simulator};
    use crate::model::{AeParams, Feature, FeatureSchema, Hyperplane, KmeansParams, NbParams, PcaParams, SvmParams};

    fn full() -> ConvertConfig {
        ConvertConfig { action_bits: None, ..ConvertConfig::default() }
    }

    #[test]
    fn ae_scalar_full_precision() {
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[3]).unwrap(),
            1,
            ModelParams::Ae(AeParams { weights: vec![vec![2.0]], bias: vec![1.0] }),
        )
        .unwrap();
        let sim = Simulator::new(&map_ae(&spec, &full()).unwrap()).unwrap();
        assert_eq!(sim.run(&[3]).unwrap().values(), vec![7.0]);
    }

    #[test]
    fn pca_at_means_is_zero() {
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[4, 4]).unwrap(),
            1,
            ModelParams::Pca(PcaParams { means: vec![5.0, 9.0], components: vec![vec![0.6], vec![-0.8]] }),
        )
        .unwrap();
        for cfg in [full(), ConvertConfig::default()] {
            let sim = Simulator::new(&map_pca(&spec, &cfg).unwrap()).unwrap();
            assert!(sim.run(&[5, 9]).unwrap().values()[0].abs() < 1e-3);
        }
    }

    #[test]
    fn svm_three_classes_has_three_accumulators() {
        let h = |a, b| Hyperplane { w: vec![1.0, -1.0], b: 0.5, classes: [a, b] };
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[4, 4]).unwrap(),
            3,
            ModelParams::Svm(SvmParams { hyperplanes: vec![h(0, 1), h(0, 2), h(1, 2)] }),
        )
        .unwrap();
        let p = map_svm(&spec, &ConvertConfig::default()).unwrap();
        assert_eq!(p.fields.iter().filter(|f| f.name.starts_with("acc_")).count(), 3);
        assert!(stage_schedule(&p).is_ok());
    }

    /// Integer weights at full precision: zero decision values resolve with
    /// the same tie rule as the reference.
    #[test]
    fn svm_integer_weights_exact() {
        for classes in [[0, 1], [1, 0]] {
            let spec = ModelSpec::new(
                FeatureSchema::with_widths(&[4, 4]).unwrap(),
                2,
                ModelParams::Svm(SvmParams { hyperplanes: vec![Hyperplane { w: vec![1.0, -1.0], b: 0.0, classes }] }),
            )
            .unwrap();
            let sim = Simulator::new(&map_svm(&spec, &full()).unwrap()).unwrap();
            for a in 0..16 {
                for b in 0..16 {
                    let want = spec.reference_predict(&vec![a, b].into()).unwrap() as u64;
                    assert_eq!(sim.predict(&[a, b]).unwrap(), want, "({a},{b})");
                }
            }
        }
    }

    #[test]
    fn nb_powers_of_two() {
        // identical conditionals, priors decide
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[3]).unwrap(),
            2,
            ModelParams::Nb(NbParams {
                priors: vec![0.25, 0.75],
                means: vec![vec![2.0], vec![2.0]],
                variances: vec![vec![1.0], vec![1.0]],
            }),
        )
        .unwrap();
        let sim = Simulator::new(&map_nb(&spec, &ConvertConfig::default()).unwrap()).unwrap();
        assert!((0..8).all(|v| sim.predict(&[v]).unwrap() == 1));
    }

    #[test]
    fn kmeans_midpoint_tie_goes_low() {
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[3]).unwrap(),
            2,
            ModelParams::Kmeans(KmeansParams { centroids: vec![vec![2.0], vec![4.0]] }),
        )
        .unwrap();
        let sim = Simulator::new(&map_kmeans(&spec, &ConvertConfig::default()).unwrap()).unwrap();
        assert_eq!(sim.predict(&[3]).unwrap(), 0);
        assert_eq!(sim.predict(&[2]).unwrap(), 0);
        assert_eq!(sim.predict(&[4]).unwrap(), 1);
    }

    #[test]
    fn unique_mode_uses_observed_values_and_median_default() {
        let mut f = Feature::new("x", 20);
        f.observed = Some(vec![7, 1000, 7, 500_000]);
        let spec = ModelSpec::new(
            FeatureSchema::new(vec![f]).unwrap(),
            1,
            ModelParams::Ae(AeParams { weights: vec![vec![1.0]], bias: vec![0.0] }),
        )
        .unwrap();
        let p = map_ae(&spec, &full()).unwrap();
        assert_eq!(p.tables[0].entries.len(), 3);
        let sim = Simulator::new(&p).unwrap();
        assert_eq!(sim.run(&[1000]).unwrap().values(), vec![1000.0]);
        // the default vector is taken at the domain median, 524287
        assert_eq!(sim.run(&[3]).unwrap().values(), vec![524_287.0]);

        let no_observed = ModelSpec::new(
            FeatureSchema::with_widths(&[20]).unwrap(),
            1,
            ModelParams::Ae(AeParams { weights: vec![vec![1.0]], bias: vec![0.0] }),
        )
        .unwrap();
        assert!(matches!(map_ae(&no_observed, &full()), Err(Error::Invalid { .. })));
    }

    #[test]
    fn compressed_tables_are_equivalent() {
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[6, 6]).unwrap(),
            2,
            ModelParams::Kmeans(KmeansParams { centroids: vec![vec![10.0, 50.0], vec![40.0, 20.0]] }),
        )
        .unwrap();
        let base = Simulator::new(&map_kmeans(&spec, &ConvertConfig { action_bits: Some(4), ..Default::default() }).unwrap()).unwrap();
        for keys in [KeyStyle::Ternary, KeyStyle::Lpm] {
            let cfg = ConvertConfig { action_bits: Some(4), lb_keys: keys, ..Default::default() };
            let p = map_kmeans(&spec, &cfg).unwrap();
            assert!(p.total_entries() < 128);
            let sim = Simulator::new(&p).unwrap();
            for a in 0..64 {
                for b in 0..64 {
                    assert_eq!(sim.execute(&[a, b]).unwrap(), base.execute(&[a, b]).unwrap());
                }
            }
        }
    }

    #[test]
    fn accumulator_width_covers_sums() {
        let spec = ModelSpec::new(
            FeatureSchema::with_widths(&[3, 3, 3]).unwrap(),
            1,
            ModelParams::Ae(AeParams { weights: vec![vec![1.0]; 3], bias: vec![-4.0] }),
        )
        .unwrap();
        let p = map_ae(&spec, &ConvertConfig { action_bits: Some(8), ..Default::default() }).unwrap();
        assert_eq!(p.field_width("acc_0"), Some(8 + 2));
    }
}
