mod common;

use common::golden;
use tablewright::codegen::{emit_entries, emit_p4, entries_doc, load_entries, Arch};
use tablewright::model::{BitRow, BnnLayer, BnnParams, ClassLeaf, ModelParams, Node, Split, Tree};
use tablewright::report::resource_report;
use tablewright::{convert, ConvertConfig, FeatureSchema, ModelSpec, PipelineProgram, Simulator, Variant};

fn single_split() -> ModelSpec {
    let tree = Tree {
        nodes: vec![
            Node::Split(Split { feature: 0, threshold: 4, left: 1, right: 2 }),
            Node::Leaf(ClassLeaf { label: 0 }),
            Node::Leaf(ClassLeaf { label: 1 }),
        ],
    };
    ModelSpec::new(FeatureSchema::with_widths(&[3]).unwrap(), 2, ModelParams::Dt(tree)).unwrap()
}

fn small_bnn() -> ModelSpec {
    let row = |s: &str| BitRow(s.chars().map(|c| c == '1').collect());
    let layers = vec![
        BnnLayer { rows: vec![row("101100"), row("011010")] },
        BnnLayer { rows: vec![row("10"), row("01")] },
    ];
    ModelSpec::new(FeatureSchema::with_widths(&[4, 2]).unwrap(), 2, ModelParams::Bnn(BnnParams { layers })).unwrap()
}

#[test]
fn empty_program_is_scaffolding_only() {
    let p = PipelineProgram::new("empty", "none", "none");
    let src = emit_p4(&p, Arch::V1Model).unwrap();
    assert!(!src.contains("table "));
    assert!(src.contains("V1Switch("));
    golden("golden/empty.p4", &src);
}

#[test]
fn dt_eb_single_split_source() {
    let p = convert(&single_split(), &ConvertConfig::default()).unwrap();
    let src = emit_p4(&p, Arch::V1Model).unwrap();
    assert!(src.contains("hdr.features.f0: ternary;"));
    assert!(src.contains("decision.apply();"));
    golden("golden/dt_eb_single_split.p4", &src);
}

#[test]
fn bnn_source_has_registers_and_bit_ops() {
    let p = convert(&small_bnn(), &ConvertConfig::default()).unwrap();
    let src = emit_p4(&p, Arch::V1Model).unwrap();
    assert!(src.contains("register<bit<6>>(2) weights_0;"));
    assert!(src.contains("~(meta.bnn_in_0 ^ meta.row_0_0)"));
    assert!(src.contains("[5:5]"));
    golden("golden/bnn_dm.p4", &src);
}

#[test]
fn emission_is_deterministic() {
    for spec in [single_split(), small_bnn()] {
        let a = convert(&spec, &ConvertConfig::default()).unwrap();
        let b = convert(&spec, &ConvertConfig::default()).unwrap();
        assert_eq!(emit_p4(&a, Arch::V1Model).unwrap(), emit_p4(&b, Arch::V1Model).unwrap());
        assert_eq!(emit_entries(&a), emit_entries(&b));
        assert_eq!(a.to_json(), b.to_json());
    }
}

#[test]
fn dt_eb_toy_entries() {
    let p = convert(&single_split(), &ConvertConfig::default()).unwrap();
    let doc = entries_doc(&p);
    let counts: Vec<usize> = doc.tables.iter().map(|t| t.entries.len()).collect();
    assert_eq!(counts, vec![2, 1]);
    assert!(doc.tables.iter().all(|t| t.default_action.is_some()));
    golden("golden/dt_eb_single_split.entries.json", &emit_entries(&p));

    let r = resource_report(&p).unwrap();
    assert_eq!((r.total_entries, r.default_actions, r.stages), (3, 2, 2));
}

#[test]
fn zero_entry_tables_keep_their_defaults() {
    // a constant tree converts to default-only tables
    let tree = Tree { nodes: vec![Node::Leaf(ClassLeaf { label: 1 })] };
    let spec = ModelSpec::new(FeatureSchema::with_widths(&[3]).unwrap(), 2, ModelParams::Dt(tree)).unwrap();
    let p = convert(&spec, &ConvertConfig::default().with_variant(Variant::Dm)).unwrap();
    let doc = entries_doc(&p);
    assert!(doc.tables.iter().all(|t| t.entries.is_empty() && t.default_action.is_some()));
    let reloaded = load_entries(&p, &emit_entries(&p)).unwrap();
    assert_eq!(Simulator::new(&reloaded).unwrap().predict(&[5]).unwrap(), 1);
}

#[test]
fn program_json_round_trip() {
    for spec in [single_split(), small_bnn()] {
        let p = convert(&spec, &ConvertConfig::default()).unwrap();
        assert_eq!(PipelineProgram::from_json(&p.to_json()).unwrap(), p);
    }
}
